#include "survee/gcomputation.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <tuple>
#include <utility>

#include "survee/errors.hpp"

namespace survee {
namespace {

Eigen::MatrixXd per_unit_risks(const TimeDesignMatrix& design,
                               const Eigen::MatrixXd& prediction_covariates,
                               const Eigen::VectorXd& beta,
                               const std::vector<int>& target_times) {
  const Eigen::Index p = prediction_covariates.cols();
  const Eigen::VectorXd x_linpred = prediction_covariates * beta.head(p);
  const Eigen::MatrixXd hazards =
      hazard_matrix(x_linpred, design, beta.tail(design.num_columns()));
  return risks_at_times(hazards, design.row_times, target_times);
}

Eigen::VectorXd embed_free(const Eigen::VectorXd& free_values,
                           const std::vector<Eigen::Index>& free_index,
                           const Eigen::VectorXd& base) {
  Eigen::VectorXd full = base;
  for (std::size_t c = 0; c < free_index.size(); ++c)
    full[free_index[c]] = free_values[static_cast<Eigen::Index>(c)];
  return full;
}

std::vector<Eigen::Index> free_coordinates(Eigen::Index total,
                                           const std::vector<Eigen::Index>& pinned) {
  std::vector<Eigen::Index> free_index;
  free_index.reserve(static_cast<std::size_t>(total));
  for (Eigen::Index c = 0; c < total; ++c)
    if (std::find(pinned.begin(), pinned.end(), c) == pinned.end())
      free_index.push_back(c);
  return free_index;
}

// Score sums over units, Fisher information, and pooled binomial
// log-likelihood at one beta, restricted to the free coordinates and gathered
// in a single pass over the observed person-periods. Time-design rows are
// visited through their nonzero pattern so disjoint fits stay linear in the
// number of rows.
struct ScoreInfoSweep {
  Eigen::VectorXd score;
  Eigen::MatrixXd info;
  double loglik = 0.0;
};

ScoreInfoSweep score_info_sweep(const SurvivalDataset& data,
                                const TimeDesignMatrix& design,
                                const Eigen::VectorXd& beta,
                                const std::vector<Eigen::Index>& free_index) {
  const Eigen::Index n = data.size();
  const Eigen::Index p = data.covariates.cols();
  const Eigen::Index q = design.num_columns();
  const Eigen::Index K = design.num_rows();
  const Eigen::VectorXd x_linpred = data.covariates * beta.head(p);
  const Eigen::VectorXd time_linpred = design.matrix * beta.tail(q);
  const Eigen::VectorXd* uw = data.unit_weights ? &*data.unit_weights : nullptr;

  std::vector<Eigen::Index> pos(static_cast<std::size_t>(p + q), -1);
  for (std::size_t c = 0; c < free_index.size(); ++c)
    pos[static_cast<std::size_t>(free_index[c])] = static_cast<Eigen::Index>(c);
  const auto fp = [&](Eigen::Index j) { return pos[static_cast<std::size_t>(j)]; };

  std::vector<std::vector<std::pair<Eigen::Index, double>>> pattern(
      static_cast<std::size_t>(K));
  for (Eigen::Index k = 0; k < K; ++k)
    for (Eigen::Index j = 0; j < q; ++j)
      if (design.matrix(k, j) != 0.0)
        pattern[static_cast<std::size_t>(k)].push_back({j, design.matrix(k, j)});

  ScoreInfoSweep out;
  const Eigen::Index f = static_cast<Eigen::Index>(free_index.size());
  out.score = Eigen::VectorXd::Zero(f);
  out.info = Eigen::MatrixXd::Zero(f, f);

  Eigen::VectorXd t_score(q), t_info(q);
  Eigen::VectorXd curvature = Eigen::VectorXd::Zero(K);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = uw ? (*uw)[i] : 1.0;
    const int t_star = data.observed_time[i];
    const bool had_event = data.event[i] == 1;
    double resid_sum = 0.0, curve_sum = 0.0;
    t_score.setZero();
    t_info.setZero();
    for (Eigen::Index k = 0; k < K; ++k) {
      const int row_time = design.row_times[static_cast<std::size_t>(k)];
      if (row_time > t_star) break;
      const double eta = x_linpred[i] + time_linpred[k];
      const double mu = expit(eta);
      const bool y = had_event && row_time == t_star;
      out.loglik += w * (eta >= 0
                             ? (y ? 0.0 : -eta) - std::log1p(std::exp(-eta))
                             : (y ? eta : 0.0) - std::log1p(std::exp(eta)));
      const double resid = w * ((y ? 1.0 : 0.0) - mu);
      const double v = w * mu * (1.0 - mu);
      resid_sum += resid;
      curve_sum += v;
      curvature[k] += v;
      for (const auto& [j, val] : pattern[static_cast<std::size_t>(k)]) {
        t_score[j] += resid * val;
        t_info[j] += v * val;
      }
    }
    for (Eigen::Index a = 0; a < p; ++a) {
      if (fp(a) < 0) continue;
      const Eigen::Index fa = fp(a);
      out.score[fa] += resid_sum * data.covariates(i, a);
      for (Eigen::Index b = 0; b < p; ++b)
        if (fp(b) >= 0)
          out.info(fa, fp(b)) += curve_sum * data.covariates(i, a) * data.covariates(i, b);
      for (Eigen::Index j = 0; j < q; ++j)
        if (t_info[j] != 0.0 && fp(p + j) >= 0) {
          const double cross = data.covariates(i, a) * t_info[j];
          out.info(fa, fp(p + j)) += cross;
          out.info(fp(p + j), fa) += cross;
        }
    }
    for (Eigen::Index j = 0; j < q; ++j)
      if (t_score[j] != 0.0 && fp(p + j) >= 0) out.score[fp(p + j)] += t_score[j];
  }
  for (Eigen::Index k = 0; k < K; ++k)
    for (const auto& [j1, v1] : pattern[static_cast<std::size_t>(k)])
      for (const auto& [j2, v2] : pattern[static_cast<std::size_t>(k)]) {
        if (fp(p + j1) < 0 || fp(p + j2) < 0) continue;
        out.info(fp(p + j1), fp(p + j2)) += curvature[k] * v1 * v2;
      }
  return out;
}

// One fitted hazard model plus where its units live in the full dataset.
struct ScoreBlock {
  FitResult fit;
  SurvivalDataset subset;
  std::vector<Eigen::Index> columns;     // global unit index per subset column
  std::vector<Eigen::Index> free_index;  // free coordinates of fit.beta
};

// gamma parameters tied to one block: the standardization population and the
// per-unit risks evaluated at the fitted beta.
struct RiskBlock {
  std::size_t block = 0;
  Eigen::MatrixXd prediction_covariates;
  Eigen::MatrixXd per_unit;  // r x n over the full dataset
  Eigen::VectorXd gamma;
};

struct ContrastCore {
  std::vector<ScoreBlock> blocks;
  RiskBlock risk1, risk0;
  Eigen::Index n = 0;
};

ContrastCore compute_core(const SurvivalDataset& data, const Eigen::VectorXi& treatment,
                          const GComputationSpec& spec) {
  data.validate();
  const Eigen::Index n = data.size();
  if (treatment.size() != n)
    throw DimensionError("treatment length does not match record count");
  for (Eigen::Index i = 0; i < n; ++i)
    if (treatment[i] != 0 && treatment[i] != 1)
      throw ValidationError("record " + std::to_string(i + 1) + ": treatment " +
                            std::to_string(treatment[i]) + " is not 0/1");
  if (spec.target_times.empty()) throw ValidationError("no target times given");
  for (std::size_t r = 0; r < spec.target_times.size(); ++r) {
    if (spec.target_times[r] < 1 || spec.target_times[r] > data.grid.num_intervals)
      throw ValidationError("target time " + std::to_string(spec.target_times[r]) +
                            " outside grid 1.." + std::to_string(data.grid.num_intervals));
    if (r > 0 && spec.target_times[r] <= spec.target_times[r - 1])
      throw ValidationError("target times must be strictly ascending");
  }

  const ExpandedCovariates expanded = expand_covariates(data.covariates, spec.covariates);

  ContrastCore core;
  core.n = n;

  auto fit_block = [&](SurvivalDataset subset, std::vector<Eigen::Index> columns,
                       const std::string& label) {
    ScoreBlock block;
    try {
      block.fit = fit_pooled_logistic(subset, spec.time, spec.fit);
    } catch (const Error& e) {
      throw Error(label + " (" + form_name(spec.time.form) + " time): " + e.what());
    }
    block.free_index = free_coordinates(block.fit.beta.size(), block.fit.pinned);
    block.subset = std::move(subset);
    block.columns = std::move(columns);
    core.blocks.push_back(std::move(block));
  };

  if (spec.arm_strategy == ArmStrategy::separate_models) {
    std::vector<Eigen::Index> rows1, rows0;
    for (Eigen::Index i = 0; i < n; ++i) (treatment[i] == 1 ? rows1 : rows0).push_back(i);
    if (rows1.empty() || rows0.empty())
      throw ValidationError("one treatment arm has no units");

    SurvivalDataset arm1 = select_rows(data, rows1);
    arm1.covariates = [&] {
      Eigen::MatrixXd x(static_cast<Eigen::Index>(rows1.size()), expanded.matrix.cols());
      for (std::size_t r = 0; r < rows1.size(); ++r) x.row(static_cast<Eigen::Index>(r)) = expanded.matrix.row(rows1[r]);
      return x;
    }();
    SurvivalDataset arm0 = select_rows(data, rows0);
    arm0.covariates = [&] {
      Eigen::MatrixXd x(static_cast<Eigen::Index>(rows0.size()), expanded.matrix.cols());
      for (std::size_t r = 0; r < rows0.size(); ++r) x.row(static_cast<Eigen::Index>(r)) = expanded.matrix.row(rows0[r]);
      return x;
    }();

    fit_block(std::move(arm1), std::move(rows1), "treated-arm fit");
    fit_block(std::move(arm0), std::move(rows0), "control-arm fit");

    core.risk1.block = 0;
    core.risk1.prediction_covariates = expanded.matrix;
    core.risk0.block = 1;
    core.risk0.prediction_covariates = expanded.matrix;
  } else {
    SurvivalDataset all = data;
    Eigen::MatrixXd x(n, expanded.matrix.cols() + 1);
    x.col(0) = treatment.cast<double>();
    x.rightCols(expanded.matrix.cols()) = expanded.matrix;
    all.covariates = x;
    std::vector<Eigen::Index> columns(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) columns[static_cast<std::size_t>(i)] = i;
    fit_block(std::move(all), std::move(columns), "pooled fit");

    Eigen::MatrixXd x1 = x, x0 = x;
    x1.col(0).setOnes();
    x0.col(0).setZero();
    core.risk1.block = 0;
    core.risk1.prediction_covariates = std::move(x1);
    core.risk0.block = 0;
    core.risk0.prediction_covariates = std::move(x0);
  }

  for (RiskBlock* rb : {&core.risk1, &core.risk0}) {
    const ScoreBlock& sb = core.blocks[rb->block];
    rb->per_unit = per_unit_risks(sb.fit.design, rb->prediction_covariates, sb.fit.beta,
                                  spec.target_times);
    rb->gamma = rb->per_unit.rowwise().mean();
  }
  return core;
}

}  // namespace

CovariateFormula CovariateFormula::all_linear(int num_columns) {
  CovariateFormula formula;
  for (int j = 0; j < num_columns; ++j)
    formula.terms.push_back({j, CovariateTerm::Kind::linear, {}});
  return formula;
}

ExpandedCovariates expand_covariates(const Eigen::MatrixXd& raw,
                                     const CovariateFormula& formula,
                                     const std::vector<std::string>& raw_names) {
  const Eigen::Index n = raw.rows();
  auto name_of = [&](int column) {
    if (column < static_cast<int>(raw_names.size())) return raw_names[static_cast<std::size_t>(column)];
    return "x" + std::to_string(column);
  };

  Eigen::Index width = 0;
  for (const auto& term : formula.terms) {
    if (term.column < 0 || term.column >= raw.cols())
      throw DimensionError("covariate term refers to column " + std::to_string(term.column) +
                           " of " + std::to_string(raw.cols()));
    width += term.kind == CovariateTerm::Kind::linear
                 ? 1
                 : static_cast<Eigen::Index>(term.knots.size());
  }

  ExpandedCovariates out;
  out.matrix.resize(n, width);
  Eigen::Index at = 0;
  for (const auto& term : formula.terms) {
    if (term.kind == CovariateTerm::Kind::linear) {
      out.matrix.col(at) = raw.col(term.column);
      out.column_names.push_back(name_of(term.column));
      ++at;
      continue;
    }
    const Eigen::Index terms = static_cast<Eigen::Index>(term.knots.size()) - 1;
    out.matrix.col(at) = raw.col(term.column);
    out.column_names.push_back(name_of(term.column));
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::VectorXd s =
          term.kind == CovariateTerm::Kind::quadratic_spline
              ? restricted_quadratic_spline(raw(i, term.column), term.knots)
              : restricted_cubic_spline(raw(i, term.column), term.knots);
      out.matrix.row(i).segment(at + 1, terms) = s.transpose();
    }
    for (Eigen::Index j = 0; j < terms; ++j)
      out.column_names.push_back(name_of(term.column) + "_sp" + std::to_string(j + 1));
    at += 1 + terms;
  }
  return out;
}

Eigen::VectorXd FitResult::beta_x() const {
  const auto& slice = layout.find("beta_x");
  return beta.segment(slice.offset, slice.size);
}

Eigen::VectorXd FitResult::beta_s() const {
  const auto& slice = layout.find("beta_s");
  return beta.segment(slice.offset, slice.size);
}

FitResult fit_pooled_logistic(const SurvivalDataset& data, const TimeDesignSpec& time_spec,
                              const FitOptions& opts) {
  data.validate();
  const std::vector<int> unique_events = data.unique_event_times();
  if (unique_events.empty()) throw ValidationError("no events observed");

  FitResult fit;
  fit.grid = data.grid;
  fit.design = build_design(time_spec, data.grid, unique_events);
  const Eigen::Index p = data.covariates.cols();
  const Eigen::Index q = fit.design.num_columns();
  const Eigen::Index K = fit.design.num_rows();
  fit.layout.append("beta_x", p);
  fit.layout.append("beta_s", q);
  for (Eigen::Index j = 0; j < p; ++j)
    fit.coefficient_names.push_back("x" + std::to_string(j));
  fit.coefficient_names.insert(fit.coefficient_names.end(),
                               fit.design.column_names.begin(),
                               fit.design.column_names.end());

  fit.mode_used = opts.mode == ModeChoice::automatic
                      ? choose_mode(static_cast<std::uint64_t>(data.size()),
                                    static_cast<std::uint64_t>(K),
                                    static_cast<std::uint64_t>(p),
                                    static_cast<std::uint64_t>(q),
                                    fit.design.rows_are_unique_event_times,
                                    opts.memory_budget_bytes)
                  : opts.mode == ModeChoice::vectorized ? ScoreMode::vectorized
                                                        : ScoreMode::loop;

  Eigen::VectorXd base = Eigen::VectorXd::Zero(p + q);

  // Disjoint rows whose events all carry zero weight have no finite root;
  // their coordinates are fixed at the floor and left out of the solve.
  if (fit.design.rows_are_unique_event_times) {
    for (Eigen::Index k = 0; k < K; ++k) {
      double event_mass = 0.0;
      for (Eigen::Index i = 0; i < data.size(); ++i) {
        if (data.event[i] == 1 &&
            data.observed_time[i] == fit.design.row_times[static_cast<std::size_t>(k)])
          event_mass += data.unit_weights ? (*data.unit_weights)[i] : 1.0;
      }
      if (event_mass <= 0.0) {
        fit.pinned.push_back(p + k);
        base[p + k] = opts.pin_floor;
      }
    }
  }

  const std::vector<Eigen::Index> free_index = free_coordinates(p + q, fit.pinned);
  const double n_total = static_cast<double>(data.size());

  Eigen::VectorXd beta = base;
  if (std::find(fit.pinned.begin(), fit.pinned.end(), p) != fit.pinned.end()) {
    // The first disjoint column is shared by every row, so pinning it parks
    // all row predictors at the floor where the score is flat; starting the
    // free row coordinates at -pin_floor restores zero linear predictors.
    for (Eigen::Index k = 1; k < K; ++k)
      if (std::find(fit.pinned.begin(), fit.pinned.end(), p + k) == fit.pinned.end())
        beta[p + k] = -opts.pin_floor;
  }

  // Spline and linear time columns reach K^2 while the intercept stays at 1,
  // so the Newton system is solved in max-abs-scaled column units to keep the
  // factorization well conditioned.
  Eigen::VectorXd scale(static_cast<Eigen::Index>(free_index.size()));
  for (std::size_t c = 0; c < free_index.size(); ++c) {
    const Eigen::Index j = free_index[c];
    const double col_max = j < p ? data.covariates.col(j).cwiseAbs().maxCoeff()
                                 : fit.design.matrix.col(j - p).cwiseAbs().maxCoeff();
    scale[static_cast<Eigen::Index>(c)] = col_max > 0.0 ? col_max : 1.0;
  }

  // Newton ascent on the pooled binomial log-likelihood. The stacked score is
  // its gradient and the Fisher information its curvature, both in closed
  // form, and damped steps are accepted against the likelihood itself: a
  // score-norm acceptance rule cannot tell progress from the flat saturated
  // region, and concavity makes likelihood-monotone steps globally
  // convergent whenever the maximizer exists.
  ScoreInfoSweep cur = score_info_sweep(data, fit.design, beta, free_index);
  const double tol = opts.solver.tolerance;
  double norm =
      free_index.empty() ? 0.0 : cur.score.lpNorm<Eigen::Infinity>() / n_total;
  bool converged = norm <= tol;
  double lambda = 0.0;
  int iterations = 0;
  int flat_steps = 0;

  while (!converged && iterations < opts.solver.max_iterations) {
    ++iterations;
    const auto rescale = scale.cwiseInverse().asDiagonal();
    const Eigen::MatrixXd info_scaled = rescale * cur.info * rescale;
    const Eigen::VectorXd score_scaled = cur.score.cwiseQuotient(scale);
    const Eigen::VectorXd ridge = info_scaled.diagonal().cwiseMax(1e-12);

    bool accepted = false;
    while (!accepted) {
      Eigen::MatrixXd system = info_scaled;
      if (lambda > 0.0) system += (lambda * ridge).asDiagonal();
      const Eigen::LDLT<Eigen::MatrixXd> ldlt(system);
      if (ldlt.info() == Eigen::Success) {
        const Eigen::VectorXd step = ldlt.solve(score_scaled).cwiseQuotient(scale);
        if (step.allFinite()) {
          Eigen::VectorXd candidate = beta;
          for (std::size_t c = 0; c < free_index.size(); ++c)
            candidate[free_index[c]] += step[static_cast<Eigen::Index>(c)];
          ScoreInfoSweep next = score_info_sweep(data, fit.design, candidate, free_index);
          if (next.loglik >= cur.loglik - 1e-10 * (1.0 + std::abs(cur.loglik))) {
            flat_steps =
                next.loglik - cur.loglik <= 1e-13 * (1.0 + std::abs(cur.loglik))
                    ? flat_steps + 1
                    : 0;
            beta = std::move(candidate);
            cur = std::move(next);
            norm = cur.score.lpNorm<Eigen::Infinity>() / n_total;
            converged = norm <= tol;
            lambda = lambda > 1e-13 ? lambda / 10.0 : 0.0;
            accepted = true;
            continue;
          }
        }
      }
      lambda = lambda == 0.0 ? std::max(opts.solver.initial_damping, 1e-6)
                             : lambda * 10.0;
      if (lambda > 1e12) {
        flat_steps = opts.solver.max_iterations;
        break;
      }
    }
    if (flat_steps >= 4) break;
  }

  if (!converged) {
    char msg[160];
    std::snprintf(msg, sizeof msg,
                  "pooled logistic fit did not reach tolerance %g; final score norm %g",
                  tol, norm);
    throw ConvergenceError(msg, iterations, norm);
  }

  fit.beta = beta;
  fit.diagnostics.iterations = iterations;
  fit.diagnostics.final_norm = norm;
  fit.diagnostics.converged = true;
  if (!free_index.empty()) {
    const auto rescale = scale.cwiseInverse().asDiagonal();
    const Eigen::MatrixXd info_scaled = rescale * cur.info * rescale;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info_scaled,
                                                       Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    fit.diagnostics.jacobian_condition =
        lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  }
  return fit;
}

MarginalRisks estimate_risks(const FitResult& fit,
                             const Eigen::MatrixXd& prediction_covariates,
                             const std::vector<int>& target_times) {
  for (int t : target_times)
    if (t < 1 || t > fit.grid.num_intervals)
      throw ValidationError("target time " + std::to_string(t) + " outside grid 1.." +
                            std::to_string(fit.grid.num_intervals));
  MarginalRisks out;
  out.target_times = target_times;
  out.per_unit = per_unit_risks(fit.design, prediction_covariates, fit.beta, target_times);
  out.gamma = out.per_unit.rowwise().mean();
  return out;
}

ContrastResult causal_contrast(const SurvivalDataset& data,
                               const Eigen::VectorXi& treatment,
                               const GComputationSpec& spec) {
  ContrastCore core = compute_core(data, treatment, spec);
  const Eigen::Index n = core.n;
  const Eigen::Index r = static_cast<Eigen::Index>(spec.target_times.size());
  const double n_total = static_cast<double>(n);

  ContrastResult out;
  for (std::size_t b = 0; b < core.blocks.size(); ++b) {
    const std::string name = core.blocks.size() == 1 ? "beta" : (b == 0 ? "beta1" : "beta0");
    out.layout.append(name, static_cast<Eigen::Index>(core.blocks[b].free_index.size()));
  }
  out.layout.append("gamma1", r);
  out.layout.append("gamma0", r);
  out.layout.append("delta", r);
  const Eigen::Index total = out.layout.total();

  Eigen::MatrixXd bread = Eigen::MatrixXd::Zero(total, total);
  Eigen::MatrixXd stack = Eigen::MatrixXd::Zero(total, n);

  const Eigen::Index g1_off = out.layout.find("gamma1").offset;
  const Eigen::Index g0_off = out.layout.find("gamma0").offset;
  const Eigen::Index d_off = out.layout.find("delta").offset;

  for (std::size_t b = 0; b < core.blocks.size(); ++b) {
    const ScoreBlock& block = core.blocks[b];
    const std::vector<Eigen::Index>& free_index = block.free_index;
    const Eigen::Index f = static_cast<Eigen::Index>(free_index.size());
    const Eigen::Index off =
        out.layout.find(core.blocks.size() == 1 ? "beta" : (b == 0 ? "beta1" : "beta0")).offset;

    // Stack: score columns for the block's own units, zero elsewhere.
    const EFStack score =
        score_stack(block.subset, block.fit.design, block.fit.beta, nullptr,
                    block.fit.mode_used);
    for (std::size_t c = 0; c < block.columns.size(); ++c)
      for (Eigen::Index j = 0; j < f; ++j)
        stack(off + j, block.columns[c]) =
            score.matrix(free_index[static_cast<std::size_t>(j)], static_cast<Eigen::Index>(c));

    // Which gamma blocks differentiate through this block's beta.
    std::vector<std::pair<Eigen::Index, const RiskBlock*>> attached;
    if (core.risk1.block == b) attached.emplace_back(g1_off, &core.risk1);
    if (core.risk0.block == b) attached.emplace_back(g0_off, &core.risk0);

    // One central-difference sweep fills the score block and the gamma rows
    // that depend on it.
    const double step = std::cbrt(std::numeric_limits<double>::epsilon());
    Eigen::VectorXd beta = block.fit.beta;
    for (Eigen::Index c = 0; c < f; ++c) {
      const Eigen::Index coord = free_index[static_cast<std::size_t>(c)];
      const double h = step * std::max(1.0, std::abs(beta[coord]));
      const double saved = beta[coord];

      beta[coord] = saved + h;
      const Eigen::VectorXd score_up =
          score_stack(block.subset, block.fit.design, beta, nullptr, block.fit.mode_used)
              .row_sums() /
          n_total;
      std::vector<Eigen::VectorXd> risks_up;
      for (auto& item : attached)
        risks_up.push_back(per_unit_risks(block.fit.design,
                                          item.second->prediction_covariates, beta,
                                          spec.target_times)
                               .rowwise()
                               .mean());

      beta[coord] = saved - h;
      const Eigen::VectorXd score_down =
          score_stack(block.subset, block.fit.design, beta, nullptr, block.fit.mode_used)
              .row_sums() /
          n_total;
      std::vector<Eigen::VectorXd> risks_down;
      for (auto& item : attached)
        risks_down.push_back(per_unit_risks(block.fit.design,
                                            item.second->prediction_covariates, beta,
                                            spec.target_times)
                                 .rowwise()
                                 .mean());
      beta[coord] = saved;

      for (Eigen::Index j = 0; j < f; ++j) {
        const Eigen::Index row = free_index[static_cast<std::size_t>(j)];
        bread(off + j, off + c) = -(score_up[row] - score_down[row]) / (2.0 * h);
      }
      for (std::size_t a = 0; a < attached.size(); ++a)
        bread.block(attached[a].first, off + c, r, 1) =
            -(risks_up[a] - risks_down[a]) / (2.0 * h);
    }
  }

  // Exact blocks: the risk and contrast estimating functions are linear in
  // gamma and delta.
  bread.block(g1_off, g1_off, r, r).setIdentity();
  bread.block(g0_off, g0_off, r, r).setIdentity();
  bread.block(d_off, g1_off, r, r) = -Eigen::MatrixXd::Identity(r, r);
  bread.block(d_off, g0_off, r, r).setIdentity();
  bread.block(d_off, d_off, r, r).setIdentity();

  stack.block(g1_off, 0, r, n) = risk_ef(core.risk1.per_unit, core.risk1.gamma);
  stack.block(g0_off, 0, r, n) = risk_ef(core.risk0.per_unit, core.risk0.gamma);
  // Contrast rows (gamma1 - gamma0) - delta are identically zero at the root.

  const SandwichResult sand = sandwich(bread, meat_matrix(stack), n);
  out.covariance = sand.covariance;
  for (auto& block : core.blocks) out.fits.push_back(std::move(block.fit));

  const Eigen::VectorXd delta = core.risk1.gamma - core.risk0.gamma;
  RiskCurve& curve = out.curve;
  curve.times = spec.target_times;
  curve.risk1 = core.risk1.gamma;
  curve.risk0 = core.risk0.gamma;
  curve.rd = delta;
  curve.se1 = sand.se.segment(g1_off, r);
  curve.se0 = sand.se.segment(g0_off, r);
  curve.se_rd = sand.se.segment(d_off, r);
  curve.lcl1.resize(r); curve.ucl1.resize(r);
  curve.lcl0.resize(r); curve.ucl0.resize(r);
  curve.lcl_rd.resize(r); curve.ucl_rd.resize(r);
  for (Eigen::Index k = 0; k < r; ++k) {
    std::tie(curve.lcl1[k], curve.ucl1[k]) = wald_ci(curve.risk1[k], curve.se1[k], spec.ci_level);
    std::tie(curve.lcl0[k], curve.ucl0[k]) = wald_ci(curve.risk0[k], curve.se0[k], spec.ci_level);
    std::tie(curve.lcl_rd[k], curve.ucl_rd[k]) =
        wald_ci(curve.rd[k], curve.se_rd[k], spec.ci_level);
  }
  return out;
}

Eigen::VectorXd causal_point_estimates(const SurvivalDataset& data,
                                       const Eigen::VectorXi& treatment,
                                       const GComputationSpec& spec) {
  ContrastCore core = compute_core(data, treatment, spec);
  const Eigen::Index r = static_cast<Eigen::Index>(spec.target_times.size());
  Eigen::VectorXd out(3 * r);
  out.head(r) = core.risk1.gamma;
  out.segment(r, r) = core.risk0.gamma;
  out.tail(r) = core.risk1.gamma - core.risk0.gamma;
  return out;
}

}  // namespace survee
