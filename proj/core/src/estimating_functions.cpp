#include "survee/estimating_functions.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "survee/errors.hpp"

namespace survee {
namespace {

// Fixed-order row-by-row product so that vectorized and loop score paths share
// every intermediate bit.
Eigen::VectorXd ordered_matvec(const Eigen::MatrixXd& m, const Eigen::VectorXd& v) {
  Eigen::VectorXd out(m.rows());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    double acc = 0.0;
    for (Eigen::Index c = 0; c < m.cols(); ++c) acc += m(r, c) * v[c];
    out[r] = acc;
  }
  return out;
}

constexpr double kHazardClamp = 1e-12;

}  // namespace

double expit(double x) {
  if (x >= 0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Eigen::Index ParameterLayout::total() const {
  Eigen::Index t = 0;
  for (const auto& s : slices) t += s.size;
  return t;
}

const ParameterLayout::Slice& ParameterLayout::find(const std::string& name) const {
  for (const auto& s : slices)
    if (s.name == name) return s;
  throw Error("no parameter slice named '" + name + "'");
}

void ParameterLayout::append(std::string name, Eigen::Index size) {
  Eigen::Index offset = total();
  slices.push_back({std::move(name), offset, size});
}

Eigen::MatrixXd hazard_matrix(const Eigen::VectorXd& x_linpred,
                              const TimeDesignMatrix& design,
                              const Eigen::VectorXd& beta_s) {
  if (beta_s.size() != design.num_columns())
    throw DimensionError("beta_S length " + std::to_string(beta_s.size()) +
                         " does not match " + std::to_string(design.num_columns()) +
                         " time design columns");
  const Eigen::Index K = design.num_rows();
  const Eigen::Index n = x_linpred.size();
  const Eigen::VectorXd time_linpred = ordered_matvec(design.matrix, beta_s);
  Eigen::MatrixXd hazards(K, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < K; ++k)
      hazards(k, i) = expit(x_linpred[i] + time_linpred[k]);
  return hazards;
}

Eigen::MatrixXd residual_matrix(const Eigen::MatrixXd& events,
                                const Eigen::MatrixXd& hazards,
                                const Eigen::MatrixXd& risk_set) {
  if (events.rows() != hazards.rows() || events.cols() != hazards.cols() ||
      risk_set.rows() != hazards.rows() || risk_set.cols() != hazards.cols())
    throw DimensionError("residual_matrix inputs do not conform");
  Eigen::MatrixXd p(events.rows(), events.cols());
  for (Eigen::Index i = 0; i < events.cols(); ++i)
    for (Eigen::Index k = 0; k < events.rows(); ++k)
      p(k, i) = (events(k, i) - hazards(k, i)) * risk_set(k, i);
  return p;
}

EFStack score_stack(const SurvivalDataset& data, const TimeDesignMatrix& design,
                    const Eigen::VectorXd& beta,
                    const Eigen::MatrixXd* period_weights, ScoreMode mode) {
  const Eigen::Index n = data.size();
  const Eigen::Index p = data.covariates.cols();
  const Eigen::Index q = design.num_columns();
  const Eigen::Index K = design.num_rows();
  if (beta.size() != p + q)
    throw DimensionError("beta length " + std::to_string(beta.size()) +
                         " does not match p + q = " + std::to_string(p + q));
  if (!beta.allFinite()) throw ValidationError("beta has non-finite entries");
  if (period_weights &&
      (period_weights->rows() != K || period_weights->cols() != n))
    throw DimensionError("period weights must be rows-by-units");

  const Eigen::VectorXd beta_x = beta.head(p);
  const Eigen::VectorXd beta_s = beta.tail(q);
  const bool disjoint = design.rows_are_unique_event_times;
  const bool weighted = period_weights || data.unit_weights.has_value();
  const Eigen::VectorXd* uw = data.unit_weights ? &*data.unit_weights : nullptr;

  EFStack out;
  out.layout.append("beta_x", p);
  out.layout.append("beta_s", q);
  out.matrix.setZero(p + q, n);

  const Eigen::VectorXd x_linpred = ordered_matvec(data.covariates, beta_x);
  const Eigen::VectorXd time_linpred = ordered_matvec(design.matrix, beta_s);

  if (mode == ScoreMode::vectorized) {
    IndicatorMatrices ind = indicator_matrices(data, design.row_times);
    Eigen::MatrixXd hazards(K, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index k = 0; k < K; ++k)
        hazards(k, i) = expit(x_linpred[i] + time_linpred[k]);
    Eigen::MatrixXd resid = residual_matrix(ind.events, hazards, ind.risk_set);
    if (weighted) {
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < K; ++k) {
          double w = uw ? (*uw)[i] : 1.0;
          if (period_weights) w *= (*period_weights)(k, i);
          resid(k, i) *= w;
        }
      }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      double colsum = 0.0;
      for (Eigen::Index k = 0; k < K; ++k) colsum += resid(k, i);
      for (Eigen::Index j = 0; j < p; ++j) out.matrix(j, i) = colsum * data.covariates(i, j);
      if (disjoint) {
        for (Eigen::Index k = 0; k < K; ++k) out.matrix(p + k, i) = resid(k, i);
      } else {
        for (Eigen::Index j = 0; j < q; ++j) {
          double acc = 0.0;
          for (Eigen::Index k = 0; k < K; ++k) acc += design.matrix(k, j) * resid(k, i);
          out.matrix(p + j, i) = acc;
        }
      }
    }
    return out;
  }

  Eigen::VectorXd time_acc(q);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int t_star = data.observed_time[i];
    const bool had_event = data.event[i] == 1;
    double colsum = 0.0;
    time_acc.setZero();
    for (Eigen::Index k = 0; k < K; ++k) {
      const int row_time = design.row_times[static_cast<std::size_t>(k)];
      if (row_time > t_star) break;
      const double hazard = expit(x_linpred[i] + time_linpred[k]);
      const double y = (had_event && row_time == t_star) ? 1.0 : 0.0;
      double resid = (y - hazard) * 1.0;
      if (weighted) {
        double w = uw ? (*uw)[i] : 1.0;
        if (period_weights) w *= (*period_weights)(k, i);
        resid *= w;
      }
      colsum += resid;
      if (disjoint) {
        out.matrix(p + k, i) = resid;
      } else {
        for (Eigen::Index j = 0; j < q; ++j) time_acc[j] += design.matrix(k, j) * resid;
      }
    }
    for (Eigen::Index j = 0; j < p; ++j) out.matrix(j, i) = colsum * data.covariates(i, j);
    if (!disjoint)
      for (Eigen::Index j = 0; j < q; ++j) out.matrix(p + j, i) = time_acc[j];
  }
  return out;
}

Eigen::MatrixXd survival_from_hazards(const Eigen::MatrixXd& hazards) {
  Eigen::MatrixXd survival(hazards.rows(), hazards.cols());
  for (Eigen::Index i = 0; i < hazards.cols(); ++i) {
    double running = 1.0;
    for (Eigen::Index k = 0; k < hazards.rows(); ++k) {
      const double h = std::clamp(hazards(k, i), kHazardClamp, 1.0 - kHazardClamp);
      running *= 1.0 - h;
      survival(k, i) = running;
    }
  }
  return survival;
}

Eigen::MatrixXd risks_at_times(const Eigen::MatrixXd& hazards,
                               const std::vector<int>& row_times,
                               const std::vector<int>& target_times) {
  if (hazards.rows() != static_cast<Eigen::Index>(row_times.size()))
    throw DimensionError("hazard rows do not match row times");
  const Eigen::MatrixXd survival = survival_from_hazards(hazards);
  Eigen::MatrixXd risks(static_cast<Eigen::Index>(target_times.size()), hazards.cols());
  for (std::size_t r = 0; r < target_times.size(); ++r) {
    // survival carries forward between design rows, so the risk at t is read
    // from the last row at or before t
    Eigen::Index last = -1;
    for (std::size_t k = 0; k < row_times.size(); ++k)
      if (row_times[k] <= target_times[r]) last = static_cast<Eigen::Index>(k);
    if (last < 0) {
      risks.row(static_cast<Eigen::Index>(r)).setZero();
    } else {
      risks.row(static_cast<Eigen::Index>(r)) =
          (1.0 - survival.row(last).array()).matrix();
    }
  }
  return risks;
}

Eigen::MatrixXd risk_ef(const Eigen::MatrixXd& per_unit_risks,
                        const Eigen::VectorXd& gamma) {
  if (gamma.size() != per_unit_risks.rows())
    throw DimensionError("gamma length does not match risk rows");
  return per_unit_risks.colwise() - gamma;
}

std::uint64_t estimate_elements(std::uint64_t n, std::uint64_t K,
                                std::uint64_t K_star, std::uint64_t p,
                                std::uint64_t q, StorageModel model) {
  switch (model) {
    case StorageModel::standard:
      return (p + q + 1) * K * n;
    case StorageModel::vectorized:
      return n + 5 * K * n + K * q;
    case StorageModel::vectorized_disjoint:
      return n + 5 * K_star * n + K_star * q;
    case StorageModel::loop:
      return n * (p + q + 3);
  }
  return 0;
}

ScoreMode choose_mode(std::uint64_t n, std::uint64_t K_or_Kstar, std::uint64_t p,
                      std::uint64_t q, bool disjoint,
                      std::uint64_t memory_budget_bytes) {
  const StorageModel model =
      disjoint ? StorageModel::vectorized_disjoint : StorageModel::vectorized;
  const std::uint64_t elements =
      estimate_elements(n, K_or_Kstar, K_or_Kstar, p, q, model);
  return elements <= memory_budget_bytes / sizeof(double) ? ScoreMode::vectorized
                                                          : ScoreMode::loop;
}

}  // namespace survee
