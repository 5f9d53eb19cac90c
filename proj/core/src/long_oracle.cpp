#include "survee/long_oracle.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "survee/errors.hpp"
#include "survee/estimating_functions.hpp"
#include "survee/parallel.hpp"
#include "survee/rng.hpp"

namespace survee {

LongTable expand_long(const SurvivalDataset& data, const TimeDesignMatrix& design,
                      const Eigen::MatrixXd* period_weights) {
  const Eigen::Index n = data.size();
  const Eigen::Index p = data.covariates.cols();
  const Eigen::Index q = design.num_columns();
  const Eigen::Index K = design.num_rows();
  if (period_weights &&
      (period_weights->rows() != K || period_weights->cols() != n))
    throw DimensionError("period weights must be rows-by-units");

  Eigen::Index rows = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < K; ++k)
      if (design.row_times[static_cast<std::size_t>(k)] <= data.observed_time[i]) ++rows;

  LongTable table;
  table.unit.reserve(static_cast<std::size_t>(rows));
  table.interval.reserve(static_cast<std::size_t>(rows));
  table.y.resize(rows);
  table.design.resize(rows, p + q);
  table.weights.resize(rows);
  for (Eigen::Index j = 0; j < p; ++j)
    table.column_names.push_back("x" + std::to_string(j));
  table.column_names.insert(table.column_names.end(), design.column_names.begin(),
                            design.column_names.end());

  Eigen::Index at = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < K; ++k) {
      const int row_time = design.row_times[static_cast<std::size_t>(k)];
      if (row_time > data.observed_time[i]) break;
      table.unit.push_back(i);
      table.interval.push_back(row_time);
      table.y[at] = (data.event[i] == 1 && row_time == data.observed_time[i]) ? 1.0 : 0.0;
      table.design.row(at).head(p) = data.covariates.row(i);
      table.design.row(at).tail(q) = design.matrix.row(k);
      double w = data.unit_weights ? (*data.unit_weights)[i] : 1.0;
      if (period_weights) w *= (*period_weights)(k, i);
      table.weights[at] = w;
      ++at;
    }
  }
  return table;
}

Eigen::VectorXd fit_long_logistic(const LongTable& table, double tolerance,
                                  int max_iterations) {
  const Eigen::Index rows = table.rows();
  const Eigen::Index d = table.design.cols();
  if (rows < 1) throw ValidationError("long table has no rows");
  if (table.y.maxCoeff() < 1.0) throw ValidationError("no events observed");

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(d);
  for (int iter = 1; iter <= max_iterations; ++iter) {
    const Eigen::VectorXd eta = table.design * beta;
    if (eta.cwiseAbs().maxCoeff() > 700.0)
      throw ConvergenceError("separation suspected: linear predictor diverged", iter,
                             std::numeric_limits<double>::infinity());
    Eigen::VectorXd mu(rows), irls_w(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
      mu[r] = expit(eta[r]);
      irls_w[r] = table.weights[r] * mu[r] * (1.0 - mu[r]);
    }
    const Eigen::VectorXd score =
        table.design.transpose() * (table.weights.cwiseProduct(table.y - mu));
    const double norm = score.cwiseAbs().maxCoeff() / static_cast<double>(rows);
    if (norm <= tolerance) {
      // A tiny score with fitted probabilities pinned to 0/1 is the signature
      // of (quasi-)separation: the MLE sits at infinity and beta is garbage.
      // Legitimate discrete-hazard fits stay well inside |eta| < 15.
      if (eta.cwiseAbs().maxCoeff() > 15.0)
        throw ConvergenceError(
            "separation suspected: fitted probabilities at the 0/1 boundary", iter,
            norm);
      return beta;
    }

    const Eigen::MatrixXd info =
        table.design.transpose() * irls_w.asDiagonal() * table.design;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(info);
    if (qr.rank() < d) {
      SingularMatrixError err("long-data design is rank deficient");
      const auto perm = qr.colsPermutation().indices();
      for (Eigen::Index c = qr.rank(); c < d; ++c)
        err.indices.push_back(static_cast<int>(perm[c]));
      throw err;
    }
    const Eigen::VectorXd step = qr.solve(score);
    if (!step.allFinite())
      throw SingularMatrixError("IRLS step is not finite");
    beta += step;
  }
  throw ConvergenceError("IRLS did not converge in " + std::to_string(max_iterations) +
                             " iterations",
                         max_iterations, 0.0);
}

BootstrapResult bootstrap(
    Eigen::Index num_units,
    const std::function<Eigen::VectorXd(const std::vector<Eigen::Index>&)>& estimator,
    const BootstrapOptions& opts) {
  if (opts.replicates < 1) throw ValidationError("bootstrap needs at least one replicate");
  if (num_units < 1) throw ValidationError("bootstrap needs at least one unit");

  const std::size_t B = static_cast<std::size_t>(opts.replicates);
  std::vector<std::optional<Eigen::VectorXd>> draws(B);

  parallel_for(B, opts.jobs, [&](std::size_t rep) {
    rng::Stream stream = rng::Stream::substream(opts.seed, rep, /*domain=*/1);
    std::vector<Eigen::Index> indices(static_cast<std::size_t>(num_units));
    for (auto& idx : indices) idx = static_cast<Eigen::Index>(stream.below(num_units));
    try {
      draws[rep] = estimator(indices);
    } catch (const Error&) {
      draws[rep] = std::nullopt;
    }
  });

  BootstrapResult out;
  Eigen::Index width = -1;
  std::vector<const Eigen::VectorXd*> kept;
  for (const auto& draw : draws) {
    if (!draw) {
      ++out.failures;
      continue;
    }
    if (width < 0) width = draw->size();
    kept.push_back(&*draw);
  }
  if (out.failures > opts.max_failure_fraction * static_cast<double>(B))
    throw Error(std::to_string(out.failures) + " of " + std::to_string(B) +
                " bootstrap replicates failed");
  if (kept.size() < 2) throw Error("too few successful bootstrap replicates");

  out.estimates.resize(static_cast<Eigen::Index>(kept.size()), width);
  for (std::size_t r = 0; r < kept.size(); ++r)
    out.estimates.row(static_cast<Eigen::Index>(r)) = kept[r]->transpose();

  const Eigen::Index m = out.estimates.rows();
  const Eigen::VectorXd mean = out.estimates.colwise().mean();
  out.se.resize(width);
  for (Eigen::Index c = 0; c < width; ++c)
    out.se[c] = std::sqrt((out.estimates.col(c).array() - mean[c]).square().sum() /
                          static_cast<double>(m - 1));

  out.percentile_ci.resize(width, 2);
  const double alpha = (1.0 - opts.ci_level) / 2.0;
  std::vector<double> column(static_cast<std::size_t>(m));
  auto quantile = [&](double prob) {
    const double h = prob * static_cast<double>(m - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, static_cast<std::size_t>(m - 1));
    const double frac = h - std::floor(h);
    return column[lo] * (1.0 - frac) + column[hi] * frac;
  };
  for (Eigen::Index c = 0; c < width; ++c) {
    for (Eigen::Index r = 0; r < m; ++r) column[static_cast<std::size_t>(r)] = out.estimates(r, c);
    std::sort(column.begin(), column.end());
    out.percentile_ci(c, 0) = quantile(alpha);
    out.percentile_ci(c, 1) = quantile(1.0 - alpha);
  }
  return out;
}

SurvivalDataset resample_dataset(const SurvivalDataset& data,
                                 const std::vector<Eigen::Index>& indices) {
  return select_rows(data, indices);
}

Eigen::VectorXi resample_vector(const Eigen::VectorXi& values,
                                const std::vector<Eigen::Index>& indices) {
  Eigen::VectorXi out(static_cast<Eigen::Index>(indices.size()));
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] < 0 || indices[r] >= values.size())
      throw DimensionError("index out of range");
    out[static_cast<Eigen::Index>(r)] = values[indices[r]];
  }
  return out;
}

}  // namespace survee
