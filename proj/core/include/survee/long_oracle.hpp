#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "survee/survival_data.hpp"
#include "survee/time_design.hpp"

namespace survee {

/// Person-period expansion: one row per unit per design row time at which the
/// unit is still at risk.
struct LongTable {
  std::vector<Eigen::Index> unit;  // row index into the source dataset
  std::vector<int> interval;       // grid time of the row
  Eigen::VectorXd y;
  Eigen::MatrixXd design;          // [covariate columns, time columns]
  Eigen::VectorXd weights;
  std::vector<std::string> column_names;

  Eigen::Index rows() const { return y.size(); }
};

LongTable expand_long(const SurvivalDataset& data, const TimeDesignMatrix& design,
                      const Eigen::MatrixXd* period_weights = nullptr);

/// Weighted logistic MLE by iteratively reweighted least squares; converges
/// on score max-norm. Throws ConvergenceError on separation or iteration
/// exhaustion.
Eigen::VectorXd fit_long_logistic(const LongTable& table, double tolerance = 1e-9,
                                  int max_iterations = 200);

struct BootstrapOptions {
  int replicates = 1000;
  std::uint64_t seed = 0;
  int jobs = 1;
  double ci_level = 0.95;
  double max_failure_fraction = 0.10;
};

struct BootstrapResult {
  Eigen::MatrixXd estimates;      // one row per successful replicate
  Eigen::VectorXd se;
  Eigen::MatrixXd percentile_ci;  // r x 2
  int failures = 0;
};

/// Person-block bootstrap over unit indices. `estimator` maps a with-
/// replacement index sample to a parameter vector; replicate r draws from an
/// RNG substream of (seed, r), so results are identical for any job count.
/// Throws when more than max_failure_fraction of replicates fail.
BootstrapResult bootstrap(Eigen::Index num_units,
                          const std::function<Eigen::VectorXd(const std::vector<Eigen::Index>&)>& estimator,
                          const BootstrapOptions& opts);

/// Materializes a resample: rows of `data` (and entries of `treatment`) at
/// `indices`, in order.
SurvivalDataset resample_dataset(const SurvivalDataset& data,
                                 const std::vector<Eigen::Index>& indices);
Eigen::VectorXi resample_vector(const Eigen::VectorXi& values,
                                const std::vector<Eigen::Index>& indices);

}  // namespace survee
