#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

namespace survee {

/// Discrete follow-up grid: intervals k = 1..num_intervals, where interval k
/// covers continuous time ((k-1)*resolution, k*resolution].
struct TimeGrid {
  int num_intervals = 0;
  double resolution = 1.0;

  /// Maps a continuous event/censoring time onto the grid: ceil(t/resolution).
  int discretize(double t) const;
};

/// One-row-per-person survival data after discretization.
///
/// `observed_time` holds T* = min(T, C) on the interval scale (values in
/// 1..grid.num_intervals) and `event` holds the indicator I(T <= C).
/// `unit_weights` are optional per-person weights applied multiplicatively to
/// every person-period contribution of that person.
struct SurvivalDataset {
  std::vector<std::string> ids;
  Eigen::MatrixXd covariates;   // n x p, may have p == 0
  Eigen::VectorXi observed_time;
  Eigen::VectorXi event;
  std::optional<Eigen::VectorXd> unit_weights;
  TimeGrid grid;

  Eigen::Index size() const { return observed_time.size(); }
  Eigen::Index num_covariates() const { return covariates.cols(); }

  /// Throws DimensionError on mismatched lengths and ValidationError on value
  /// violations: times in 1..num_intervals, events in {0,1}, finite
  /// covariates, nonnegative finite weights.
  void validate() const;

  /// Sorted distinct values of observed_time restricted to event == 1.
  std::vector<int> unique_event_times() const;
};

/// Row-indicator matrices for a set of interval indices (one row per entry of
/// `row_times`, one column per person):
///   risk_set(k, i)   = I(T*_i >= row_times[k])
///   final_time(k, i) = I(T*_i == row_times[k])
///   events(k, i)     = event_i * final_time(k, i)
struct IndicatorMatrices {
  Eigen::MatrixXd risk_set;
  Eigen::MatrixXd final_time;
  Eigen::MatrixXd events;
};

IndicatorMatrices indicator_matrices(const SurvivalDataset& data,
                                     const std::vector<int>& row_times);

/// Dataset made of the given rows, in order; rows may repeat (bootstrap
/// resamples) or select a subgroup (per-arm fits). The grid is kept.
SurvivalDataset select_rows(const SurvivalDataset& data,
                            const std::vector<Eigen::Index>& rows);

}  // namespace survee
