#include "survee/survival_data.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "survee/errors.hpp"

namespace survee {

int TimeGrid::discretize(double t) const {
  if (!(resolution > 0)) throw ValidationError("time resolution must be positive");
  if (!(t > 0)) throw ValidationError("time must be positive, got " + std::to_string(t));
  return static_cast<int>(std::ceil(t / resolution));
}

void SurvivalDataset::validate() const {
  const Eigen::Index n = observed_time.size();
  if (n < 1) throw ValidationError("dataset has no records");
  if (event.size() != n)
    throw DimensionError("event length " + std::to_string(event.size()) +
                         " does not match " + std::to_string(n) + " records");
  if (covariates.rows() != 0 && covariates.rows() != n)
    throw DimensionError("covariate rows " + std::to_string(covariates.rows()) +
                         " do not match " + std::to_string(n) + " records");
  if (!ids.empty() && static_cast<Eigen::Index>(ids.size()) != n)
    throw DimensionError("id count does not match record count");
  if (grid.num_intervals < 1) throw ValidationError("grid has no intervals");

  for (Eigen::Index i = 0; i < n; ++i) {
    if (observed_time[i] < 1 || observed_time[i] > grid.num_intervals)
      throw ValidationError("record " + std::to_string(i + 1) + ": time " +
                            std::to_string(observed_time[i]) + " outside 1.." +
                            std::to_string(grid.num_intervals));
    if (event[i] != 0 && event[i] != 1)
      throw ValidationError("record " + std::to_string(i + 1) + ": event " +
                            std::to_string(event[i]) + " is not 0/1");
  }
  if (!covariates.allFinite())
    throw ValidationError("covariate matrix contains non-finite values");
  if (unit_weights) {
    if (unit_weights->size() != n)
      throw DimensionError("weight length does not match record count");
    for (Eigen::Index i = 0; i < n; ++i) {
      double w = (*unit_weights)[i];
      if (!std::isfinite(w) || w < 0)
        throw ValidationError("record " + std::to_string(i + 1) +
                              ": weight must be finite and nonnegative");
    }
  }
}

std::vector<int> SurvivalDataset::unique_event_times() const {
  std::set<int> times;
  for (Eigen::Index i = 0; i < observed_time.size(); ++i)
    if (event[i] == 1) times.insert(observed_time[i]);
  return {times.begin(), times.end()};
}

IndicatorMatrices indicator_matrices(const SurvivalDataset& data,
                                     const std::vector<int>& row_times) {
  const Eigen::Index K = static_cast<Eigen::Index>(row_times.size());
  const Eigen::Index n = data.size();
  IndicatorMatrices out;
  out.risk_set.setZero(K, n);
  out.final_time.setZero(K, n);
  out.events.setZero(K, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int t = data.observed_time[i];
    for (Eigen::Index k = 0; k < K; ++k) {
      if (t >= row_times[static_cast<std::size_t>(k)]) out.risk_set(k, i) = 1.0;
      if (t == row_times[static_cast<std::size_t>(k)]) {
        out.final_time(k, i) = 1.0;
        if (data.event[i] == 1) out.events(k, i) = 1.0;
      }
    }
  }
  return out;
}

SurvivalDataset select_rows(const SurvivalDataset& data,
                            const std::vector<Eigen::Index>& rows) {
  const Eigen::Index m = static_cast<Eigen::Index>(rows.size());
  SurvivalDataset out;
  out.grid = data.grid;
  out.covariates.resize(m, data.covariates.cols());
  out.observed_time.resize(m);
  out.event.resize(m);
  if (!data.ids.empty()) out.ids.reserve(static_cast<std::size_t>(m));
  if (data.unit_weights) out.unit_weights = Eigen::VectorXd(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    const Eigen::Index i = rows[static_cast<std::size_t>(r)];
    if (i < 0 || i >= data.size())
      throw DimensionError("row index " + std::to_string(i) + " out of range");
    out.covariates.row(r) = data.covariates.row(i);
    out.observed_time[r] = data.observed_time[i];
    out.event[r] = data.event[i];
    if (!data.ids.empty()) out.ids.push_back(data.ids[static_cast<std::size_t>(i)]);
    if (data.unit_weights) (*out.unit_weights)[r] = (*data.unit_weights)[i];
  }
  return out;
}

}  // namespace survee
