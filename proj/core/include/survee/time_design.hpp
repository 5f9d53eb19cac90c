#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "survee/survival_data.hpp"

namespace survee {

enum class TimeForm {
  intercept_only,
  linear,
  log_linear,
  spline,    // intercept + linear + restricted quadratic terms
  disjoint,  // indicator per unique event time, intercept as first column
};

struct TimeDesignSpec {
  TimeForm form = TimeForm::intercept_only;
  std::vector<double> knots;  // spline form only

  static TimeDesignSpec intercept_only() { return {TimeForm::intercept_only, {}}; }
  static TimeDesignSpec linear() { return {TimeForm::linear, {}}; }
  static TimeDesignSpec log_linear() { return {TimeForm::log_linear, {}}; }
  static TimeDesignSpec spline(std::vector<double> knots) {
    return {TimeForm::spline, std::move(knots)};
  }
  static TimeDesignSpec disjoint() { return {TimeForm::disjoint, {}}; }
};

/// Realized time design matrix. Smooth forms have one row per grid interval
/// 1..K; the disjoint form has one row per unique event time, and the matrix
/// is the identity with its first column replaced by ones.
struct TimeDesignMatrix {
  Eigen::MatrixXd matrix;
  std::vector<std::string> column_names;
  std::vector<int> row_times;
  bool rows_are_unique_event_times = false;

  Eigen::Index num_rows() const { return matrix.rows(); }
  Eigen::Index num_columns() const { return matrix.cols(); }
};

/// Restricted quadratic spline terms: (t - k_j)+^2 - (t - k_m)+^2 for
/// j = 1..m-1, linear beyond the last knot. The linear term is not included
/// here; build_design adds it.
Eigen::VectorXd restricted_quadratic_spline(double t, const std::vector<double>& knots);

/// Cubic variant, same truncated-power pattern with cubed terms.
Eigen::VectorXd restricted_cubic_spline(double t, const std::vector<double>& knots);

/// Builds the design over grid intervals 1..grid.num_intervals (smooth forms)
/// or over `unique_event_times` (disjoint form).
TimeDesignMatrix build_design(const TimeDesignSpec& spec, const TimeGrid& grid,
                              const std::vector<int>& unique_event_times = {});

const char* form_name(TimeForm form);

/// Parses "intercept", "linear", "loglinear", "spline:10,20,30,40",
/// "disjoint".
TimeDesignSpec parse_time_model(const std::string& text);

}  // namespace survee
