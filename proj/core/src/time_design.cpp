#include "survee/time_design.hpp"

#include <cmath>
#include <string>

#include "survee/errors.hpp"

namespace survee {
namespace {

Eigen::VectorXd truncated_power_terms(double t, const std::vector<double>& knots,
                                      int power) {
  if (knots.size() < 3)
    throw ValidationError("restricted spline needs at least 3 knots, got " +
                          std::to_string(knots.size()));
  for (std::size_t j = 1; j < knots.size(); ++j)
    if (!(knots[j] > knots[j - 1]))
      throw ValidationError("spline knots must be strictly ascending");

  const std::size_t m = knots.size();
  auto plus_pow = [power](double x) {
    if (x <= 0) return 0.0;
    return power == 2 ? x * x : x * x * x;
  };
  Eigen::VectorXd terms(static_cast<Eigen::Index>(m - 1));
  const double last = plus_pow(t - knots[m - 1]);
  for (std::size_t j = 0; j + 1 < m; ++j)
    terms[static_cast<Eigen::Index>(j)] = plus_pow(t - knots[j]) - last;
  return terms;
}

}  // namespace

Eigen::VectorXd restricted_quadratic_spline(double t, const std::vector<double>& knots) {
  return truncated_power_terms(t, knots, 2);
}

Eigen::VectorXd restricted_cubic_spline(double t, const std::vector<double>& knots) {
  return truncated_power_terms(t, knots, 3);
}

TimeDesignMatrix build_design(const TimeDesignSpec& spec, const TimeGrid& grid,
                              const std::vector<int>& unique_event_times) {
  TimeDesignMatrix out;
  const int K = grid.num_intervals;
  if (K < 1) throw ValidationError("grid has no intervals");

  if (spec.form == TimeForm::disjoint) {
    if (unique_event_times.empty())
      throw ValidationError("disjoint time design requires unique event times");
    const Eigen::Index m = static_cast<Eigen::Index>(unique_event_times.size());
    out.matrix = Eigen::MatrixXd::Identity(m, m);
    out.matrix.col(0).setOnes();
    out.row_times = unique_event_times;
    out.rows_are_unique_event_times = true;
    out.column_names.push_back("t_" + std::to_string(unique_event_times[0]));
    for (Eigen::Index j = 1; j < m; ++j)
      out.column_names.push_back(
          "t_" + std::to_string(unique_event_times[static_cast<std::size_t>(j)]));
    out.column_names[0] = "intercept";
    return out;
  }

  out.row_times.resize(static_cast<std::size_t>(K));
  for (int k = 1; k <= K; ++k) out.row_times[static_cast<std::size_t>(k - 1)] = k;

  switch (spec.form) {
    case TimeForm::intercept_only:
      out.matrix = Eigen::MatrixXd::Ones(K, 1);
      out.column_names = {"intercept"};
      break;
    case TimeForm::linear:
      out.matrix.resize(K, 2);
      for (int k = 1; k <= K; ++k) {
        out.matrix(k - 1, 0) = 1.0;
        out.matrix(k - 1, 1) = k;
      }
      out.column_names = {"intercept", "t"};
      break;
    case TimeForm::log_linear:
      out.matrix.resize(K, 2);
      for (int k = 1; k <= K; ++k) {
        out.matrix(k - 1, 0) = 1.0;
        out.matrix(k - 1, 1) = std::log(static_cast<double>(k));
      }
      out.column_names = {"intercept", "log_t"};
      break;
    case TimeForm::spline: {
      for (double knot : spec.knots)
        if (!(knot > 0) || !(knot < static_cast<double>(K) * grid.resolution))
          throw ValidationError("spline knot " + std::to_string(knot) +
                                " outside the follow-up window");
      const Eigen::Index s = static_cast<Eigen::Index>(spec.knots.size()) - 1;
      out.matrix.resize(K, 2 + s);
      for (int k = 1; k <= K; ++k) {
        out.matrix(k - 1, 0) = 1.0;
        out.matrix(k - 1, 1) = k;
        out.matrix.row(k - 1).tail(s) =
            restricted_quadratic_spline(static_cast<double>(k), spec.knots).transpose();
      }
      out.column_names = {"intercept", "t"};
      for (Eigen::Index j = 0; j < s; ++j)
        out.column_names.push_back("t_spline" + std::to_string(j + 1));
      break;
    }
    case TimeForm::disjoint:
      break;  // handled above
  }
  if (!out.matrix.allFinite())
    throw ValidationError("time design matrix has non-finite entries");
  return out;
}

const char* form_name(TimeForm form) {
  switch (form) {
    case TimeForm::intercept_only: return "intercept";
    case TimeForm::linear: return "linear";
    case TimeForm::log_linear: return "loglinear";
    case TimeForm::spline: return "spline";
    case TimeForm::disjoint: return "disjoint";
  }
  return "unknown";
}

TimeDesignSpec parse_time_model(const std::string& text) {
  if (text == "intercept" || text == "intercept_only") return TimeDesignSpec::intercept_only();
  if (text == "linear") return TimeDesignSpec::linear();
  if (text == "loglinear" || text == "log_linear") return TimeDesignSpec::log_linear();
  if (text == "disjoint") return TimeDesignSpec::disjoint();
  const std::string prefix = "spline";
  if (text.rfind(prefix, 0) == 0) {
    std::vector<double> knots;
    std::string rest = text.size() > prefix.size() && text[prefix.size()] == ':'
                           ? text.substr(prefix.size() + 1)
                           : "";
    std::size_t pos = 0;
    while (pos < rest.size()) {
      std::size_t next = rest.find(',', pos);
      if (next == std::string::npos) next = rest.size();
      try {
        knots.push_back(std::stod(rest.substr(pos, next - pos)));
      } catch (const std::exception&) {
        throw ValidationError("cannot parse spline knot in '" + text + "'");
      }
      pos = next + 1;
    }
    if (knots.empty())
      throw ValidationError("spline time model needs knots, e.g. spline:10,20,30,40");
    return TimeDesignSpec::spline(std::move(knots));
  }
  throw ValidationError("unknown time model '" + text +
                        "' (expected intercept|linear|loglinear|spline:...|disjoint)");
}

}  // namespace survee
