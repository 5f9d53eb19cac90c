#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "survee/estimating_functions.hpp"
#include "survee/root_finding.hpp"
#include "survee/sandwich.hpp"
#include "survee/survival_data.hpp"
#include "survee/time_design.hpp"

namespace survee {

/// One model term built from a raw covariate column.
struct CovariateTerm {
  enum class Kind { linear, quadratic_spline, cubic_spline };
  int column = 0;
  Kind kind = Kind::linear;
  std::vector<double> knots;  // spline kinds only
};

/// Expansion recipe for the covariate design g(W). No intercept column: the
/// time design always carries the intercept.
struct CovariateFormula {
  std::vector<CovariateTerm> terms;

  static CovariateFormula all_linear(int num_columns);
};

struct ExpandedCovariates {
  Eigen::MatrixXd matrix;
  std::vector<std::string> column_names;
};

ExpandedCovariates expand_covariates(const Eigen::MatrixXd& raw,
                                     const CovariateFormula& formula,
                                     const std::vector<std::string>& raw_names = {});

enum class ModeChoice { automatic, vectorized, loop };

struct FitOptions {
  SolverOptions solver;
  ModeChoice mode = ModeChoice::automatic;
  std::uint64_t memory_budget_bytes = std::uint64_t{2} << 30;
  double pin_floor = -500.0;  // value given to zero-event disjoint coordinates
};

struct FitResult {
  Eigen::VectorXd beta;  // [beta_X; beta_S], pinned coordinates at pin_floor
  ParameterLayout layout;
  TimeDesignMatrix design;
  TimeGrid grid;
  std::vector<std::string> coefficient_names;
  std::vector<Eigen::Index> pinned;  // indices into beta
  SolveDiagnostics diagnostics;
  ScoreMode mode_used = ScoreMode::vectorized;

  Eigen::VectorXd beta_x() const;
  Eigen::VectorXd beta_s() const;
};

/// Fits the pooled logistic model by solving the stacked score equations.
/// `data.covariates` is the realized model design g(A, W) (no intercept).
/// Disjoint rows without events are pinned at pin_floor and excluded from
/// the solve.
FitResult fit_pooled_logistic(const SurvivalDataset& data, const TimeDesignSpec& time_spec,
                              const FitOptions& opts = {});

/// Marginal risks at the target times with per-unit contributions.
struct MarginalRisks {
  std::vector<int> target_times;
  Eigen::VectorXd gamma;      // g-computation risks, one per target time
  Eigen::MatrixXd per_unit;   // |target_times| x n matrix of unit risks
};

/// Predicts hazards for every row of `prediction_covariates` (the population
/// to standardize over, with treatment forced or left as observed) and
/// averages per-unit risks. gamma_k is the mean of row k of per_unit.
MarginalRisks estimate_risks(const FitResult& fit,
                             const Eigen::MatrixXd& prediction_covariates,
                             const std::vector<int>& target_times);

enum class ArmStrategy { separate_models, single_model };

struct GComputationSpec {
  ArmStrategy arm_strategy = ArmStrategy::separate_models;
  TimeDesignSpec time;
  CovariateFormula covariates;
  std::vector<int> target_times;
  double ci_level = 0.95;
  FitOptions fit;
};

/// Per-time risks, risk differences, and Wald intervals.
struct RiskCurve {
  std::vector<int> times;
  Eigen::VectorXd risk1, se1, lcl1, ucl1;
  Eigen::VectorXd risk0, se0, lcl0, ucl0;
  Eigen::VectorXd rd, se_rd, lcl_rd, ucl_rd;
};

struct ContrastResult {
  RiskCurve curve;
  std::vector<FitResult> fits;  // one per arm, or one for single_model
  Eigen::MatrixXd covariance;   // joint sandwich over all free parameters
  ParameterLayout layout;       // slices: beta1, beta0 (or beta), gamma1, gamma0, delta
};

/// Full estimator: fits the hazard model(s), solves the risk and contrast
/// estimating functions, and computes one joint sandwich so that hazard-model
/// uncertainty propagates into every gamma and delta.
ContrastResult causal_contrast(const SurvivalDataset& data,
                               const Eigen::VectorXi& treatment,
                               const GComputationSpec& spec);

/// Point estimates only: [risk1; risk0; rd], each of length
/// |target_times|. The bootstrap resamples this.
Eigen::VectorXd causal_point_estimates(const SurvivalDataset& data,
                                       const Eigen::VectorXi& treatment,
                                       const GComputationSpec& spec);

}  // namespace survee
