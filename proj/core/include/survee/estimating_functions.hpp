#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "survee/survival_data.hpp"
#include "survee/time_design.hpp"

namespace survee {

/// Numerically stable logistic function; never overflows and never returns
/// an exact 0 or 1 for finite input.
double expit(double x);

enum class ScoreMode { vectorized, loop };

/// Named slices of a stacked parameter vector.
struct ParameterLayout {
  struct Slice {
    std::string name;
    Eigen::Index offset = 0;
    Eigen::Index size = 0;
  };
  std::vector<Slice> slices;

  Eigen::Index total() const;
  const Slice& find(const std::string& name) const;
  void append(std::string name, Eigen::Index size);
};

/// Stacked estimating-function values, one column per unit.
struct EFStack {
  Eigen::MatrixXd matrix;
  ParameterLayout layout;

  Eigen::VectorXd row_sums() const { return matrix.rowwise().sum(); }
  Eigen::VectorXd row_means() const {
    return matrix.rowwise().sum() / static_cast<double>(matrix.cols());
  }
};

/// Hazard matrix over the design's row times: values(k, i) =
/// expit(x_linpred_i + (S * beta_S)_k).
Eigen::MatrixXd hazard_matrix(const Eigen::VectorXd& x_linpred,
                              const TimeDesignMatrix& design,
                              const Eigen::VectorXd& beta_s);

/// P = (Y - Yhat) .* R.
Eigen::MatrixXd residual_matrix(const Eigen::MatrixXd& events,
                                const Eigen::MatrixXd& hazards,
                                const Eigen::MatrixXd& risk_set);

/// Pooled-logistic score contributions, one column per unit, for
/// beta = [beta_X; beta_S]. Row block for beta_X is ((1*P) .* X)^T; the block
/// for beta_S is S^T * P for smooth forms and P itself for the disjoint form.
/// `period_weights`, when given, must conform to the design rows and scales
/// each person-period contribution; unit weights on the dataset apply too.
/// Both modes produce bit-identical output; loop mode never materializes a
/// row-times-by-n matrix.
EFStack score_stack(const SurvivalDataset& data, const TimeDesignMatrix& design,
                    const Eigen::VectorXd& beta,
                    const Eigen::MatrixXd* period_weights = nullptr,
                    ScoreMode mode = ScoreMode::vectorized);

/// Column-wise cumulative products of (1 - hazard). Hazards are clamped into
/// [1e-12, 1 - 1e-12] before the product.
Eigen::MatrixXd survival_from_hazards(const Eigen::MatrixXd& hazards);

/// Per-unit risks 1 - prod(1 - hazard) at each target time, with
/// last-value carry-forward between design rows (step risks for the disjoint
/// form). Returns a |target_times| x n matrix.
Eigen::MatrixXd risks_at_times(const Eigen::MatrixXd& hazards,
                               const std::vector<int>& row_times,
                               const std::vector<int>& target_times);

/// Risk estimating-function rows: {1 - prod_{j<=k}(1 - Yhat_a[j,i])} - gamma_k
/// per unit. `per_unit_risks` is the risks_at_times output.
Eigen::MatrixXd risk_ef(const Eigen::MatrixXd& per_unit_risks,
                        const Eigen::VectorXd& gamma);

enum class StorageModel { standard, vectorized, vectorized_disjoint, loop };

/// Element counts of the four score implementations:
/// standard (p+q+1)Kn, vectorized n+5Kn+Kq, disjoint variant with K* in
/// place of K, loop n(p+q+3).
std::uint64_t estimate_elements(std::uint64_t n, std::uint64_t K,
                                std::uint64_t K_star, std::uint64_t p,
                                std::uint64_t q, StorageModel model);

/// Picks vectorized when its element count fits the budget, else loop.
ScoreMode choose_mode(std::uint64_t n, std::uint64_t K_or_Kstar,
                      std::uint64_t p, std::uint64_t q, bool disjoint,
                      std::uint64_t memory_budget_bytes);

}  // namespace survee
