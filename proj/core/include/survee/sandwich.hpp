#pragma once

#include <Eigen/Core>
#include <utility>

#include "survee/root_finding.hpp"

namespace survee {

struct SandwichResult {
  Eigen::MatrixXd bread;       // B = mean of -grad psi
  Eigen::MatrixXd meat;        // F = mean of psi psi^T
  Eigen::MatrixXd covariance;  // B^-1 F B^-T / n
  Eigen::VectorXd se;
  double bread_condition = 0.0;
};

/// B(theta) as the negated numerical Jacobian of the mean estimating function.
Eigen::MatrixXd bread_matrix(const VectorFn& ef_mean, const Eigen::VectorXd& theta_hat,
                             double step = 0.0);

/// F(theta) = stack * stack^T / n where stack has one column per unit.
Eigen::MatrixXd meat_matrix(const Eigen::MatrixXd& ef_stack);

/// Assembles B^-1 F B^-T / n. Throws SingularMatrixError, listing near-null
/// directions, when B is numerically singular; sets bread_condition so
/// callers can warn above 1e12.
SandwichResult sandwich(const Eigen::MatrixXd& bread, const Eigen::MatrixXd& meat,
                        Eigen::Index n);

/// estimate +/- z_(1+level)/2 * se.
std::pair<double, double> wald_ci(double estimate, double se, double level);

}  // namespace survee
