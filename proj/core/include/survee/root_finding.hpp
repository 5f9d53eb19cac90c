#pragma once

#include <Eigen/Core>
#include <functional>

namespace survee {

using VectorFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct SolverOptions {
  int max_iterations = 5000;
  double tolerance = 1e-9;        // max-norm of the mean estimating function
  double initial_damping = 1e-3;  // Levenberg-Marquardt lambda when Newton stalls
  double jacobian_step = 0.0;     // 0: cbrt(machine epsilon), scaled by max(1,|theta|)
};

struct SolveDiagnostics {
  int iterations = 0;
  double final_norm = 0.0;
  bool converged = false;
  double jacobian_condition = 0.0;
};

struct SolveResult {
  Eigen::VectorXd theta;
  SolveDiagnostics diagnostics;
};

/// Central-difference Jacobian of f at theta; entry (r, c) =
/// (f_r(theta + h_c e_c) - f_r(theta - h_c e_c)) / (2 h_c) with
/// h_c = step * max(1, |theta_c|). Throws on non-finite evaluations,
/// naming the coordinate.
Eigen::MatrixXd numerical_jacobian(const VectorFn& f, const Eigen::VectorXd& theta,
                                   double step = 0.0);

/// Newton iteration with Levenberg-Marquardt damping on the mean estimating
/// function. Steps are accepted when they reduce the Euclidean norm of f;
/// convergence is declared once the max norm falls below tolerance. The
/// Jacobian is recomputed numerically only when damped steps stop making
/// progress; between recomputations it is reused across steps.
/// Rank-deficient Jacobians fall back to the damped normal equations, so
/// consistent singular systems still converge. Throws ConvergenceError after
/// max_iterations (or when damping stalls) and SingularMatrixError if even
/// the damped step is non-finite, listing the offending coordinates.
SolveResult solve_roots(const VectorFn& ef_mean, const Eigen::VectorXd& theta0,
                        const SolverOptions& opts = {});

}  // namespace survee
