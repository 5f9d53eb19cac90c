#include "survee/root_finding.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>

#include "survee/errors.hpp"

namespace survee {
namespace {

double default_step() {
  return std::cbrt(std::numeric_limits<double>::epsilon());
}

double condition_estimate(const Eigen::MatrixXd& j) {
  if (j.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(j);
  const double smin = svd.singularValues().tail(1)[0];
  const double smax = svd.singularValues()[0];
  if (smin <= 0.0) return std::numeric_limits<double>::infinity();
  return smax / smin;
}

[[noreturn]] void throw_singular(const Eigen::MatrixXd& j) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(j, Eigen::ComputeFullV);
  const Eigen::VectorXd s = svd.singularValues();
  const double cutoff = s.size() > 0 ? s[0] * 1e-12 : 0.0;
  SingularMatrixError err("estimating-function Jacobian is numerically singular");
  for (Eigen::Index c = 0; c < s.size(); ++c) {
    if (s[c] <= cutoff) {
      Eigen::Index worst = 0;
      svd.matrixV().col(c).cwiseAbs().maxCoeff(&worst);
      err.indices.push_back(static_cast<int>(worst));
    }
  }
  throw err;
}

}  // namespace

Eigen::MatrixXd numerical_jacobian(const VectorFn& f, const Eigen::VectorXd& theta,
                                   double step) {
  if (step <= 0.0) step = default_step();
  const Eigen::Index m = theta.size();
  Eigen::VectorXd probe = theta;
  Eigen::MatrixXd jac;
  for (Eigen::Index c = 0; c < m; ++c) {
    const double h = step * std::max(1.0, std::abs(theta[c]));
    probe[c] = theta[c] + h;
    Eigen::VectorXd up = f(probe);
    probe[c] = theta[c] - h;
    Eigen::VectorXd down = f(probe);
    probe[c] = theta[c];
    if (!up.allFinite() || !down.allFinite())
      throw Error("non-finite function value while differentiating coordinate " +
                  std::to_string(c));
    if (jac.size() == 0) jac.resize(up.size(), m);
    jac.col(c) = (up - down) / (2.0 * h);
  }
  if (m == 0) jac.resize(0, 0);
  return jac;
}

SolveResult solve_roots(const VectorFn& ef_mean, const Eigen::VectorXd& theta0,
                        const SolverOptions& opts) {
  SolveResult result;
  result.theta = theta0;
  if (theta0.size() == 0) {
    result.diagnostics.converged = true;
    return result;
  }

  Eigen::VectorXd value = ef_mean(result.theta);
  if (!value.allFinite())
    throw ValidationError("estimating function is non-finite at the starting point");
  if (value.size() != theta0.size())
    throw DimensionError("estimating function returns " + std::to_string(value.size()) +
                         " values for " + std::to_string(theta0.size()) + " parameters");

  double norm = value.lpNorm<Eigen::Infinity>();
  if (norm <= opts.tolerance) {
    result.diagnostics.converged = true;
    result.diagnostics.final_norm = norm;
    Eigen::MatrixXd jac = numerical_jacobian(ef_mean, result.theta, opts.jacobian_step);
    result.diagnostics.jacobian_condition = condition_estimate(jac);
    return result;
  }

  Eigen::MatrixXd jac = numerical_jacobian(ef_mean, result.theta, opts.jacobian_step);
  bool jac_is_fresh = true;
  double lambda = 0.0;
  int stalls_at_max_damping = 0;
  // Steps are accepted on the Euclidean norm: damped Gauss-Newton directions
  // guarantee descent of ||f||_2 for large enough damping, while a single
  // large coordinate can keep the max norm from decreasing even on good
  // steps. Convergence is still declared on the max norm against tolerance.
  double objective = value.norm();

  for (int iter = 1; iter <= opts.max_iterations; ++iter) {
    result.diagnostics.iterations = iter;

    Eigen::VectorXd step;
    if (lambda == 0.0) {
      Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
      step = lu.solve(-value);
    }
    if (lambda > 0.0 || !step.allFinite()) {
      if (lambda == 0.0) lambda = opts.initial_damping;
      const Eigen::MatrixXd jtj = jac.transpose() * jac;
      Eigen::VectorXd damping = jtj.diagonal();
      for (Eigen::Index c = 0; c < damping.size(); ++c)
        if (damping[c] <= 0.0) damping[c] = 1.0;
      const Eigen::MatrixXd system = jtj + lambda * damping.asDiagonal().toDenseMatrix();
      step = Eigen::LDLT<Eigen::MatrixXd>(system).solve(-jac.transpose() * value);
    }

    if (!step.allFinite()) {
      if (jac_is_fresh) throw_singular(jac);
      jac = numerical_jacobian(ef_mean, result.theta, opts.jacobian_step);
      jac_is_fresh = true;
      continue;
    }

    const Eigen::VectorXd candidate = result.theta + step;
    Eigen::VectorXd candidate_value = ef_mean(candidate);
    const bool finite = candidate_value.allFinite();
    const double candidate_objective =
        finite ? candidate_value.norm() : std::numeric_limits<double>::infinity();

    if (candidate_objective < objective) {
      const Eigen::VectorXd delta_value = candidate_value - value;
      result.theta = candidate;
      value = std::move(candidate_value);
      norm = value.lpNorm<Eigen::Infinity>();
      objective = candidate_objective;
      stalls_at_max_damping = 0;
      if (norm <= opts.tolerance) {
        result.diagnostics.converged = true;
        break;
      }
      // Broyden update keeps the Jacobian useful between full recomputations.
      const double denom = step.squaredNorm();
      if (denom > 0.0) jac += (delta_value - jac * step) * (step.transpose() / denom);
      jac_is_fresh = false;
      lambda = lambda > 0.0 ? std::max(lambda / 10.0, 0.0) : 0.0;
      if (lambda < 1e-14) lambda = 0.0;
      continue;
    }

    // Rejected step: refresh a stale Jacobian first, then escalate damping.
    if (!jac_is_fresh) {
      jac = numerical_jacobian(ef_mean, result.theta, opts.jacobian_step);
      jac_is_fresh = true;
      continue;
    }
    lambda = lambda == 0.0 ? opts.initial_damping : lambda * 10.0;
    if (lambda > 1e12) {
      if (++stalls_at_max_damping > 3) break;
      lambda = 1e12;
    }
  }

  result.diagnostics.final_norm = norm;
  result.diagnostics.jacobian_condition = condition_estimate(jac);
  if (!result.diagnostics.converged) {
    ConvergenceError err("root finder did not reach tolerance " +
                         std::to_string(opts.tolerance) + "; final norm " +
                         std::to_string(norm));
    err.iterations = result.diagnostics.iterations;
    err.final_norm = norm;
    throw err;
  }
  return result;
}

}  // namespace survee
