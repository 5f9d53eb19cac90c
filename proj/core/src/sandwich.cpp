#include "survee/sandwich.hpp"

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <limits>
#include <string>

#include "survee/errors.hpp"

namespace survee {

Eigen::MatrixXd bread_matrix(const VectorFn& ef_mean, const Eigen::VectorXd& theta_hat,
                             double step) {
  return -numerical_jacobian(ef_mean, theta_hat, step);
}

Eigen::MatrixXd meat_matrix(const Eigen::MatrixXd& ef_stack) {
  if (ef_stack.cols() < 1) throw DimensionError("estimating-function stack is empty");
  const double n = static_cast<double>(ef_stack.cols());
  return (ef_stack * ef_stack.transpose()) / n;
}

SandwichResult sandwich(const Eigen::MatrixXd& bread, const Eigen::MatrixXd& meat,
                        Eigen::Index n) {
  if (bread.rows() != bread.cols())
    throw DimensionError("bread matrix is not square");
  if (meat.rows() != bread.rows() || meat.cols() != bread.cols())
    throw DimensionError("meat dimensions do not match bread");
  if (n < 1) throw ValidationError("sandwich needs n >= 1");

  SandwichResult out;
  out.bread = bread;
  out.meat = meat;

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(bread, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::VectorXd s = svd.singularValues();
  const double smax = s.size() > 0 ? s[0] : 0.0;
  const double smin = s.size() > 0 ? s.tail(1)[0] : 0.0;
  if (smin <= smax * std::numeric_limits<double>::epsilon() * 64.0 || smax == 0.0) {
    SingularMatrixError err("bread matrix is numerically singular");
    for (Eigen::Index c = 0; c < s.size(); ++c) {
      if (s[c] <= smax * 1e-12) {
        Eigen::Index worst = 0;
        svd.matrixV().col(c).cwiseAbs().maxCoeff(&worst);
        err.indices.push_back(static_cast<int>(worst));
      }
    }
    throw err;
  }
  out.bread_condition = smax / smin;

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(bread);
  const Eigen::MatrixXd bread_inv = lu.inverse();
  out.covariance =
      (bread_inv * meat * bread_inv.transpose()) / static_cast<double>(n);
  out.se = out.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  return out;
}

std::pair<double, double> wald_ci(double estimate, double se, double level) {
  if (!(level > 0.0 && level < 1.0))
    throw ValidationError("confidence level must lie in (0, 1)");
  if (!std::isfinite(se)) throw ValidationError("standard error is not finite");
  const boost::math::normal_distribution<double> normal;
  const double z = boost::math::quantile(normal, (1.0 + level) / 2.0);
  return {estimate - z * se, estimate + z * se};
}

}  // namespace survee
