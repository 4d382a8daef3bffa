#pragma once

#include <string_view>

#include <Eigen/Dense>

namespace dsnb {

// Cholesky factorization with a jitter ladder: on failure add 1e-10 I and
// escalate by a factor of 10 up to 1e-6 I. Throws NumericalFailure tagged
// with `context` when the ladder is exhausted.
Eigen::LLT<Eigen::MatrixXd> robust_llt(const Eigen::MatrixXd& a,
                                       std::string_view context);

inline Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& a) {
  return 0.5 * (a + a.transpose());
}

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& a, std::string_view context);

// log N(x; mean, cov) for a dense covariance.
double log_mvn_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                       const Eigen::MatrixXd& cov, std::string_view context);

}  // namespace dsnb
