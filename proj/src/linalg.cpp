#include "dsnb/linalg.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "dsnb/error.hpp"

namespace dsnb {

Eigen::LLT<Eigen::MatrixXd> robust_llt(const Eigen::MatrixXd& a, std::string_view context) {
  if (!a.allFinite()) {
    throw NumericalFailure(std::string(context) + ": matrix has non-finite entries");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) return llt;
  const auto id = Eigen::MatrixXd::Identity(a.rows(), a.cols());
  for (double jitter = 1e-10; jitter <= 1e-6 * 1.0001; jitter *= 10.0) {
    llt.compute(a + jitter * id);
    if (llt.info() == Eigen::Success) return llt;
  }
  throw NumericalFailure(std::string(context) +
                         ": Cholesky factorization failed after jitter up to 1e-6");
}

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& a, std::string_view context) {
  const auto llt = robust_llt(a, context);
  return symmetrize(llt.solve(Eigen::MatrixXd::Identity(a.rows(), a.cols())));
}

double log_mvn_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                       const Eigen::MatrixXd& cov, std::string_view context) {
  const auto llt = robust_llt(cov, context);
  const Eigen::VectorXd u = llt.matrixL().solve(x - mean);
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * (u.squaredNorm() + log_det +
                 static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi));
}

}  // namespace dsnb
