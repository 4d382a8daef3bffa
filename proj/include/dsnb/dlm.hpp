#pragma once

#include <vector>

#include <Eigen/Dense>

#include "dsnb/model.hpp"
#include "dsnb/rng.hpp"

namespace dsnb {

// Applies Q^{-1} for Q = F R F' + diag(1 / obs_precision) without forming
// the n x n matrix:
//   Q^{-1} = D - D F R (I_q + F' D F R)^{-1} F' D,   D = diag(obs_precision).
class PredictivePrecision {
 public:
  PredictivePrecision(const Eigen::MatrixXd& F, const Eigen::VectorXd& obs_precision,
                      const Eigen::MatrixXd& R);

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
  // F' Q^{-1} v and F' Q^{-1} F, both O(n q^2).
  Eigen::VectorXd ft_apply(const Eigen::VectorXd& v) const;
  Eigen::MatrixXd ft_qinv_f() const;
  // Dense n x n inverse; for checking only.
  Eigen::MatrixXd dense() const;

 private:
  Eigen::MatrixXd F_;
  Eigen::VectorXd d_;
  Eigen::MatrixXd R_;
  Eigen::MatrixXd a_;  // F' D F
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;  // I + a_ R
};

struct FilterStep {
  Eigen::VectorXd a;  // prior mean G m_{t-1}
  Eigen::MatrixXd R;  // prior covariance G C_{t-1} G' + W
  Eigen::VectorXd f;  // one-step predictive mean F a
  Eigen::VectorXd m;  // filtered mean
  Eigen::MatrixXd C;  // filtered covariance
};

struct FilterCache {
  std::vector<FilterStep> steps;
  std::vector<PredictivePrecision> predictive;  // Q_t^{-1} handles
  std::size_t size() const { return steps.size(); }
};

// Kalman recursions for zeta_t = F_t theta_t + nu_t, nu_t ~ N(0, diag(1/obs_precision_t)).
// Throws NumericalFailure tagged with the period when I + F'DFR is singular.
FilterCache forward_filter(const std::vector<Eigen::VectorXd>& zeta,
                           const std::vector<Eigen::MatrixXd>& F,
                           const std::vector<Eigen::VectorXd>& obs_precision,
                           const DlmSystem& system, const Eigen::VectorXd& m0,
                           const Eigen::MatrixXd& C0);

// Joint draw of theta_{1:T}: theta_T ~ N(m_T, C_T), then for t = T-1..1
//   theta_t | theta_{t+1} ~ N(m_t + J_t (theta_{t+1} - a_{t+1}), C_t - J_t G C_t),
//   J_t = C_t G' R_{t+1}^{-1}.
// Returns a T x q matrix.
Eigen::MatrixXd backward_sample(const FilterCache& cache, const DlmSystem& system, RngStream& rng);

struct GammaPosterior {
  double shape = 0.0;
  Eigen::VectorXd rate;
};

// Conjugate posterior of 1/sigma^2_theta_k given a trajectory.
GammaPosterior sigma_theta_posterior(const Eigen::MatrixXd& theta, const DlmSystem& system,
                                     const HyperParameters& hyper);

// Draws 1/sigma^2_theta_k and returns sigma^2_theta_k. Needs T >= 2.
Eigen::VectorXd sample_sigma_theta(const Eigen::MatrixXd& theta, const DlmSystem& system,
                                   const HyperParameters& hyper, RngStream& rng);

// zeta_t = z_t - X^F_t gamma - X^R_t beta - phi^t.
Eigen::VectorXd assemble_zeta(const ParameterState& state, const PanelDataset& data, int t);

}  // namespace dsnb
