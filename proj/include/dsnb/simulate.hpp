#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dsnb/model.hpp"
#include "dsnb/rng.hpp"
#include "dsnb/spatial.hpp"

namespace dsnb {

// Settings of the synthetic panel generator. Vectors left empty take the
// defaults filled in by resolve().
struct DgpSpec {
  int n = 1000;
  int T = 10;
  int g = 3;
  int q = 3;
  int h = 0;

  Eigen::VectorXd gamma;           // g, default (0.2, 0.1, -0.1) truncated/zero-padded
  Eigen::VectorXd theta0;          // q, default (0.5, -0.5, -0.5, ...)
  Eigen::VectorXd sigma_theta_sq;  // q, default 0.0025
  Eigen::VectorXd tau;             // T, default 0.3 (standard deviation, not variance)
  double r = 1.5;
  double rho = 1.0;

  // X^F_it ~ N(xf_mean, xf_cov).
  Eigen::VectorXd xf_mean;  // g, default 0
  Eigen::MatrixXd xf_cov;   // g x g, default I

  // X^D_itk = amplitude * sin(2 pi (t / period) + phase_ik) + N(0, noise_sd^2),
  // with phase_ik ~ U(0, 2 pi). period <= 0 means one cycle over T periods.
  double sinusoid_amplitude = 1.0;
  double sinusoid_period = 0.0;
  double sinusoid_noise_sd = 0.25;

  int chain_order = 4;
  bool spatial = true;

  // Mixture truth, used when h > 0.
  Eigen::MatrixXd mu;             // C x h
  std::vector<Eigen::MatrixXd> Sigma;  // C blocks of h x h
  Eigen::VectorXd eta;            // C
  Eigen::VectorXd xr_mean;        // h, default 0
  Eigen::MatrixXd xr_cov;         // h x h, default I

  // Default truth for the given dimensions.
  static DgpSpec defaults(int n, int T);
  // Fills empty vectors with defaults and checks shapes and positivity.
  void resolve();
  void validate() const;
  int components() const { return static_cast<int>(eta.size()); }
};

// Every generated latent, for recovery scoring.
struct TruthRecord {
  Eigen::VectorXd gamma;
  double r = 0.0;
  Eigen::MatrixXd theta;  // T x q
  Eigen::VectorXd theta0;
  Eigen::VectorXd sigma_theta_sq;
  Eigen::VectorXd tau_sq;
  Eigen::MatrixXd phi;  // n x T
  Eigen::VectorXd alpha;
  Eigen::MatrixXd beta;  // n x h
  Eigen::MatrixXd mu;    // C x h
  Eigen::VectorXd eta;
  std::vector<int> labels;

  // Scalar parameters keyed by the trace column names ("gamma[1]", "r",
  // "theta[t][k]", "sigma_theta_sq[k]", "tau_sq[t]", "alpha[t]", ...).
  std::map<std::string, double> scalars() const;
};

struct SimulatedData {
  PanelDataset data;
  SpatialWeights weights;
  TruthRecord truth;
};

// Draws from the ICAR Gaussian on the sum-to-zero subspace using the
// eigendecomposition of the weighted graph Laplacian.
class IcarGenerator {
 public:
  explicit IcarGenerator(const SpatialWeights& weights);
  Eigen::VectorXd draw(double tau, RngStream& rng) const;
  // tau^2 times the Laplacian pseudo-inverse.
  Eigen::MatrixXd covariance(double tau) const;

 private:
  Eigen::MatrixXd basis_;   // n x (n-1) eigenvectors with nonzero eigenvalue
  Eigen::VectorXd scale_;   // 1/sqrt(eigenvalue)
};

Eigen::VectorXd icar_joint_draw(const SpatialWeights& weights, double tau, RngStream& rng);

SimulatedData generate(DgpSpec spec, RngStream& rng);

}  // namespace dsnb
