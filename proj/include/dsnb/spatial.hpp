#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dsnb/model.hpp"
#include "dsnb/rng.hpp"

namespace dsnb {

struct WeightTriplet {
  int i = 0;
  int j = 0;
  double w = 0.0;
};

struct Neighbor {
  int j = 0;
  double w = 0.0;
};

// Symmetric, zero-diagonal, non-negative spatial weights kept as per-row
// adjacency lists. Every row sum must be strictly positive.
class SpatialWeights {
 public:
  SpatialWeights() = default;

  // Builds from triplets; a pair listed once is mirrored, a pair listed in
  // both directions must agree. Throws InvalidParameter otherwise.
  static SpatialWeights from_triplets(int n, const std::vector<WeightTriplet>& triplets);

  int size() const { return n_; }
  double row_sum(int i) const { return row_sums_[i]; }
  const Eigen::VectorXd& row_sums() const { return row_sums_; }
  std::span<const Neighbor> neighbors(int i) const {
    return {adjacency_.data() + row_start_[i], adjacency_.data() + row_start_[i + 1]};
  }
  double weight(int i, int j) const;

  // Each unordered pair once with i < j.
  std::vector<WeightTriplet> upper_triplets() const;

  Eigen::MatrixXd dense() const;
  // Graph Laplacian diag(w_i+) - W.
  Eigen::MatrixXd laplacian() const;

 private:
  int n_ = 0;
  Eigen::VectorXd row_sums_;
  std::vector<std::size_t> row_start_;
  std::vector<Neighbor> adjacency_;
};

// Binary chain topology: w_ij = 1 iff 0 < |i - j| <= max_order.
SpatialWeights build_chain_weights(int n, int max_order);
// Distance-decayed chain topology: w_ij = 1/k for k-order neighbors, k <= max_order.
SpatialWeights build_chain_weights_inverse_order(int n, int max_order);

// One ascending single-site sweep of the ICAR-plus-likelihood full
// conditionals for period t, updating phi_t in place:
//   V = (omega_i + w_i+ / tau_sq)^{-1}
//   mean = V ((z_i - offset_i) omega_i + sum_j w_ij phi_j / tau_sq)
void sample_phi_sweep(Eigen::Ref<Eigen::VectorXd> phi_t, const Eigen::VectorXd& z_t,
                      const Eigen::VectorXd& offset_t, const Eigen::VectorXd& omega_t,
                      const SpatialWeights& weights, double tau_sq, RngStream& rng);

// State-level wrapper: z from (y, r, omega), offset from the linear predictor
// without phi. Returns the swept (not yet recentered) phi_t.
Eigen::VectorXd sample_phi(const ParameterState& state, const PanelDataset& data,
                           const SpatialWeights& weights, int t, RngStream& rng);

// Subtracts the mean so the vector sums to zero.
Eigen::VectorXd recenter_phi(const Eigen::VectorXd& phi_t);

// sum_i (w_i+ / 2) (phi_i - sum_j w_ij phi_j / w_i+)^2
double icar_residual_quadratic(const Eigen::VectorXd& phi_t, const SpatialWeights& weights);

// Draws tau_t^{-2} ~ Gamma(c0 + n/2, d0 + icar_residual_quadratic).
double sample_tau_sq_inv(const Eigen::VectorXd& phi_t, const SpatialWeights& weights,
                         const HyperParameters& hyper, RngStream& rng);

// sd(phi_t) / (sd(phi_t) + sqrt(trigamma(r))), sample standard deviation.
double spatial_correlation_alpha(const Eigen::VectorXd& phi_t, double r);

}  // namespace dsnb
