#include "dsnb/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>

#include <boost/math/special_functions/trigamma.hpp>

#include "dsnb/distributions.hpp"
#include "dsnb/error.hpp"

namespace dsnb {

SpatialWeights SpatialWeights::from_triplets(int n, const std::vector<WeightTriplet>& triplets) {
  if (n < 1) throw InvalidParameter("weights need at least one unit");
  std::map<std::pair<int, int>, double> pairs;
  for (const auto& tr : triplets) {
    if (tr.i < 0 || tr.i >= n || tr.j < 0 || tr.j >= n) {
      throw InvalidParameter("weight index out of range: (" + std::to_string(tr.i) + ", " +
                             std::to_string(tr.j) + ")");
    }
    if (tr.i == tr.j) throw InvalidParameter("weights must have a zero diagonal");
    if (!(tr.w >= 0.0) || !std::isfinite(tr.w)) throw InvalidParameter("weights must be non-negative");
    if (tr.w == 0.0) continue;
    const auto key = std::minmax(tr.i, tr.j);
    auto [it, inserted] = pairs.emplace(key, tr.w);
    if (!inserted && std::abs(it->second - tr.w) > 1e-12 * std::max(1.0, tr.w)) {
      throw InvalidParameter("asymmetric weights for pair (" + std::to_string(key.first) + ", " +
                             std::to_string(key.second) + ")");
    }
  }
  std::vector<std::vector<Neighbor>> rows(static_cast<std::size_t>(n));
  for (const auto& [key, w] : pairs) {
    rows[key.first].push_back({key.second, w});
    rows[key.second].push_back({key.first, w});
  }
  SpatialWeights out;
  out.n_ = n;
  out.row_sums_ = Eigen::VectorXd::Zero(n);
  out.row_start_.assign(static_cast<std::size_t>(n) + 1, 0);
  for (int i = 0; i < n; ++i) {
    auto& row = rows[i];
    std::sort(row.begin(), row.end(), [](const Neighbor& a, const Neighbor& b) { return a.j < b.j; });
    for (const auto& nb : row) out.row_sums_(i) += nb.w;
    out.row_start_[i + 1] = out.row_start_[i] + row.size();
    out.adjacency_.insert(out.adjacency_.end(), row.begin(), row.end());
  }
  if (n > 1) {
    for (int i = 0; i < n; ++i) {
      if (!(out.row_sums_(i) > 0.0)) {
        throw InvalidParameter("unit " + std::to_string(i) + " has no neighbors");
      }
    }
  }
  return out;
}

double SpatialWeights::weight(int i, int j) const {
  for (const auto& nb : neighbors(i)) {
    if (nb.j == j) return nb.w;
  }
  return 0.0;
}

std::vector<WeightTriplet> SpatialWeights::upper_triplets() const {
  std::vector<WeightTriplet> out;
  for (int i = 0; i < n_; ++i) {
    for (const auto& nb : neighbors(i)) {
      if (nb.j > i) out.push_back({i, nb.j, nb.w});
    }
  }
  return out;
}

Eigen::MatrixXd SpatialWeights::dense() const {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n_, n_);
  for (int i = 0; i < n_; ++i) {
    for (const auto& nb : neighbors(i)) w(i, nb.j) = nb.w;
  }
  return w;
}

Eigen::MatrixXd SpatialWeights::laplacian() const {
  Eigen::MatrixXd l = -dense();
  l.diagonal() += row_sums_;
  return l;
}

namespace {

SpatialWeights chain(int n, int max_order, bool binary) {
  if (max_order < 1) throw InvalidParameter("chain order must be at least 1");
  if (n <= 2 * max_order) {
    throw InvalidParameter("chain of " + std::to_string(n) + " units is too short for order " +
                           std::to_string(max_order));
  }
  std::vector<WeightTriplet> tr;
  for (int i = 0; i < n; ++i) {
    for (int k = 1; k <= max_order && i + k < n; ++k) {
      tr.push_back({i, i + k, binary ? 1.0 : 1.0 / k});
    }
  }
  return SpatialWeights::from_triplets(n, tr);
}

}  // namespace

SpatialWeights build_chain_weights(int n, int max_order) { return chain(n, max_order, true); }

SpatialWeights build_chain_weights_inverse_order(int n, int max_order) {
  return chain(n, max_order, false);
}

void sample_phi_sweep(Eigen::Ref<Eigen::VectorXd> phi_t, const Eigen::VectorXd& z_t,
                      const Eigen::VectorXd& offset_t, const Eigen::VectorXd& omega_t,
                      const SpatialWeights& weights, double tau_sq, RngStream& rng) {
  if (!(tau_sq > 0.0) || !std::isfinite(tau_sq)) throw InvalidParameter("tau^2 must be positive");
  const int n = weights.size();
  if (phi_t.size() != n || z_t.size() != n || offset_t.size() != n || omega_t.size() != n) {
    throw InvalidParameter("phi sweep inputs must all have length n");
  }
  const double inv_tau_sq = 1.0 / tau_sq;
  for (int i = 0; i < n; ++i) {
    double neighbor_sum = 0.0;
    for (const auto& nb : weights.neighbors(i)) neighbor_sum += nb.w * phi_t(nb.j);
    const double precision = omega_t(i) + weights.row_sum(i) * inv_tau_sq;
    const double var = 1.0 / precision;
    const double mean = var * ((z_t(i) - offset_t(i)) * omega_t(i) + neighbor_sum * inv_tau_sq);
    phi_t(i) = mean + std::sqrt(var) * rng.normal();
  }
}

Eigen::VectorXd sample_phi(const ParameterState& state, const PanelDataset& data,
                           const SpatialWeights& weights, int t, RngStream& rng) {
  Eigen::VectorXd z(data.n);
  for (int i = 0; i < data.n; ++i) z(i) = augment_z(data.y(i, t), state.r, state.omega(i, t));
  Eigen::VectorXd phi = state.phi.col(t);
  sample_phi_sweep(phi, z, linear_offset(state, data, t), state.omega.col(t), weights,
                   state.tau_sq(t), rng);
  return phi;
}

Eigen::VectorXd recenter_phi(const Eigen::VectorXd& phi_t) {
  if (phi_t.size() == 0) return phi_t;
  return phi_t.array() - phi_t.mean();
}

double icar_residual_quadratic(const Eigen::VectorXd& phi_t, const SpatialWeights& weights) {
  double q = 0.0;
  for (int i = 0; i < weights.size(); ++i) {
    const double wp = weights.row_sum(i);
    if (wp <= 0.0) continue;
    double avg = 0.0;
    for (const auto& nb : weights.neighbors(i)) avg += nb.w * phi_t(nb.j);
    const double d = phi_t(i) - avg / wp;
    q += 0.5 * wp * d * d;
  }
  return q;
}

double sample_tau_sq_inv(const Eigen::VectorXd& phi_t, const SpatialWeights& weights,
                         const HyperParameters& hyper, RngStream& rng) {
  if (phi_t.size() != weights.size()) throw InvalidParameter("phi_t length must equal n");
  const double shape = hyper.c0 + 0.5 * weights.size();
  const double rate = hyper.d0 + icar_residual_quadratic(phi_t, weights);
  return sample_gamma_rate(shape, rate, rng);
}

double spatial_correlation_alpha(const Eigen::VectorXd& phi_t, double r) {
  if (phi_t.size() < 2) throw InvalidParameter("spatial correlation needs n >= 2");
  if (!(r > 0.0)) throw InvalidParameter("r must be positive");
  const double mean = phi_t.mean();
  const double var = (phi_t.array() - mean).square().sum() / static_cast<double>(phi_t.size() - 1);
  const double sd_phi = std::sqrt(var);
  const double sd_eps = std::sqrt(boost::math::trigamma(r));
  return sd_phi / (sd_phi + sd_eps);
}

}  // namespace dsnb
