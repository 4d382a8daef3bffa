#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "dsnb/distributions.hpp"
#include "dsnb/model.hpp"
#include "dsnb/rng.hpp"
#include "dsnb/spatial.hpp"

namespace dsnb {

struct GibbsConfig {
  int iterations = 3000;
  int burn_in = 2000;
  int thin = 1;
  std::uint64_t seed = 1;
  bool mixture_enabled = false;
  int components = 1;
  // Worker threads for per-period sub-draws. Results do not depend on it.
  int workers = 1;
  // Without spatial effects phi stays at zero and tau is not updated.
  bool spatial_enabled = true;
  // Holds r at a known value instead of drawing (L, r, h).
  std::optional<double> fixed_r;
  // Parameters screened by the convergence diagnostic; empty means every
  // gamma, r and theta coordinate.
  std::vector<std::string> monitors;
  bool progress = false;

  void validate() const;
};

// One family of retained draws, e.g. "theta" with columns "theta[1][1]", ...
struct Trace {
  std::string name;
  std::vector<std::string> columns;
  Eigen::MatrixXd draws;  // retained draws x columns
};

struct PosteriorChain {
  std::vector<Trace> traces;
  std::vector<std::string> monitors;

  // Posterior means over the retained draws.
  Eigen::MatrixXd phi_mean;  // n x T
  Eigen::MatrixXd psi_mean;  // n x T
  double r_mean = 0.0;
  // Deviance at the posterior-mean linear predictor and r.
  double plugin_deviance = 0.0;
  // n x C share of retained draws spent in each component.
  Eigen::MatrixXd label_frequency;

  std::size_t size() const;
  const Trace* find(std::string_view family) const;
  std::optional<Eigen::VectorXd> column(std::string_view name) const;
  std::vector<std::string> column_names() const;
};

// Names used in traces and truth records.
std::string gamma_name(int k);
std::string theta_name(int t, int k);
std::string sigma_theta_name(int k);
std::string tau_name(int t);
std::string alpha_name(int t);
std::string mu_name(int c, int k);
std::string eta_name(int c);

std::vector<std::string> default_monitors(const PanelDataset& data);

// Gibbs sampler for the dynamic spatial NB model. The base scheme updates,
// in order: table counts and r, h, gamma, omega, theta (FFBS), sigma_theta,
// phi (sweep + recentering), tau, alpha. The extended scheme replaces the
// gamma step with the blocked draw of (gamma, mu, beta) followed by omega,
// then Sigma_c, class labels and eta, before the shared dynamic/spatial steps.
class GibbsSampler {
 public:
  GibbsSampler(const PanelDataset& data, const SpatialWeights* weights, HyperParameters hyper,
               GibbsConfig config);

  ParameterState initialize(RngStream& rng) const;

  // Dispatches on config.mixture_enabled. Each call advances `rng` by one
  // draw and derives all sub-streams from it.
  void step(ParameterState& state, RngStream& rng) const;
  void step_base(ParameterState& state, RngStream& rng) const;
  void step_extended(ParameterState& state, RngStream& rng) const;

  // Label probabilities for unit i under the marginal (beta integrated)
  // Gaussian likelihood of z_i.
  Eigen::VectorXd label_probabilities(const ParameterState& state, int i) const;

  const PanelDataset& data() const { return data_; }
  const HyperParameters& hyper() const { return hyper_; }
  const GibbsConfig& config() const { return config_; }

 private:
  struct StepStreams;

  void update_dispersion(ParameterState& s, const StepStreams& st) const;
  void update_gamma_base(ParameterState& s, const StepStreams& st) const;
  void update_random_block(ParameterState& s, const StepStreams& st) const;
  void update_omega(ParameterState& s, const StepStreams& st) const;
  void update_theta(ParameterState& s, const StepStreams& st) const;
  void update_sigma_theta(ParameterState& s, const StepStreams& st) const;
  void update_phi(ParameterState& s, const StepStreams& st) const;
  void update_tau(ParameterState& s, const StepStreams& st) const;
  void update_alpha(ParameterState& s) const;
  void update_component_covariances(ParameterState& s, const StepStreams& st) const;
  void update_labels(ParameterState& s, const StepStreams& st) const;
  void update_eta(ParameterState& s, const StepStreams& st) const;

  Eigen::MatrixXd z_matrix(const ParameterState& s) const;
  Eigen::VectorXd unit_residual(const ParameterState& s, const Eigen::MatrixXd& z, int i) const;
  Eigen::MatrixXd marginal_precision(const ParameterState& s, int i, int c) const;

  const PanelDataset& data_;
  const SpatialWeights* weights_;
  HyperParameters hyper_;
  GibbsConfig config_;
  DlmSystem system_;
  TableCountLogF table_;
  Eigen::MatrixXd s0_inv_;
  Eigen::MatrixXd b0_inv_;
  std::vector<Eigen::MatrixXd> xf_unit_;  // n blocks of T x g
  std::vector<Eigen::MatrixXd> xr_unit_;  // n blocks of T x h
};

// Single Algorithm-1 style iteration on a copy of `state`.
ParameterState gibbs_step_base(const ParameterState& state, const PanelDataset& data,
                               const SpatialWeights& weights, const HyperParameters& hyper,
                               RngStream& rng);
// Single extended (mixture) iteration on a copy of `state`.
ParameterState gibbs_step_extended(const ParameterState& state, const PanelDataset& data,
                                   const SpatialWeights& weights, const HyperParameters& hyper,
                                   int components, RngStream& rng);

// Runs config.iterations sweeps, discards burn-in, keeps every thin-th draw.
// `weights` may be null only when spatial effects are disabled.
PosteriorChain run_chain(const PanelDataset& data, const SpatialWeights* weights,
                         const HyperParameters& hyper, const GibbsConfig& config,
                         std::optional<ParameterState> initial = std::nullopt);

}  // namespace dsnb
