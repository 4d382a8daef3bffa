#include "dsnb/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <iostream>
#include <string>

#include "dsnb/dlm.hpp"
#include "dsnb/error.hpp"
#include "dsnb/linalg.hpp"

namespace dsnb {

namespace {

// Stream keys. Steps shared by the base and extended schemes use the same
// key so that both consume identical randomness for them.
enum StepKey : std::uint64_t {
  kTableCounts = 1,
  kDispersion = 2,
  kHyperH = 3,
  kGamma = 4,
  kOmega = 5,
  kTheta = 6,
  kSigmaTheta = 7,
  kPhi = 8,
  kTau = 9,
  kBeta = 10,
  kMu = 11,
  kSigmaC = 12,
  kLabels = 13,
  kEta = 14,
  kInit = 15,
};

// Runs body(k) for k in [0, count) on up to `workers` threads and rethrows
// the first exception. Each body must only touch index-k state.
template <class Body>
void parallel_for(int count, int workers, Body&& body) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
#pragma omp parallel for num_threads(std::max(1, workers)) schedule(static)
  for (int k = 0; k < count; ++k) {
    try {
      body(k);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

template <class Body>
void labelled(const char* label, Body&& body) {
  try {
    body();
  } catch (const NumericalFailure& e) {
    throw NumericalFailure(std::string(label) + ": " + e.what());
  }
}

}  // namespace

struct GibbsSampler::StepStreams {
  RngStream base;
  RngStream get(StepKey key, std::uint64_t sub = 0) const { return base.derive(key).derive(sub); }
};

void GibbsConfig::validate() const {
  if (iterations < 1) throw InvalidParameter("iterations must be positive");
  if (burn_in < 0 || burn_in >= iterations) throw InvalidParameter("burn_in must be < iterations");
  if (thin < 1) throw InvalidParameter("thin must be >= 1");
  if (components < 1) throw InvalidParameter("components must be >= 1");
  if (workers < 1) throw InvalidParameter("workers must be >= 1");
  if (fixed_r && !(*fixed_r > 0.0)) throw InvalidParameter("fixed r must be positive");
}

std::size_t PosteriorChain::size() const {
  return traces.empty() ? 0 : static_cast<std::size_t>(traces.front().draws.rows());
}

const Trace* PosteriorChain::find(std::string_view family) const {
  for (const auto& t : traces) {
    if (t.name == family) return &t;
  }
  return nullptr;
}

std::optional<Eigen::VectorXd> PosteriorChain::column(std::string_view name) const {
  for (const auto& t : traces) {
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      if (t.columns[c] == name) return Eigen::VectorXd(t.draws.col(static_cast<Eigen::Index>(c)));
    }
  }
  return std::nullopt;
}

std::vector<std::string> PosteriorChain::column_names() const {
  std::vector<std::string> out;
  for (const auto& t : traces) out.insert(out.end(), t.columns.begin(), t.columns.end());
  return out;
}

std::string gamma_name(int k) { return "gamma[" + std::to_string(k + 1) + "]"; }
std::string theta_name(int t, int k) {
  return "theta[" + std::to_string(t + 1) + "][" + std::to_string(k + 1) + "]";
}
std::string sigma_theta_name(int k) { return "sigma_theta_sq[" + std::to_string(k + 1) + "]"; }
std::string tau_name(int t) { return "tau_sq[" + std::to_string(t + 1) + "]"; }
std::string alpha_name(int t) { return "alpha[" + std::to_string(t + 1) + "]"; }
std::string mu_name(int c, int k) {
  return "mu[" + std::to_string(c + 1) + "][" + std::to_string(k + 1) + "]";
}
std::string eta_name(int c) { return "eta[" + std::to_string(c + 1) + "]"; }

std::vector<std::string> default_monitors(const PanelDataset& data) {
  std::vector<std::string> out;
  for (int k = 0; k < data.g; ++k) out.push_back(gamma_name(k));
  out.push_back("r");
  for (int k = 0; k < data.q; ++k) {
    for (int t = 0; t < data.T; ++t) out.push_back(theta_name(t, k));
  }
  return out;
}

GibbsSampler::GibbsSampler(const PanelDataset& data, const SpatialWeights* weights,
                           HyperParameters hyper, GibbsConfig config)
    : data_(data),
      weights_(weights),
      hyper_(std::move(hyper)),
      config_(std::move(config)),
      table_(data.max_count()) {
  config_.validate();
  hyper_.components = config_.components;
  hyper_.validate(data_.g, data_.q, config_.mixture_enabled ? data_.h : 0);
  if (config_.mixture_enabled && data_.h == 0) {
    throw InvalidParameter("mixture extension needs random-coefficient covariates");
  }
  if (config_.spatial_enabled) {
    if (weights_ == nullptr) throw InvalidParameter("spatial effects need a weight matrix");
    if (weights_->size() != data_.n) throw InvalidParameter("weight matrix size differs from n");
    if (data_.n < 2) throw InvalidParameter("spatial effects need at least two units");
  }
  system_ = DlmSystem::diagonal(data_.q, hyper_.rho, Eigen::VectorXd::Ones(data_.q));
  s0_inv_ = data_.g > 0 ? spd_inverse(hyper_.S0, "S0") : Eigen::MatrixXd(0, 0);
  if (config_.mixture_enabled) b0_inv_ = spd_inverse(hyper_.B0, "B0");
  xf_unit_.resize(static_cast<std::size_t>(data_.n));
  xr_unit_.resize(static_cast<std::size_t>(data_.n));
  for (int i = 0; i < data_.n; ++i) {
    xf_unit_[i].resize(data_.T, data_.g);
    xr_unit_[i].resize(data_.T, data_.h);
    for (int t = 0; t < data_.T; ++t) {
      if (data_.g > 0) xf_unit_[i].row(t) = data_.xf[t].row(i);
      if (data_.h > 0) xr_unit_[i].row(t) = data_.xr[t].row(i);
    }
  }
}

ParameterState GibbsSampler::initialize(RngStream& rng) const {
  const int n = data_.n, T = data_.T;
  const StepStreams st{rng.derive(kInit)};
  ParameterState s;
  s.r = config_.fixed_r.value_or(1.0);
  s.h = 1.0;
  s.gamma = Eigen::VectorXd::Zero(data_.g);
  s.theta = Eigen::MatrixXd::Zero(T, data_.q);
  if (data_.q > 0) {
    RngStream r0 = st.get(kTheta);
    s.theta0 = sample_mvn(hyper_.m0, hyper_.C0, r0);
  } else {
    s.theta0 = Eigen::VectorXd(0);
  }
  s.sigma_theta_sq = Eigen::VectorXd::Ones(data_.q);
  s.phi = Eigen::MatrixXd::Zero(n, T);
  s.tau_sq = Eigen::VectorXd::Ones(T);
  s.table_counts = Eigen::MatrixXi::Zero(n, T);
  s.alpha = Eigen::VectorXd::Zero(T);
  s.omega.resize(n, T);
  parallel_for(T, config_.workers, [&](int t) {
    RngStream r = st.get(kOmega, static_cast<std::uint64_t>(t));
    for (int i = 0; i < n; ++i) s.omega(i, t) = sample_pg({data_.y(i, t) + s.r, 0.0}, r);
  });
  s.beta = Eigen::MatrixXd::Zero(n, data_.h);
  if (config_.mixture_enabled) {
    const int C = config_.components;
    s.mu = hyper_.b0.transpose().replicate(C, 1);
    // Spread the initial component means along the first coordinate so the
    // initial labels are not all ties.
    if (C > 1) {
      for (int c = 0; c < C; ++c) s.mu(c, 0) += 2.0 * c / (C - 1) - 1.0;
    }
    const Eigen::MatrixXd sigma0 = spd_inverse(hyper_.nu0 * hyper_.V0, "initial Sigma");
    s.Sigma.assign(static_cast<std::size_t>(C), sigma0);
    s.eta = Eigen::VectorXd::Constant(C, 1.0 / C);
    s.labels.assign(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      label_probabilities(s, i).maxCoeff(&best);
      s.labels[i] = static_cast<int>(best);
    }
  }
  return s;
}

Eigen::MatrixXd GibbsSampler::z_matrix(const ParameterState& s) const {
  Eigen::MatrixXd z(data_.n, data_.T);
  for (int t = 0; t < data_.T; ++t) {
    for (int i = 0; i < data_.n; ++i) z(i, t) = augment_z(data_.y(i, t), s.r, s.omega(i, t));
  }
  return z;
}

// z_i - phi_i - X^D_i theta, as a T-vector.
Eigen::VectorXd GibbsSampler::unit_residual(const ParameterState& s, const Eigen::MatrixXd& z,
                                            int i) const {
  Eigen::VectorXd e(data_.T);
  for (int t = 0; t < data_.T; ++t) {
    double v = z(i, t) - s.phi(i, t);
    if (data_.q > 0) v -= data_.xd[t].row(i).dot(s.theta.row(t));
    e(t) = v;
  }
  return e;
}

// Upsilon_i^{-1} for component c: (diag(1/omega_i) + X^R_i Sigma_c X^R_i')^{-1},
// applied through D - D X (Sigma_c^{-1} + X'DX)^{-1} X'D with D = diag(omega_i).
Eigen::MatrixXd GibbsSampler::marginal_precision(const ParameterState& s, int i, int c) const {
  const Eigen::MatrixXd& x = xr_unit_[i];
  const Eigen::VectorXd d = s.omega.row(i).transpose();
  const Eigen::MatrixXd dx = d.asDiagonal() * x;
  const Eigen::MatrixXd sigma_inv = spd_inverse(s.Sigma[c], "Sigma_c");
  const Eigen::MatrixXd inner = spd_inverse(sigma_inv + x.transpose() * dx, "Upsilon inner");
  Eigen::MatrixXd u = Eigen::MatrixXd(d.asDiagonal());
  u -= dx * inner * dx.transpose();
  return u;
}

void GibbsSampler::update_dispersion(ParameterState& s, const StepStreams& st) const {
  if (config_.fixed_r) {
    s.r = *config_.fixed_r;
    return;
  }
  const Eigen::MatrixXd psi = compute_psi(s, data_);
  parallel_for(data_.T, config_.workers, [&](int t) {
    RngStream r = st.get(kTableCounts, static_cast<std::uint64_t>(t));
    for (int i = 0; i < data_.n; ++i) {
      s.table_counts(i, t) = sample_table_count(data_.y(i, t), s.r, table_, r);
    }
  });
  double log_sum = 0.0;
  for (int t = 0; t < data_.T; ++t) {
    for (int i = 0; i < data_.n; ++i) log_sum += softplus(psi(i, t));
  }
  const double total_l = static_cast<double>(s.table_counts.cast<long long>().sum());
  RngStream r = st.get(kDispersion);
  // ln(1 - p) = -softplus(psi), so h - sum ln(1 - p) = h + sum softplus(psi).
  s.r = sample_gamma_rate(hyper_.r0 + total_l, s.h + log_sum, r);
  RngStream rh = st.get(kHyperH);
  s.h = sample_gamma_rate(hyper_.r0 + hyper_.e0, s.r + hyper_.f0, rh);
}

void GibbsSampler::update_gamma_base(ParameterState& s, const StepStreams& st) const {
  if (data_.g == 0) return;
  const Eigen::MatrixXd z = z_matrix(s);
  Eigen::MatrixXd precision = s0_inv_;
  Eigen::VectorXd linear = s0_inv_ * hyper_.s0;
  for (int i = 0; i < data_.n; ++i) {
    Eigen::VectorXd e = unit_residual(s, z, i);
    if (data_.h > 0) e -= xr_unit_[i] * s.beta.row(i).transpose();
    const Eigen::MatrixXd u = Eigen::MatrixXd(s.omega.row(i).transpose().asDiagonal());
    const Eigen::MatrixXd ux = u * xf_unit_[i];
    precision.noalias() += xf_unit_[i].transpose() * ux;
    linear.noalias() += ux.transpose() * e;
  }
  RngStream r = st.get(kGamma);
  s.gamma = sample_mvn_canonical(symmetrize(precision), linear, r);
}

void GibbsSampler::update_random_block(ParameterState& s, const StepStreams& st) const {
  const int n = data_.n, g = data_.g, h = data_.h, C = config_.components;
  const Eigen::MatrixXd z = z_matrix(s);
  Eigen::MatrixXd precision = s0_inv_;
  Eigen::VectorXd linear = g > 0 ? Eigen::VectorXd(s0_inv_ * hyper_.s0) : Eigen::VectorXd(0);
  std::vector<Eigen::MatrixXd> a_c(C, Eigen::MatrixXd::Zero(h, h));
  std::vector<Eigen::MatrixXd> k_c(C, Eigen::MatrixXd::Zero(h, g));
  std::vector<Eigen::VectorXd> u_c(C, Eigen::VectorXd::Zero(h));
  std::vector<Eigen::VectorXd> resid(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int c = s.labels[i];
    resid[i] = unit_residual(s, z, i);
    const Eigen::MatrixXd u = marginal_precision(s, i, c);
    const Eigen::MatrixXd ur = u * xr_unit_[i];
    a_c[c].noalias() += xr_unit_[i].transpose() * ur;
    u_c[c].noalias() += ur.transpose() * resid[i];
    if (g > 0) {
      const Eigen::MatrixXd ux = u * xf_unit_[i];
      precision.noalias() += xf_unit_[i].transpose() * ux;
      linear.noalias() += ux.transpose() * resid[i];
      k_c[c].noalias() += ur.transpose() * xf_unit_[i];
    }
  }
  std::vector<Eigen::MatrixXd> v_mu(C);
  const Eigen::VectorXd prior_lin = b0_inv_ * hyper_.b0;
  for (int c = 0; c < C; ++c) v_mu[c] = spd_inverse(b0_inv_ + a_c[c], "V_mu");

  // gamma with mu_{1:C} and beta_{1:n} integrated out.
  if (g > 0) {
    for (int c = 0; c < C; ++c) {
      precision -= k_c[c].transpose() * v_mu[c] * k_c[c];
      linear -= k_c[c].transpose() * (v_mu[c] * (u_c[c] + prior_lin));
    }
    RngStream r = st.get(kGamma);
    s.gamma = sample_mvn_canonical(symmetrize(precision), linear, r);
  }
  // mu_c | gamma with beta integrated out.
  for (int c = 0; c < C; ++c) {
    Eigen::VectorXd lin = u_c[c] + prior_lin;
    if (g > 0) lin -= k_c[c] * s.gamma;
    RngStream r = st.get(kMu, static_cast<std::uint64_t>(c));
    s.mu.row(c) = sample_mvn_canonical(symmetrize(b0_inv_ + a_c[c]), lin, r).transpose();
  }
  // beta_i | gamma, mu.
  std::vector<Eigen::MatrixXd> sigma_inv(C);
  for (int c = 0; c < C; ++c) sigma_inv[c] = spd_inverse(s.Sigma[c], "Sigma_c");
  parallel_for(n, config_.workers, [&](int i) {
    const int c = s.labels[i];
    const Eigen::VectorXd d = s.omega.row(i).transpose();
    const Eigen::MatrixXd dx = d.asDiagonal() * xr_unit_[i];
    Eigen::VectorXd e = resid[i];
    if (g > 0) e -= xf_unit_[i] * s.gamma;
    const Eigen::MatrixXd prec = symmetrize(xr_unit_[i].transpose() * dx + sigma_inv[c]);
    const Eigen::VectorXd lin = dx.transpose() * e + sigma_inv[c] * s.mu.row(c).transpose();
    RngStream r = st.get(kBeta, static_cast<std::uint64_t>(i));
    s.beta.row(i) = sample_mvn_canonical(prec, lin, r).transpose();
  });
}

void GibbsSampler::update_omega(ParameterState& s, const StepStreams& st) const {
  const Eigen::MatrixXd psi = compute_psi(s, data_);
  parallel_for(data_.T, config_.workers, [&](int t) {
    RngStream r = st.get(kOmega, static_cast<std::uint64_t>(t));
    for (int i = 0; i < data_.n; ++i) {
      s.omega(i, t) = sample_pg({data_.y(i, t) + s.r, psi(i, t)}, r);
    }
  });
}

void GibbsSampler::update_theta(ParameterState& s, const StepStreams& st) const {
  if (data_.q == 0) return;
  std::vector<Eigen::VectorXd> zeta(data_.T), precision(data_.T);
  for (int t = 0; t < data_.T; ++t) {
    zeta[t] = assemble_zeta(s, data_, t);
    precision[t] = s.omega.col(t);
  }
  DlmSystem system = system_;
  system.W = s.sigma_theta_sq;
  const FilterCache cache = forward_filter(zeta, data_.xd, precision, system, hyper_.m0, hyper_.C0);
  RngStream r = st.get(kTheta);
  s.theta = backward_sample(cache, system, r);
}

void GibbsSampler::update_sigma_theta(ParameterState& s, const StepStreams& st) const {
  if (data_.q == 0 || data_.T < 2) return;
  RngStream r = st.get(kSigmaTheta);
  s.sigma_theta_sq = sample_sigma_theta(s.theta, system_, hyper_, r);
}

void GibbsSampler::update_phi(ParameterState& s, const StepStreams& st) const {
  if (!config_.spatial_enabled) return;
  const Eigen::MatrixXd z = z_matrix(s);
  parallel_for(data_.T, config_.workers, [&](int t) {
    RngStream r = st.get(kPhi, static_cast<std::uint64_t>(t));
    const Eigen::VectorXd offset = linear_offset(s, data_, t);
    Eigen::VectorXd phi = s.phi.col(t);
    sample_phi_sweep(phi, z.col(t), offset, s.omega.col(t), *weights_, s.tau_sq(t), r);
    s.phi.col(t) = recenter_phi(phi);
  });
}

void GibbsSampler::update_tau(ParameterState& s, const StepStreams& st) const {
  if (!config_.spatial_enabled) return;
  for (int t = 0; t < data_.T; ++t) {
    RngStream r = st.get(kTau, static_cast<std::uint64_t>(t));
    s.tau_sq(t) = 1.0 / sample_tau_sq_inv(s.phi.col(t), *weights_, hyper_, r);
  }
}

void GibbsSampler::update_alpha(ParameterState& s) const {
  for (int t = 0; t < data_.T; ++t) {
    s.alpha(t) = data_.n >= 2 ? spatial_correlation_alpha(s.phi.col(t), s.r) : 0.0;
  }
}

void GibbsSampler::update_component_covariances(ParameterState& s, const StepStreams& st) const {
  const int C = config_.components;
  const Eigen::MatrixXd v0_inv = spd_inverse(hyper_.V0, "V0");
  for (int c = 0; c < C; ++c) {
    Eigen::MatrixXd scatter = v0_inv;
    int count = 0;
    for (int i = 0; i < data_.n; ++i) {
      if (s.labels[i] != c) continue;
      const Eigen::VectorXd d = (s.beta.row(i) - s.mu.row(c)).transpose();
      scatter.noalias() += d * d.transpose();
      ++count;
    }
    RngStream r = st.get(kSigmaC, static_cast<std::uint64_t>(c));
    const Eigen::MatrixXd prec =
        sample_wishart(hyper_.nu0 + count, spd_inverse(scatter, "V_Sigma"), r);
    s.Sigma[c] = spd_inverse(prec, "Sigma_c draw");
  }
}

Eigen::VectorXd GibbsSampler::label_probabilities(const ParameterState& s, int i) const {
  const int C = static_cast<int>(s.eta.size());
  const int T = data_.T;
  Eigen::VectorXd base(T);
  Eigen::VectorXd z(T);
  Eigen::MatrixXd omega_var = Eigen::MatrixXd::Zero(T, T);
  for (int t = 0; t < T; ++t) {
    z(t) = augment_z(data_.y(i, t), s.r, s.omega(i, t));
    double v = s.phi(i, t);
    if (data_.g > 0) v += data_.xf[t].row(i).dot(s.gamma);
    if (data_.q > 0) v += data_.xd[t].row(i).dot(s.theta.row(t));
    base(t) = v;
    omega_var(t, t) = 1.0 / s.omega(i, t);
  }
  Eigen::VectorXd logw(C);
  const Eigen::MatrixXd& x = xr_unit_[i];
  for (int c = 0; c < C; ++c) {
    const Eigen::VectorXd mean = base + x * s.mu.row(c).transpose();
    const Eigen::MatrixXd cov = symmetrize(x * s.Sigma[c] * x.transpose() + omega_var);
    logw(c) = std::log(s.eta(c)) + log_mvn_density(z, mean, cov, "label density");
  }
  const double hi = logw.maxCoeff();
  Eigen::VectorXd p = (logw.array() - hi).exp();
  return p / p.sum();
}

void GibbsSampler::update_labels(ParameterState& s, const StepStreams& st) const {
  std::vector<int> next(s.labels.size());
  parallel_for(data_.n, config_.workers, [&](int i) {
    const Eigen::VectorXd p = label_probabilities(s, i);
    RngStream r = st.get(kLabels, static_cast<std::uint64_t>(i));
    next[i] = sample_categorical_log(p.array().log().matrix(), r);
  });
  s.labels = std::move(next);
}

void GibbsSampler::update_eta(ParameterState& s, const StepStreams& st) const {
  const int C = config_.components;
  Eigen::VectorXd conc = Eigen::VectorXd::Constant(C, hyper_.alpha0);
  for (int label : s.labels) conc(label) += 1.0;
  RngStream r = st.get(kEta);
  s.eta = sample_dirichlet(conc, r);
}

void GibbsSampler::step(ParameterState& state, RngStream& rng) const {
  if (config_.mixture_enabled) {
    step_extended(state, rng);
  } else {
    step_base(state, rng);
  }
}

void GibbsSampler::step_base(ParameterState& s, RngStream& rng) const {
  const StepStreams st{rng.derive(rng.next_u64())};
  labelled("(i) table counts and r", [&] { update_dispersion(s, st); });
  labelled("(iii) gamma", [&] { update_gamma_base(s, st); });
  labelled("(iv) omega", [&] { update_omega(s, st); });
  labelled("(v) theta FFBS", [&] { update_theta(s, st); });
  labelled("(vi) sigma_theta", [&] { update_sigma_theta(s, st); });
  labelled("(vii) phi", [&] { update_phi(s, st); });
  labelled("(viii) tau", [&] { update_tau(s, st); });
  update_alpha(s);
}

void GibbsSampler::step_extended(ParameterState& s, RngStream& rng) const {
  if (!config_.mixture_enabled) throw InvalidParameter("extended step needs the mixture enabled");
  const StepStreams st{rng.derive(rng.next_u64())};
  labelled("(i) table counts and r", [&] { update_dispersion(s, st); });
  labelled("(iii) gamma, mu, beta", [&] { update_random_block(s, st); });
  labelled("(iii) omega", [&] { update_omega(s, st); });
  labelled("(iv) Sigma_c", [&] { update_component_covariances(s, st); });
  labelled("(v) labels", [&] { update_labels(s, st); });
  labelled("(vi) eta", [&] { update_eta(s, st); });
  labelled("(vii) theta FFBS", [&] { update_theta(s, st); });
  labelled("(viii) sigma_theta", [&] { update_sigma_theta(s, st); });
  labelled("(ix) phi", [&] { update_phi(s, st); });
  labelled("(x) tau", [&] { update_tau(s, st); });
  update_alpha(s);
}

ParameterState gibbs_step_base(const ParameterState& state, const PanelDataset& data,
                               const SpatialWeights& weights, const HyperParameters& hyper,
                               RngStream& rng) {
  GibbsConfig config;
  config.iterations = 1;
  config.burn_in = 0;
  const GibbsSampler sampler(data, &weights, hyper, config);
  ParameterState next = state;
  sampler.step_base(next, rng);
  return next;
}

ParameterState gibbs_step_extended(const ParameterState& state, const PanelDataset& data,
                                   const SpatialWeights& weights, const HyperParameters& hyper,
                                   int components, RngStream& rng) {
  GibbsConfig config;
  config.iterations = 1;
  config.burn_in = 0;
  config.mixture_enabled = true;
  config.components = components;
  const GibbsSampler sampler(data, &weights, hyper, config);
  ParameterState next = state;
  sampler.step_extended(next, rng);
  return next;
}

namespace {

class ChainRecorder {
 public:
  ChainRecorder(const PanelDataset& data, const GibbsConfig& config, Eigen::Index rows)
      : data_(data), config_(config), rows_(rows) {
    std::vector<std::string> cols;
    for (int k = 0; k < data.g; ++k) cols.push_back(gamma_name(k));
    add("gamma", cols);
    add("r", {"r"});
    add("h", {"h"});
    cols.clear();
    for (int t = 0; t < data.T; ++t) {
      for (int k = 0; k < data.q; ++k) cols.push_back(theta_name(t, k));
    }
    add("theta", cols);
    cols.clear();
    for (int k = 0; k < data.q; ++k) cols.push_back(sigma_theta_name(k));
    add("sigma_theta_sq", cols);
    cols.clear();
    for (int t = 0; t < data.T; ++t) cols.push_back(tau_name(t));
    add("tau_sq", cols);
    cols.clear();
    for (int t = 0; t < data.T; ++t) cols.push_back(alpha_name(t));
    add("alpha", cols);
    add("deviance", {"deviance"});
    add("phi_sum", {"phi_sum_max"});
    if (config.mixture_enabled) {
      cols.clear();
      for (int c = 0; c < config.components; ++c) {
        for (int k = 0; k < data.h; ++k) cols.push_back(mu_name(c, k));
      }
      add("mu", cols);
      cols.clear();
      for (int c = 0; c < config.components; ++c) cols.push_back(eta_name(c));
      add("eta", cols);
    }
    chain_.phi_mean = Eigen::MatrixXd::Zero(data.n, data.T);
    chain_.psi_mean = Eigen::MatrixXd::Zero(data.n, data.T);
    chain_.label_frequency =
        Eigen::MatrixXd::Zero(data.n, config.mixture_enabled ? config.components : 0);
  }

  void record(const ParameterState& s) {
    const Eigen::MatrixXd psi = compute_psi(s, data_);
    Eigen::Index col = 0;
    auto& tr = chain_.traces;
    std::size_t f = 0;
    for (int k = 0; k < data_.g; ++k) tr[f].draws(row_, k) = s.gamma(k);
    tr[++f].draws(row_, 0) = s.r;
    tr[++f].draws(row_, 0) = s.h;
    ++f;
    col = 0;
    for (int t = 0; t < data_.T; ++t) {
      for (int k = 0; k < data_.q; ++k) tr[f].draws(row_, col++) = s.theta(t, k);
    }
    ++f;
    for (int k = 0; k < data_.q; ++k) tr[f].draws(row_, k) = s.sigma_theta_sq(k);
    ++f;
    for (int t = 0; t < data_.T; ++t) tr[f].draws(row_, t) = s.tau_sq(t);
    ++f;
    for (int t = 0; t < data_.T; ++t) tr[f].draws(row_, t) = s.alpha(t);
    tr[++f].draws(row_, 0) = deviance(data_, psi, s.r);
    double phi_sum = 0.0;
    for (int t = 0; t < data_.T; ++t) phi_sum = std::max(phi_sum, std::abs(s.phi.col(t).sum()));
    tr[++f].draws(row_, 0) = phi_sum;
    if (config_.mixture_enabled) {
      ++f;
      col = 0;
      for (int c = 0; c < config_.components; ++c) {
        for (int k = 0; k < data_.h; ++k) tr[f].draws(row_, col++) = s.mu(c, k);
      }
      ++f;
      for (int c = 0; c < config_.components; ++c) tr[f].draws(row_, c) = s.eta(c);
      for (int i = 0; i < data_.n; ++i) chain_.label_frequency(i, s.labels[i]) += 1.0;
    }
    chain_.phi_mean += s.phi;
    chain_.psi_mean += psi;
    chain_.r_mean += s.r;
    ++row_;
  }

  PosteriorChain finish() {
    const double count = static_cast<double>(std::max<Eigen::Index>(row_, 1));
    chain_.phi_mean /= count;
    chain_.psi_mean /= count;
    chain_.r_mean /= count;
    chain_.label_frequency /= count;
    chain_.plugin_deviance = deviance(data_, chain_.psi_mean, chain_.r_mean);
    return std::move(chain_);
  }

 private:
  void add(std::string name, std::vector<std::string> columns) {
    Trace t;
    t.name = std::move(name);
    t.draws = Eigen::MatrixXd::Zero(rows_, static_cast<Eigen::Index>(columns.size()));
    t.columns = std::move(columns);
    chain_.traces.push_back(std::move(t));
  }

  const PanelDataset& data_;
  const GibbsConfig& config_;
  Eigen::Index rows_;
  Eigen::Index row_ = 0;
  PosteriorChain chain_;
};

}  // namespace

PosteriorChain run_chain(const PanelDataset& data, const SpatialWeights* weights,
                         const HyperParameters& hyper, const GibbsConfig& config,
                         std::optional<ParameterState> initial) {
  const GibbsSampler sampler(data, weights, hyper, config);
  const RngStream master(config.seed, 0);
  ParameterState state;
  if (initial) {
    state = std::move(*initial);
  } else {
    RngStream init = master.derive(0);
    state = sampler.initialize(init);
  }
  const int kept = (config.iterations - config.burn_in) / config.thin;
  ChainRecorder recorder(data, config, kept);
  const int report_every = std::max(1, config.iterations / 10);
  for (int it = 0; it < config.iterations; ++it) {
    RngStream stream = master.derive(static_cast<std::uint64_t>(it) + 1);
    try {
      sampler.step(state, stream);
    } catch (const NumericalFailure& e) {
      throw NumericalFailure("iteration " + std::to_string(it + 1) + ", step " + e.what());
    }
    const int offset = it - config.burn_in;
    if (offset >= 0 && (offset + 1) % config.thin == 0 && offset / config.thin < kept) {
      recorder.record(state);
    }
    if (config.progress && (it + 1) % report_every == 0) {
      std::cerr << "iteration " << (it + 1) << "/" << config.iterations << "  r=" << state.r << '\n';
    }
  }
  PosteriorChain chain = recorder.finish();
  chain.monitors = config.monitors.empty() ? default_monitors(data) : config.monitors;
  return chain;
}

}  // namespace dsnb
