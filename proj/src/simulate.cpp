#include "dsnb/simulate.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "dsnb/distributions.hpp"
#include "dsnb/error.hpp"
#include "dsnb/linalg.hpp"
#include "dsnb/sampler.hpp"

namespace dsnb {

namespace {

Eigen::VectorXd padded(std::initializer_list<double> head, double fill, int size) {
  Eigen::VectorXd v = Eigen::VectorXd::Constant(size, fill);
  int k = 0;
  for (double x : head) {
    if (k >= size) break;
    v(k++) = x;
  }
  return v;
}

void require_size(const Eigen::VectorXd& v, int size, const char* name) {
  if (v.size() != size) {
    throw InvalidParameter(std::string(name) + " has length " + std::to_string(v.size()) +
                           ", expected " + std::to_string(size));
  }
}

}  // namespace

DgpSpec DgpSpec::defaults(int n, int T) {
  DgpSpec spec;
  spec.n = n;
  spec.T = T;
  spec.resolve();
  return spec;
}

void DgpSpec::resolve() {
  if (n < 1 || T < 1 || g < 0 || q < 0 || h < 0) throw InvalidParameter("DGP dimensions invalid");
  if (gamma.size() == 0) gamma = padded({0.2, 0.1, -0.1}, 0.0, g);
  if (theta0.size() == 0) theta0 = padded({0.5}, -0.5, q);
  if (sigma_theta_sq.size() == 0) sigma_theta_sq = Eigen::VectorXd::Constant(q, 0.0025);
  if (tau.size() == 0) tau = Eigen::VectorXd::Constant(T, 0.3);
  if (xf_mean.size() == 0) xf_mean = Eigen::VectorXd::Zero(g);
  if (xf_cov.size() == 0) xf_cov = Eigen::MatrixXd::Identity(g, g);
  if (h > 0) {
    if (eta.size() == 0) eta = Eigen::VectorXd::Ones(1);
    const int C = static_cast<int>(eta.size());
    if (mu.size() == 0) mu = Eigen::MatrixXd::Zero(C, h);
    if (Sigma.empty()) Sigma.assign(static_cast<std::size_t>(C), 0.01 * Eigen::MatrixXd::Identity(h, h));
    if (xr_mean.size() == 0) xr_mean = Eigen::VectorXd::Zero(h);
    if (xr_cov.size() == 0) xr_cov = Eigen::MatrixXd::Identity(h, h);
  }
  validate();
}

void DgpSpec::validate() const {
  if (n < 1 || T < 1) throw InvalidParameter("DGP needs n >= 1 and T >= 1");
  require_size(gamma, g, "gamma");
  require_size(theta0, q, "theta0");
  require_size(sigma_theta_sq, q, "sigma_theta_sq");
  require_size(tau, T, "tau");
  require_size(xf_mean, g, "xf_mean");
  if (xf_cov.rows() != g || xf_cov.cols() != g) throw InvalidParameter("xf_cov shape");
  if (!(r > 0.0)) throw InvalidParameter("r must be positive");
  if ((sigma_theta_sq.array() <= 0.0).any()) throw InvalidParameter("sigma_theta_sq must be positive");
  if ((tau.array() <= 0.0).any()) throw InvalidParameter("tau must be positive");
  if (!(sinusoid_noise_sd >= 0.0)) throw InvalidParameter("sinusoid noise sd must be >= 0");
  if (spatial && n > 1 && n <= 2 * chain_order) {
    throw InvalidParameter("n must exceed twice the chain order");
  }
  if (h > 0) {
    const int C = components();
    if (C < 1) throw InvalidParameter("mixture needs at least one component");
    if (mu.rows() != C || mu.cols() != h) throw InvalidParameter("mu shape");
    if (static_cast<int>(Sigma.size()) != C) throw InvalidParameter("Sigma count");
    for (const auto& s : Sigma) {
      if (s.rows() != h || s.cols() != h) throw InvalidParameter("Sigma shape");
    }
    if ((eta.array() < 0.0).any() || std::abs(eta.sum() - 1.0) > 1e-9) {
      throw InvalidParameter("eta must be a probability vector");
    }
    require_size(xr_mean, h, "xr_mean");
  }
}

std::map<std::string, double> TruthRecord::scalars() const {
  std::map<std::string, double> out;
  for (Eigen::Index k = 0; k < gamma.size(); ++k) out[gamma_name(static_cast<int>(k))] = gamma(k);
  out["r"] = r;
  for (Eigen::Index t = 0; t < theta.rows(); ++t) {
    for (Eigen::Index k = 0; k < theta.cols(); ++k) {
      out[theta_name(static_cast<int>(t), static_cast<int>(k))] = theta(t, k);
    }
  }
  for (Eigen::Index k = 0; k < sigma_theta_sq.size(); ++k) {
    out[sigma_theta_name(static_cast<int>(k))] = sigma_theta_sq(k);
  }
  for (Eigen::Index t = 0; t < tau_sq.size(); ++t) out[tau_name(static_cast<int>(t))] = tau_sq(t);
  for (Eigen::Index t = 0; t < alpha.size(); ++t) out[alpha_name(static_cast<int>(t))] = alpha(t);
  for (Eigen::Index c = 0; c < mu.rows(); ++c) {
    for (Eigen::Index k = 0; k < mu.cols(); ++k) {
      out[mu_name(static_cast<int>(c), static_cast<int>(k))] = mu(c, k);
    }
  }
  for (Eigen::Index c = 0; c < eta.size(); ++c) out[eta_name(static_cast<int>(c))] = eta(c);
  return out;
}

IcarGenerator::IcarGenerator(const SpatialWeights& weights) {
  const int n = weights.size();
  if (n < 2) throw InvalidParameter("ICAR draw needs at least two units");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(weights.laplacian());
  if (eig.info() != Eigen::Success) throw NumericalFailure("Laplacian eigendecomposition failed");
  const Eigen::VectorXd& values = eig.eigenvalues();
  const double tol = 1e-9 * std::max(1.0, values.cwiseAbs().maxCoeff());
  int zeros = 0;
  for (Eigen::Index k = 0; k < values.size(); ++k) {
    if (values(k) <= tol) ++zeros;
  }
  if (zeros != 1) {
    throw InvalidParameter("weight graph has " + std::to_string(zeros) +
                           " connected components; ICAR draw needs a connected graph");
  }
  // Eigenvalues are ascending, so the null direction is column 0.
  basis_ = eig.eigenvectors().rightCols(n - 1);
  scale_ = values.tail(n - 1).cwiseSqrt().cwiseInverse();
}

Eigen::VectorXd IcarGenerator::draw(double tau, RngStream& rng) const {
  if (!(tau > 0.0)) throw InvalidParameter("tau must be positive");
  const Eigen::VectorXd z = sample_standard_normal(scale_.size(), rng);
  const Eigen::VectorXd phi = tau * (basis_ * scale_.cwiseProduct(z));
  return recenter_phi(phi);
}

Eigen::MatrixXd IcarGenerator::covariance(double tau) const {
  return tau * tau * basis_ * scale_.cwiseAbs2().asDiagonal() * basis_.transpose();
}

Eigen::VectorXd icar_joint_draw(const SpatialWeights& weights, double tau, RngStream& rng) {
  return IcarGenerator(weights).draw(tau, rng);
}

SimulatedData generate(DgpSpec spec, RngStream& rng) {
  spec.resolve();
  const int n = spec.n, T = spec.T, g = spec.g, q = spec.q, h = spec.h;
  SimulatedData out;
  PanelDataset& data = out.data;
  TruthRecord& truth = out.truth;
  data.n = n;
  data.T = T;
  data.g = g;
  data.q = q;
  data.h = h;

  RngStream cov_rng = rng.derive(1);
  data.xf.assign(T, Eigen::MatrixXd(n, g));
  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < n; ++i) {
      if (g > 0) data.xf[t].row(i) = sample_mvn(spec.xf_mean, spec.xf_cov, cov_rng).transpose();
    }
  }
  const double period = spec.sinusoid_period > 0.0 ? spec.sinusoid_period : static_cast<double>(T);
  Eigen::MatrixXd phase(n, q);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < q; ++k) phase(i, k) = 2.0 * std::numbers::pi * cov_rng.uniform();
  }
  data.xd.assign(T, Eigen::MatrixXd(n, q));
  for (int t = 0; t < T; ++t) {
    const double angle = 2.0 * std::numbers::pi * (t + 1) / period;
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < q; ++k) {
        data.xd[t](i, k) = spec.sinusoid_amplitude * std::sin(angle + phase(i, k)) +
                           spec.sinusoid_noise_sd * cov_rng.normal();
      }
    }
  }
  if (h > 0) {
    data.xr.assign(T, Eigen::MatrixXd(n, h));
    for (int t = 0; t < T; ++t) {
      for (int i = 0; i < n; ++i) {
        data.xr[t].row(i) = sample_mvn(spec.xr_mean, spec.xr_cov, cov_rng).transpose();
      }
    }
  }

  // Dynamic coefficients rolled forward from theta0.
  RngStream theta_rng = rng.derive(2);
  truth.theta0 = spec.theta0;
  truth.theta.resize(T, q);
  Eigen::VectorXd prev = spec.theta0;
  for (int t = 0; t < T; ++t) {
    for (int k = 0; k < q; ++k) {
      truth.theta(t, k) = spec.rho * prev(k) + std::sqrt(spec.sigma_theta_sq(k)) * theta_rng.normal();
    }
    prev = truth.theta.row(t).transpose();
  }

  // Spatial effects.
  if (spec.spatial && n > 1) {
    out.weights = build_chain_weights(n, spec.chain_order);
  }
  truth.phi = Eigen::MatrixXd::Zero(n, T);
  if (spec.spatial && n > 1) {
    const IcarGenerator icar(out.weights);
    for (int t = 0; t < T; ++t) {
      RngStream phi_rng = rng.derive(3).derive(static_cast<std::uint64_t>(t));
      truth.phi.col(t) = icar.draw(spec.tau(t), phi_rng);
    }
  }

  // Mixture random coefficients.
  truth.beta = Eigen::MatrixXd::Zero(n, h);
  if (h > 0) {
    RngStream mix_rng = rng.derive(4);
    const Eigen::VectorXd log_eta = spec.eta.array().log().matrix();
    truth.labels.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const int c = sample_categorical_log(log_eta, mix_rng);
      truth.labels[i] = c;
      truth.beta.row(i) = sample_mvn(spec.mu.row(c).transpose(), spec.Sigma[c], mix_rng).transpose();
    }
    truth.mu = spec.mu;
    truth.eta = spec.eta;
  }

  truth.gamma = spec.gamma;
  truth.r = spec.r;
  truth.sigma_theta_sq = spec.sigma_theta_sq;
  truth.tau_sq = spec.tau.cwiseAbs2();
  truth.alpha = Eigen::VectorXd::Zero(T);
  if (spec.spatial && n > 1) {
    for (int t = 0; t < T; ++t) truth.alpha(t) = spatial_correlation_alpha(truth.phi.col(t), spec.r);
  }

  // Counts: y ~ NB(r, p) through its Gamma-Poisson mixture, with Gamma scale
  // p / (1 - p) = exp(psi).
  ParameterState state;
  state.gamma = truth.gamma;
  state.theta = truth.theta;
  state.phi = truth.phi;
  state.beta = truth.beta;
  RngStream y_rng = rng.derive(5);
  data.y.resize(n, T);
  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < n; ++i) {
      const double psi = link_psi(state, data, i, t);
      const double lambda = sample_gamma_rate(spec.r, std::exp(-psi), y_rng);
      std::poisson_distribution<int> poisson(lambda);
      data.y(i, t) = poisson(y_rng.engine());
    }
  }
  data.validate();
  return out;
}

}  // namespace dsnb
