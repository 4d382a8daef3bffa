#include "dsnb/dlm.hpp"

#include <string>

#include "dsnb/distributions.hpp"
#include "dsnb/error.hpp"
#include "dsnb/linalg.hpp"

namespace dsnb {

PredictivePrecision::PredictivePrecision(const Eigen::MatrixXd& F,
                                         const Eigen::VectorXd& obs_precision,
                                         const Eigen::MatrixXd& R)
    : F_(F), d_(obs_precision), R_(R) {
  if (F.rows() != obs_precision.size() || F.cols() != R.rows() || R.rows() != R.cols()) {
    throw InvalidParameter("predictive precision: inconsistent dimensions");
  }
  if ((obs_precision.array() <= 0.0).any()) {
    throw InvalidParameter("observation precisions must be positive");
  }
  a_.noalias() = F_.transpose() * d_.asDiagonal() * F_;
  const Eigen::Index q = R.rows();
  lu_.compute(Eigen::MatrixXd::Identity(q, q) + a_ * R_);
  if (q > 0 && !(lu_.rcond() > 1e-14)) {
    throw NumericalFailure("I_q + F'Omega^{-1}FR is singular");
  }
}

Eigen::VectorXd PredictivePrecision::apply(const Eigen::VectorXd& v) const {
  const Eigen::VectorXd dv = d_.cwiseProduct(v);
  const Eigen::VectorXd inner = lu_.solve(F_.transpose() * dv);
  return dv - d_.cwiseProduct(F_ * (R_ * inner));
}

Eigen::VectorXd PredictivePrecision::ft_apply(const Eigen::VectorXd& v) const {
  // F'Q^{-1} = (I + A R)^{-1} F' D
  return lu_.solve(F_.transpose() * d_.cwiseProduct(v));
}

Eigen::MatrixXd PredictivePrecision::ft_qinv_f() const { return lu_.solve(a_); }

Eigen::MatrixXd PredictivePrecision::dense() const {
  const Eigen::Index n = d_.size();
  Eigen::MatrixXd out(n, n);
  for (Eigen::Index j = 0; j < n; ++j) out.col(j) = apply(Eigen::VectorXd::Unit(n, j));
  return out;
}

FilterCache forward_filter(const std::vector<Eigen::VectorXd>& zeta,
                           const std::vector<Eigen::MatrixXd>& F,
                           const std::vector<Eigen::VectorXd>& obs_precision,
                           const DlmSystem& system, const Eigen::VectorXd& m0,
                           const Eigen::MatrixXd& C0) {
  system.validate();
  const std::size_t T = zeta.size();
  const Eigen::Index q = system.G.rows();
  if (F.size() != T || obs_precision.size() != T) {
    throw InvalidParameter("forward_filter: per-period inputs must all have length T");
  }
  if (m0.size() != q || C0.rows() != q || C0.cols() != q) {
    throw InvalidParameter("forward_filter: initial moments do not match state dimension");
  }
  FilterCache cache;
  cache.steps.reserve(T);
  cache.predictive.reserve(T);
  Eigen::VectorXd m = m0;
  Eigen::MatrixXd C = C0;
  const Eigen::MatrixXd W = system.W.asDiagonal();
  for (std::size_t t = 0; t < T; ++t) {
    if (F[t].cols() != q || F[t].rows() != zeta[t].size() ||
        obs_precision[t].size() != zeta[t].size()) {
      throw InvalidParameter("forward_filter: period " + std::to_string(t + 1) +
                             " has inconsistent dimensions");
    }
    FilterStep step;
    step.a = system.G * m;
    step.R = symmetrize(system.G * C * system.G.transpose() + W);
    step.f = F[t] * step.a;
    try {
      cache.predictive.emplace_back(F[t], obs_precision[t], step.R);
    } catch (const NumericalFailure& e) {
      throw NumericalFailure(std::string("forward_filter at period ") + std::to_string(t + 1) +
                             ": " + e.what());
    }
    const auto& qinv = cache.predictive.back();
    step.m = step.a + step.R * qinv.ft_apply(zeta[t] - step.f);
    step.C = symmetrize(step.R - step.R * qinv.ft_qinv_f() * step.R);
    m = step.m;
    C = step.C;
    cache.steps.push_back(std::move(step));
  }
  return cache;
}

Eigen::MatrixXd backward_sample(const FilterCache& cache, const DlmSystem& system, RngStream& rng) {
  const Eigen::Index T = static_cast<Eigen::Index>(cache.size());
  const Eigen::Index q = system.G.rows();
  Eigen::MatrixXd theta(T, q);
  if (T == 0 || q == 0) return theta;
  const auto& last = cache.steps.back();
  theta.row(T - 1) = sample_mvn(last.m, last.C, rng).transpose();
  for (Eigen::Index t = T - 2; t >= 0; --t) {
    const auto& cur = cache.steps[t];
    const auto& next = cache.steps[t + 1];
    const auto llt = robust_llt(next.R, "backward_sample R_{t+1} at period " + std::to_string(t + 2));
    // J' = R^{-1} G C
    const Eigen::MatrixXd gc = system.G * cur.C;
    const Eigen::MatrixXd jt = llt.solve(gc);
    const Eigen::VectorXd mean =
        cur.m + jt.transpose() * (theta.row(t + 1).transpose() - next.a);
    const Eigen::MatrixXd cov = symmetrize(cur.C - jt.transpose() * gc);
    theta.row(t) = sample_mvn(mean, cov, rng).transpose();
  }
  return theta;
}

GammaPosterior sigma_theta_posterior(const Eigen::MatrixXd& theta, const DlmSystem& system,
                                     const HyperParameters& hyper) {
  const Eigen::Index T = theta.rows();
  const Eigen::Index q = theta.cols();
  if (T < 2) throw InvalidParameter("sigma_theta update needs T >= 2");
  if (system.G.rows() != q) throw InvalidParameter("system dimension does not match theta");
  GammaPosterior post;
  post.shape = hyper.a_sigma + 0.5 * static_cast<double>(T - 1);
  post.rate = Eigen::VectorXd::Constant(q, hyper.b_sigma);
  for (Eigen::Index k = 0; k < q; ++k) {
    const double gk = system.G(k, k);
    double ss = 0.0;
    for (Eigen::Index t = 1; t < T; ++t) {
      const double d = theta(t, k) - gk * theta(t - 1, k);
      ss += d * d;
    }
    post.rate(k) += 0.5 * ss;
  }
  return post;
}

Eigen::VectorXd sample_sigma_theta(const Eigen::MatrixXd& theta, const DlmSystem& system,
                                   const HyperParameters& hyper, RngStream& rng) {
  const GammaPosterior post = sigma_theta_posterior(theta, system, hyper);
  Eigen::VectorXd out(post.rate.size());
  for (Eigen::Index k = 0; k < out.size(); ++k) {
    out(k) = 1.0 / sample_gamma_rate(post.shape, post.rate(k), rng);
  }
  return out;
}

Eigen::VectorXd assemble_zeta(const ParameterState& state, const PanelDataset& data, int t) {
  Eigen::VectorXd zeta(data.n);
  for (int i = 0; i < data.n; ++i) {
    zeta(i) = augment_z(data.y(i, t), state.r, state.omega(i, t)) - state.phi(i, t);
  }
  if (data.g > 0) zeta.noalias() -= data.xf[t] * state.gamma;
  if (data.h > 0) zeta -= data.xr[t].cwiseProduct(state.beta).rowwise().sum();
  return zeta;
}

}  // namespace dsnb
