#include "dsnb/model.hpp"

#include <cmath>
#include <string>

#include "dsnb/error.hpp"

namespace dsnb {

namespace {

bool is_spd(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) return false;
  if (m.size() == 0) return true;
  if (!m.isApprox(m.transpose(), 1e-10)) return false;
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  return llt.info() == Eigen::Success;
}

void require_spd(const Eigen::MatrixXd& m, int dim, const char* name) {
  if (m.rows() != dim || m.cols() != dim) {
    throw InvalidParameter(std::string(name) + " must be " + std::to_string(dim) + " x " +
                           std::to_string(dim));
  }
  if (!is_spd(m)) throw InvalidParameter(std::string(name) + " must be symmetric positive definite");
}

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw InvalidParameter(std::string(name) + " must be positive");
  }
}

}  // namespace

int PanelDataset::max_count() const { return y.size() == 0 ? 0 : y.maxCoeff(); }

void PanelDataset::validate() {
  if (n < 1 || T < 1) throw DataError("panel needs at least one unit and one period");
  if (g < 0 || q < 0 || h < 0) throw DataError("negative covariate count");
  if (y.rows() != n || y.cols() != T) throw DataError("count matrix must be n x T");
  if ((y.array() < 0).any()) throw DataError("counts must be non-negative");
  auto check_blocks = [&](const std::vector<Eigen::MatrixXd>& blocks, int width, const char* name) {
    if (width == 0 && blocks.empty()) return;
    if (static_cast<int>(blocks.size()) != T) {
      throw DataError(std::string(name) + " must have one block per period");
    }
    for (int t = 0; t < T; ++t) {
      if (blocks[t].rows() != n || blocks[t].cols() != width) {
        throw DataError(std::string(name) + " block has wrong shape at period " + std::to_string(t));
      }
      if (!blocks[t].allFinite()) {
        throw DataError(std::string(name) + " has non-finite covariate at period " + std::to_string(t));
      }
    }
  };
  if (xf.empty()) xf.assign(T, Eigen::MatrixXd(n, 0));
  if (xd.empty()) xd.assign(T, Eigen::MatrixXd(n, 0));
  check_blocks(xf, g, "X^F");
  check_blocks(xd, q, "X^D");
  if (h > 0) check_blocks(xr, h, "X^R");
  if (unit_ids.empty()) {
    for (int i = 0; i < n; ++i) unit_ids.push_back(std::to_string(i));
  }
  if (period_labels.empty()) {
    for (int t = 0; t < T; ++t) period_labels.push_back(std::to_string(t + 1));
  }
  auto fill_names = [](std::vector<std::string>& names, int width, const char* stem) {
    if (names.empty()) {
      for (int k = 0; k < width; ++k) names.push_back(std::string(stem) + std::to_string(k + 1));
    }
  };
  fill_names(f_names, g, "x");
  fill_names(d_names, q, "x");
  fill_names(r_names, h, "x");
  if (static_cast<int>(unit_ids.size()) != n || static_cast<int>(period_labels.size()) != T ||
      static_cast<int>(f_names.size()) != g || static_cast<int>(d_names.size()) != q ||
      static_cast<int>(r_names.size()) != h) {
    throw DataError("label vectors do not match panel dimensions");
  }
}

HyperParameters HyperParameters::defaults(int g, int q, int h, int components) {
  HyperParameters hp;
  hp.s0 = Eigen::VectorXd::Zero(g);
  hp.S0 = 100.0 * Eigen::MatrixXd::Identity(g, g);
  hp.m0 = Eigen::VectorXd::Zero(q);
  hp.C0 = 100.0 * Eigen::MatrixXd::Identity(q, q);
  hp.b0 = Eigen::VectorXd::Zero(h);
  hp.B0 = 100.0 * Eigen::MatrixXd::Identity(h, h);
  hp.nu0 = h + 2.0;
  hp.V0 = Eigen::MatrixXd::Identity(h, h);
  hp.components = components;
  return hp;
}

void HyperParameters::validate(int g, int q, int h) const {
  require_positive(r0, "r0");
  require_positive(e0, "e0");
  require_positive(f0, "f0");
  require_positive(c0, "c0");
  require_positive(d0, "d0");
  require_positive(a_sigma, "a_sigma");
  require_positive(b_sigma, "b_sigma");
  if (!std::isfinite(rho)) throw InvalidParameter("rho must be finite");
  if (s0.size() != g) throw InvalidParameter("s0 must have length g");
  require_spd(S0, g, "S0");
  if (m0.size() != q) throw InvalidParameter("m0 must have length q");
  require_spd(C0, q, "C0");
  if (h > 0) {
    if (components < 1) throw InvalidParameter("mixture needs at least one component");
    if (b0.size() != h) throw InvalidParameter("b0 must have length h");
    require_spd(B0, h, "B0");
    require_spd(V0, h, "V0");
    if (!(nu0 > h - 1.0)) throw InvalidParameter("nu0 must exceed h - 1");
    require_positive(alpha0, "alpha0");
  }
}

DlmSystem DlmSystem::diagonal(int q, double rho, const Eigen::VectorXd& w) {
  DlmSystem s;
  s.G = rho * Eigen::MatrixXd::Identity(q, q);
  s.W = w;
  return s;
}

void DlmSystem::validate() const {
  if (G.rows() != G.cols() || G.rows() != W.size()) {
    throw InvalidParameter("system matrix and state noise dimensions differ");
  }
  for (Eigen::Index k = 0; k < W.size(); ++k) {
    if (!(W(k) >= 0.0) || !std::isfinite(W(k))) {
      throw InvalidParameter("state-noise variances must be non-negative");
    }
  }
}

double link_psi(const ParameterState& state, const PanelDataset& data, int i, int t) {
  double psi = 0.0;
  if (data.g > 0) psi += data.xf[t].row(i).dot(state.gamma);
  if (data.h > 0) psi += data.xr[t].row(i).dot(state.beta.row(i));
  if (data.q > 0) psi += data.xd[t].row(i).dot(state.theta.row(t));
  return psi + state.phi(i, t);
}

Eigen::VectorXd linear_offset(const ParameterState& state, const PanelDataset& data, int t) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(data.n);
  if (data.g > 0) out.noalias() += data.xf[t] * state.gamma;
  if (data.q > 0) out.noalias() += data.xd[t] * state.theta.row(t).transpose();
  if (data.h > 0) out += data.xr[t].cwiseProduct(state.beta).rowwise().sum();
  return out;
}

Eigen::MatrixXd compute_psi(const ParameterState& state, const PanelDataset& data) {
  Eigen::MatrixXd psi(data.n, data.T);
  for (int t = 0; t < data.T; ++t) psi.col(t) = linear_offset(state, data, t) + state.phi.col(t);
  return psi;
}

double nb_prob(double psi) {
  if (!std::isfinite(psi)) throw InvalidParameter("psi must be finite");
  return 1.0 / (1.0 + std::exp(-psi));
}

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double augment_z(int y, double r, double omega) {
  if (!(omega > 0.0)) throw InvalidParameter("omega must be positive");
  return (static_cast<double>(y) - r) / (2.0 * omega);
}

double nb_log_pmf(int y, double r, double p) {
  if (y < 0) throw InvalidParameter("count must be non-negative");
  if (!(r > 0.0)) throw InvalidParameter("r must be positive");
  if (!(p > 0.0 && p < 1.0)) throw InvalidParameter("p must lie in (0, 1)");
  const double yd = static_cast<double>(y);
  const double lp = (y == 0) ? 0.0 : yd * std::log(p);
  return std::lgamma(yd + r) - std::lgamma(r) - std::lgamma(yd + 1.0) + lp + r * std::log1p(-p);
}

double nb_log_pmf_logit(int y, double r, double psi) {
  if (y < 0) throw InvalidParameter("count must be non-negative");
  if (!(r > 0.0)) throw InvalidParameter("r must be positive");
  const double yd = static_cast<double>(y);
  return std::lgamma(yd + r) - std::lgamma(r) - std::lgamma(yd + 1.0) - yd * softplus(-psi) -
         r * softplus(psi);
}

double deviance(const PanelDataset& data, const Eigen::MatrixXd& psi, double r) {
  double ll = 0.0;
  for (int t = 0; t < data.T; ++t) {
    for (int i = 0; i < data.n; ++i) ll += nb_log_pmf_logit(data.y(i, t), r, psi(i, t));
  }
  return -2.0 * ll;
}

}  // namespace dsnb
