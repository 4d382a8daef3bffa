#include "dsnb/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "dsnb/error.hpp"
#include "dsnb/linalg.hpp"

namespace dsnb {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream_id) {
  const std::uint64_t a = splitmix64(seed);
  const std::uint64_t b = splitmix64(a ^ splitmix64(stream_id + 0x632be59bd9b4e019ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

constexpr double kPi = std::numbers::pi;
constexpr double kTrunc = 0.64;  // switch point of the Devroye envelope

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Coefficient a_n(x) of the alternating series for the Jacobi density.
double series_coef(int n, double x) {
  const double k = n + 0.5;
  if (x > kTrunc) {
    return kPi * k * std::exp(-k * k * kPi * kPi * x / 2.0);
  }
  return std::pow(2.0 / kPi / x, 1.5) * kPi * k * std::exp(-2.0 * k * k / x);
}

// Probability of proposing from the exponential tail piece.
double mass_texpon(double z) {
  const double t = kTrunc;
  const double fz = kPi * kPi / 8.0 + z * z / 2.0;
  const double b = std::sqrt(1.0 / t) * (t * z - 1.0);
  const double a = -std::sqrt(1.0 / t) * (t * z + 1.0);
  const double x0 = std::log(fz) + fz * t;
  const double xb = x0 - z + std::log(normal_cdf(b));
  const double xa = x0 + z + std::log(normal_cdf(a));
  const double qdivp = 4.0 / kPi * (std::exp(xb) + std::exp(xa));
  return 1.0 / (1.0 + qdivp);
}

// Inverse Gaussian(1/z, 1) truncated to (0, kTrunc).
double truncated_inverse_gaussian(double z, RngStream& rng) {
  z = std::abs(z);
  const double mu = 1.0 / z;
  double x = kTrunc + 1.0;
  if (mu > kTrunc) {
    double alpha = 0.0;
    while (rng.uniform() > alpha) {
      double e1 = rng.exponential();
      double e2 = rng.exponential();
      while (e1 * e1 > 2.0 * e2 / kTrunc) {
        e1 = rng.exponential();
        e2 = rng.exponential();
      }
      x = kTrunc / ((1.0 + kTrunc * e1) * (1.0 + kTrunc * e1));
      alpha = std::exp(-0.5 * z * z * x);
    }
  } else {
    while (x > kTrunc) {
      const double n = rng.normal();
      const double y = n * n;
      x = mu + 0.5 * mu * mu * y - 0.5 * mu * std::sqrt(4.0 * mu * y + (mu * y) * (mu * y));
      if (rng.uniform() > mu / (mu + x)) x = mu * mu / x;
    }
  }
  return x;
}

void check_pg(PgParams p) {
  if (!(p.b > 0.0) || !std::isfinite(p.b)) {
    throw InvalidParameter("PG shape b must be positive, got " + std::to_string(p.b));
  }
  if (!std::isfinite(p.c)) throw InvalidParameter("PG tilt c must be finite");
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), engine_(make_engine(seed, stream_id)) {}

RngStream RngStream::derive(std::uint64_t key) const {
  return RngStream(seed_, splitmix64(stream_id_ * 0x9e3779b97f4a7c15ULL ^ splitmix64(key)));
}

double RngStream::uniform() {
  double u;
  do {
    u = std::generate_canonical<double, 53>(engine_);
  } while (u <= 0.0 || u >= 1.0);
  return u;
}

double RngStream::normal() {
  // Marsaglia polar method without caching so every call is self-contained.
  double s, v1, v2;
  do {
    v1 = 2.0 * uniform() - 1.0;
    v2 = 2.0 * uniform() - 1.0;
    s = v1 * v1 + v2 * v2;
  } while (s >= 1.0 || s == 0.0);
  return v1 * std::sqrt(-2.0 * std::log(s) / s);
}

double RngStream::exponential() { return -std::log(uniform()); }

double sample_pg1(double c, RngStream& rng) {
  check_pg({1.0, c});
  const double z = 0.5 * std::abs(c);
  const double fz = kPi * kPi / 8.0 + z * z / 2.0;
  const double p_exp = mass_texpon(z);
  for (;;) {
    double x;
    if (rng.uniform() < p_exp) {
      x = kTrunc + rng.exponential() / fz;
    } else {
      x = truncated_inverse_gaussian(z, rng);
    }
    double s = series_coef(0, x);
    const double y = rng.uniform() * s;
    for (int n = 1;; ++n) {
      if (n % 2 == 1) {
        s -= series_coef(n, x);
        if (y <= s) return 0.25 * x;
      } else {
        s += series_coef(n, x);
        if (y > s) break;
      }
    }
  }
}

double sample_pg_series(double b, double c, RngStream& rng, int terms) {
  check_pg({b, c});
  if (terms < 1) throw InvalidParameter("PG series needs at least one term");
  const double c2 = c * c / (4.0 * kPi * kPi);
  std::gamma_distribution<double> gamma(b, 1.0);
  double sum = 0.0;
  for (int k = 1; k <= terms; ++k) {
    const double d = (k - 0.5) * (k - 0.5) + c2;
    sum += gamma(rng.engine()) / d;
  }
  // Tail mean: total mean minus the mean of the retained terms.
  double head_mean = 0.0;
  for (int k = 1; k <= terms; ++k) head_mean += 1.0 / ((k - 0.5) * (k - 0.5) + c2);
  const double tail = std::max(0.0, pg_mean(b, c) - b * head_mean / (2.0 * kPi * kPi));
  return sum / (2.0 * kPi * kPi) + tail;
}

double sample_pg(PgParams params, RngStream& rng) {
  check_pg(params);
  const double whole = std::floor(params.b);
  const double frac = params.b - whole;
  double x = 0.0;
  for (int i = 0; i < static_cast<int>(whole); ++i) x += sample_pg1(params.c, rng);
  if (frac > 1e-12) x += sample_pg_series(frac, params.c, rng);
  return x;
}

double pg_mean(double b, double c) {
  const double a = std::abs(c);
  if (a < 1e-6) return b * (0.25 - a * a / 48.0);
  return b / (2.0 * a) * std::tanh(a / 2.0);
}

TableCountLogF::TableCountLogF(int max_y) : max_y_(max_y) {
  if (max_y < 0) throw InvalidParameter("table size must be non-negative");
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  log_f_.assign(offset(max_y + 1), kNegInf);
  log_f_[offset(0)] = 0.0;  // F(0, 0) = 1
  for (int m = 1; m <= max_y; ++m) {
    const double keep = std::log(static_cast<double>(m - 1) / m);
    const double add = -std::log(static_cast<double>(m));
    for (int j = 1; j <= m; ++j) {
      const double a = (j <= m - 1) ? keep + log_f_[offset(m - 1) + j] : kNegInf;
      const double b = log_f_[offset(m - 1) + j - 1] + add;
      const double hi = std::max(a, b);
      log_f_[offset(m) + j] =
          (hi == kNegInf) ? kNegInf : hi + std::log1p(std::exp(std::min(a, b) - hi));
    }
  }
}

double TableCountLogF::log_f(int m, int j) const {
  if (m < 0 || m > max_y_ || j < 0 || j > m) {
    return -std::numeric_limits<double>::infinity();
  }
  return log_f_[offset(m) + j];
}

int sample_table_count(int y, double r, const TableCountLogF& table, RngStream& rng) {
  if (y < 0) throw InvalidParameter("table count needs y >= 0");
  if (!(r > 0.0) || !std::isfinite(r)) throw InvalidParameter("table count needs r > 0");
  if (y > table.max_y()) {
    throw InvalidParameter("count " + std::to_string(y) + " exceeds table size " +
                           std::to_string(table.max_y()));
  }
  if (y == 0) return 0;
  if (y == 1) return 1;
  const double log_r = std::log(r);
  std::vector<double> w(static_cast<std::size_t>(y));
  double hi = -std::numeric_limits<double>::infinity();
  for (int j = 1; j <= y; ++j) {
    w[j - 1] = table.log_f(y, j) + j * log_r;
    hi = std::max(hi, w[j - 1]);
  }
  double total = 0.0;
  for (double& v : w) {
    v = std::exp(v - hi);
    total += v;
  }
  double u = rng.uniform() * total;
  for (int j = 1; j <= y; ++j) {
    u -= w[j - 1];
    if (u <= 0.0) return j;
  }
  return y;
}

int sample_table_count(int y, double r, RngStream& rng) {
  if (y < 0) throw InvalidParameter("table count needs y >= 0");
  if (!(r > 0.0) || !std::isfinite(r)) throw InvalidParameter("table count needs r > 0");
  return sample_table_count(y, r, TableCountLogF(y), rng);
}

double sample_gamma_rate(double shape, double rate, RngStream& rng) {
  if (!(shape > 0.0) || !std::isfinite(shape) || !(rate > 0.0) || !std::isfinite(rate)) {
    throw InvalidParameter("Gamma needs shape > 0 and rate > 0, got shape=" +
                           std::to_string(shape) + " rate=" + std::to_string(rate));
  }
  std::gamma_distribution<double> gamma(shape, 1.0 / rate);
  double x = gamma(rng.engine());
  // Tiny shapes can underflow to zero; keep the draw strictly positive.
  return std::max(x, std::numeric_limits<double>::min());
}

Eigen::VectorXd sample_standard_normal(Eigen::Index dim, RngStream& rng) {
  Eigen::VectorXd z(dim);
  for (Eigen::Index i = 0; i < dim; ++i) z(i) = rng.normal();
  return z;
}

Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& covariance,
                           RngStream& rng) {
  if (covariance.rows() != mean.size() || covariance.cols() != mean.size()) {
    throw InvalidParameter("MVN covariance dimension does not match mean");
  }
  const auto llt = robust_llt(covariance, "sample_mvn");
  return mean + llt.matrixL() * sample_standard_normal(mean.size(), rng);
}

Eigen::VectorXd sample_mvn_canonical(const Eigen::MatrixXd& precision,
                                     const Eigen::VectorXd& linear, RngStream& rng,
                                     Eigen::VectorXd* mean) {
  if (precision.rows() != linear.size() || precision.cols() != linear.size()) {
    throw InvalidParameter("precision dimension does not match linear term");
  }
  const auto llt = robust_llt(precision, "sample_mvn_canonical");
  Eigen::VectorXd mu = llt.solve(linear);
  // x = mu + L^{-T} z has covariance P^{-1} when P = L L'.
  Eigen::VectorXd x =
      mu + llt.matrixU().solve(sample_standard_normal(linear.size(), rng));
  if (mean != nullptr) *mean = std::move(mu);
  return x;
}

Eigen::MatrixXd sample_wishart(double dof, const Eigen::MatrixXd& scale, RngStream& rng) {
  const Eigen::Index p = scale.rows();
  if (scale.cols() != p || p == 0) throw InvalidParameter("Wishart scale must be square");
  if (!(dof > static_cast<double>(p) - 1.0) || !std::isfinite(dof)) {
    throw InvalidParameter("Wishart dof must exceed dim - 1");
  }
  const auto llt = robust_llt(scale, "sample_wishart");
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    a(i, i) = std::sqrt(sample_gamma_rate(0.5 * (dof - static_cast<double>(i)), 0.5, rng));
    for (Eigen::Index j = 0; j < i; ++j) a(i, j) = rng.normal();
  }
  const Eigen::MatrixXd la = llt.matrixL() * a;
  return symmetrize(la * la.transpose());
}

Eigen::VectorXd sample_dirichlet(const Eigen::VectorXd& concentrations, RngStream& rng) {
  if (concentrations.size() == 0) throw InvalidParameter("Dirichlet needs components");
  for (Eigen::Index c = 0; c < concentrations.size(); ++c) {
    if (!(concentrations(c) > 0.0)) throw InvalidParameter("Dirichlet concentrations must be > 0");
  }
  Eigen::VectorXd x(concentrations.size());
  for (Eigen::Index c = 0; c < x.size(); ++c) x(c) = sample_gamma_rate(concentrations(c), 1.0, rng);
  return x / x.sum();
}

int sample_categorical_log(const Eigen::VectorXd& log_weights, RngStream& rng) {
  if (log_weights.size() == 0) throw InvalidParameter("categorical needs weights");
  const double hi = log_weights.maxCoeff();
  if (!std::isfinite(hi)) throw InvalidParameter("categorical weights are not finite");
  const Eigen::VectorXd w = (log_weights.array() - hi).exp();
  double u = rng.uniform() * w.sum();
  for (Eigen::Index c = 0; c < w.size(); ++c) {
    u -= w(c);
    if (u <= 0.0) return static_cast<int>(c);
  }
  return static_cast<int>(w.size() - 1);
}

}  // namespace dsnb
