#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "dsnb/rng.hpp"

namespace dsnb {

struct PgParams {
  double b = 1.0;  // shape, > 0
  double c = 0.0;  // tilt
};

// Polya-Gamma PG(b, c). The integer part of b is a sum of exact
// Devroye-type PG(1, c) draws; a fractional remainder is drawn from the
// truncated Gamma-series representation with the tail replaced by its mean.
double sample_pg(PgParams params, RngStream& rng);

// Exact PG(1, c) by alternating-series rejection.
double sample_pg1(double c, RngStream& rng);

// Truncated Gamma series: (1 / 2 pi^2) sum_k g_k / ((k - 1/2)^2 + c^2 / 4 pi^2),
// g_k ~ Gamma(b, 1), k = 1..terms, plus the expected value of the tail.
double sample_pg_series(double b, double c, RngStream& rng, int terms = 64);

// E[PG(b, c)] = b / (2c) tanh(c / 2), with the c -> 0 limit b / 4.
double pg_mean(double b, double c);

// log F(m, j) for the latent table-count distribution, 0 <= j <= m <= max_y.
// F(m, j) = (m-1)/m F(m-1, j) + 1/m F(m-1, j-1), F(1, 1) = 1, F(0, 0) = 1,
// F(m, 0) = 0 for m >= 1. Read-only after construction.
class TableCountLogF {
 public:
  explicit TableCountLogF(int max_y);

  int max_y() const { return max_y_; }
  double log_f(int m, int j) const;

 private:
  static std::size_t offset(int m) {
    return static_cast<std::size_t>(m) * (m + 1) / 2;
  }

  int max_y_;
  std::vector<double> log_f_;
};

// Draw L with P(L = j | y, r) proportional to F(y, j) r^j, j = 1..y, and
// L = 0 when y = 0. Counts above the table size throw InvalidParameter.
int sample_table_count(int y, double r, const TableCountLogF& table,
                       RngStream& rng);
// Convenience overload building a table of size y on the fly.
int sample_table_count(int y, double r, RngStream& rng);

// Gamma with mean shape / rate.
double sample_gamma_rate(double shape, double rate, RngStream& rng);

Eigen::VectorXd sample_standard_normal(Eigen::Index dim, RngStream& rng);

Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean,
                           const Eigen::MatrixXd& covariance, RngStream& rng);

// Draw from Normal(P^{-1} b, P^{-1}) given the precision P and the linear
// term b. Returns the draw; the mean is written to *mean when non-null.
Eigen::VectorXd sample_mvn_canonical(const Eigen::MatrixXd& precision,
                                     const Eigen::VectorXd& linear,
                                     RngStream& rng,
                                     Eigen::VectorXd* mean = nullptr);

// Wishart with mean dof * scale (Bartlett decomposition).
Eigen::MatrixXd sample_wishart(double dof, const Eigen::MatrixXd& scale,
                               RngStream& rng);

Eigen::VectorXd sample_dirichlet(const Eigen::VectorXd& concentrations,
                                 RngStream& rng);

// Index drawn with probability proportional to exp(log_weights).
int sample_categorical_log(const Eigen::VectorXd& log_weights, RngStream& rng);

}  // namespace dsnb
