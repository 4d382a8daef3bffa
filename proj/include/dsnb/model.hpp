#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dsnb {

// Balanced count panel: n units observed over T periods. Covariates are
// stored per period, one n x (g | q | h) block each, so the filter can
// consume period slices directly.
struct PanelDataset {
  int n = 0;
  int T = 0;
  int g = 0;  // fixed-coefficient covariates
  int q = 0;  // dynamic-coefficient covariates
  int h = 0;  // random-coefficient covariates (mixture extension)

  Eigen::MatrixXi y;               // n x T
  std::vector<Eigen::MatrixXd> xf;  // T blocks of n x g
  std::vector<Eigen::MatrixXd> xd;  // T blocks of n x q
  std::vector<Eigen::MatrixXd> xr;  // T blocks of n x h, empty when h == 0

  std::vector<std::string> unit_ids;
  std::vector<std::string> period_labels;
  std::vector<std::string> f_names;
  std::vector<std::string> d_names;
  std::vector<std::string> r_names;

  bool has_random_effects() const { return h > 0; }
  int max_count() const;

  // Checks shapes, non-negative counts and finite covariates; fills empty
  // label vectors with defaults. Throws DataError.
  void validate();
};

struct HyperParameters {
  double r0 = 1.0;
  double e0 = 0.01;
  double f0 = 0.01;
  Eigen::VectorXd s0;  // g
  Eigen::MatrixXd S0;  // g x g
  Eigen::VectorXd m0;  // q
  Eigen::MatrixXd C0;  // q x q
  double c0 = 0.01;
  double d0 = 0.01;
  double a_sigma = 0.01;
  double b_sigma = 0.01;
  double rho = 1.0;

  // mixture block
  Eigen::VectorXd b0;  // h
  Eigen::MatrixXd B0;  // h x h
  double nu0 = 3.0;
  Eigen::MatrixXd V0;  // h x h, scale of the Wishart prior on Sigma_c^{-1}
  double alpha0 = 1.0;
  int components = 1;

  // Weakly informative defaults sized for (g, q, h).
  static HyperParameters defaults(int g, int q, int h = 0, int components = 1);

  // Throws InvalidParameter on non-SPD matrices or non-positive constants.
  void validate(int g, int q, int h) const;
};

// Every latent quantity touched by one Gibbs iteration.
struct ParameterState {
  double r = 1.0;
  double h = 1.0;
  Eigen::VectorXd gamma;           // g
  Eigen::MatrixXd theta;           // T x q, row t is theta_t
  Eigen::VectorXd theta0;          // q, initial state draw
  Eigen::VectorXd sigma_theta_sq;  // q
  Eigen::MatrixXd phi;             // n x T
  Eigen::VectorXd tau_sq;          // T
  Eigen::MatrixXd omega;           // n x T
  Eigen::MatrixXi table_counts;    // n x T, the L_it
  Eigen::VectorXd alpha;           // T, spatial correlation share

  // mixture block
  Eigen::MatrixXd beta;                // n x h
  Eigen::MatrixXd mu;                  // C x h
  std::vector<Eigen::MatrixXd> Sigma;  // C of h x h
  Eigen::VectorXd eta;                 // C
  std::vector<int> labels;             // n, 0-based component index
};

// Evolution system theta_t = G theta_{t-1} + u_t, u_t ~ N(0, diag(W)).
struct DlmSystem {
  Eigen::MatrixXd G;  // q x q
  Eigen::VectorXd W;  // q, state-noise variances

  static DlmSystem diagonal(int q, double rho, const Eigen::VectorXd& w);
  void validate() const;
};

// psi_it = X^F_it gamma + X^R_it beta_i + X^D_it theta_t + phi_i^t. The beta
// term enters only when the dataset carries random-coefficient covariates.
double link_psi(const ParameterState& state, const PanelDataset& data, int i, int t);

// Linear predictor without the spatial term, for one period.
Eigen::VectorXd linear_offset(const ParameterState& state, const PanelDataset& data, int t);

// n x T matrix of psi.
Eigen::MatrixXd compute_psi(const ParameterState& state, const PanelDataset& data);

// Logistic success probability 1 / (1 + exp(-psi)).
double nb_prob(double psi);

// log(1 + exp(x)) without overflow.
double softplus(double x);

// ln(1 - p) for p = logistic(psi), computed as -softplus(psi).
inline double log1m_nb_prob(double psi) { return -softplus(psi); }

// Augmented pseudo-observation z = (y - r) / (2 omega).
double augment_z(int y, double r, double omega);

// log P(y | r, p) = lgamma(y+r) - lgamma(r) - lgamma(y+1) + y ln p + r ln(1-p).
double nb_log_pmf(int y, double r, double p);
// Same, parameterized by the log-odds psi.
double nb_log_pmf_logit(int y, double r, double psi);

// -2 sum log NB(y_it | r, logistic(psi_it)).
double deviance(const PanelDataset& data, const Eigen::MatrixXd& psi, double r);

}  // namespace dsnb
