#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dsnb/sampler.hpp"
#include "dsnb/simulate.hpp"

namespace dsnb {

struct GewekeResult {
  double z = 0.0;
  bool degenerate = false;  // both segment variances were zero
};

// Two-means Z-test between the first 10% and the last 50% of a chain. The
// spectral density at zero of each segment comes from non-overlapping batch
// means with batch size ceil(sqrt(segment length)). Needs >= 100 draws.
GewekeResult geweke(const Eigen::Ref<const Eigen::VectorXd>& chain);
double geweke_z(const Eigen::Ref<const Eigen::VectorXd>& chain);

// Batch-means estimate of the spectral density at frequency zero.
double spectral_density_zero(const Eigen::Ref<const Eigen::VectorXd>& segment);

// Two-sided standard-normal critical value at family-wise level `level`.
double bonferroni_threshold(int n_tests, double level = 0.95);

// Type-7 (linear interpolation) sample quantile.
double quantile(const Eigen::Ref<const Eigen::VectorXd>& draws, double prob);

struct SummaryRow {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
};

SummaryRow summarize(const std::string& name, const Eigen::Ref<const Eigen::VectorXd>& draws);
// One row per trace column, in trace order.
std::vector<SummaryRow> summarize(const PosteriorChain& chain);

struct DicResult {
  double mean_deviance = 0.0;
  double plugin_deviance = 0.0;
  double p_d = 0.0;
  double dic = 0.0;
};

DicResult dic(const Eigen::Ref<const Eigen::VectorXd>& deviance_draws, double plugin_deviance);
// Uses the chain's "deviance" trace and its deviance at the posterior mean.
DicResult dic(const PosteriorChain& chain);

struct RecoveryRow {
  std::string name;
  double truth = 0.0;
  double mean = 0.0;
  double mab = 0.0;
  std::optional<double> apb;  // percent; absent when the truth is zero
  bool covered = false;
};

RecoveryRow recovery_row(const SummaryRow& summary, double truth);
// Rows for every trace column that has a truth value.
std::vector<RecoveryRow> recovery_report(const PosteriorChain& chain, const TruthRecord& truth);

struct GewekeRow {
  std::string name;
  double z = 0.0;
  double threshold = 0.0;
  bool pass = false;
  bool degenerate = false;
};

// Screens the chain's monitor list at the Bonferroni threshold for that many tests.
std::vector<GewekeRow> geweke_screen(const PosteriorChain& chain, double level = 0.95);

}  // namespace dsnb
