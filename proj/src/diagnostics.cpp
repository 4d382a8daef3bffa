#include "dsnb/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include <boost/math/distributions/normal.hpp>

#include "dsnb/error.hpp"

namespace dsnb {

double spectral_density_zero(const Eigen::Ref<const Eigen::VectorXd>& segment) {
  const Eigen::Index len = segment.size();
  if (len < 2) throw InvalidParameter("segment too short for a spectral estimate");
  const Eigen::Index batch = static_cast<Eigen::Index>(std::ceil(std::sqrt(static_cast<double>(len))));
  const Eigen::Index batches = len / batch;
  if (batches < 2) throw InvalidParameter("segment too short for batch means");
  Eigen::VectorXd means(batches);
  for (Eigen::Index b = 0; b < batches; ++b) means(b) = segment.segment(b * batch, batch).mean();
  const double grand = means.mean();
  const double var = (means.array() - grand).square().sum() / static_cast<double>(batches - 1);
  // Var(batch mean) ~ S(0) / batch.
  return var * static_cast<double>(batch);
}

GewekeResult geweke(const Eigen::Ref<const Eigen::VectorXd>& chain) {
  const Eigen::Index len = chain.size();
  if (len < 100) throw InvalidParameter("Geweke test needs at least 100 draws");
  const Eigen::Index na = len / 10;
  const Eigen::Index nb = len / 2;
  const auto a = chain.head(na);
  const auto b = chain.tail(nb);
  const double sa = spectral_density_zero(a);
  const double sb = spectral_density_zero(b);
  const double se = std::sqrt(sa / static_cast<double>(na) + sb / static_cast<double>(nb));
  GewekeResult out;
  if (se == 0.0) {
    out.degenerate = true;
    out.z = 0.0;
    return out;
  }
  out.z = (a.mean() - b.mean()) / se;
  return out;
}

double geweke_z(const Eigen::Ref<const Eigen::VectorXd>& chain) {
  const GewekeResult res = geweke(chain);
  if (res.degenerate) std::cerr << "warning: degenerate chain in Geweke test, Z set to 0\n";
  return res.z;
}

double bonferroni_threshold(int n_tests, double level) {
  if (n_tests < 1) throw InvalidParameter("n_tests must be >= 1");
  if (!(level > 0.0 && level < 1.0)) throw InvalidParameter("level must lie in (0, 1)");
  const boost::math::normal_distribution<double> normal;
  return boost::math::quantile(normal, 1.0 - (1.0 - level) / (2.0 * n_tests));
}

double quantile(const Eigen::Ref<const Eigen::VectorXd>& draws, double prob) {
  if (draws.size() == 0) throw InvalidParameter("quantile of an empty sample");
  if (!(prob >= 0.0 && prob <= 1.0)) throw InvalidParameter("probability must lie in [0, 1]");
  std::vector<double> v(draws.data(), draws.data() + draws.size());
  std::sort(v.begin(), v.end());
  const double pos = prob * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

SummaryRow summarize(const std::string& name, const Eigen::Ref<const Eigen::VectorXd>& draws) {
  SummaryRow row;
  row.name = name;
  row.mean = draws.mean();
  const Eigen::Index m = draws.size();
  row.sd = m > 1 ? std::sqrt((draws.array() - row.mean).square().sum() / static_cast<double>(m - 1)) : 0.0;
  row.q025 = quantile(draws, 0.025);
  row.q975 = quantile(draws, 0.975);
  return row;
}

std::vector<SummaryRow> summarize(const PosteriorChain& chain) {
  std::vector<SummaryRow> rows;
  for (const auto& trace : chain.traces) {
    for (std::size_t c = 0; c < trace.columns.size(); ++c) {
      rows.push_back(summarize(trace.columns[c], trace.draws.col(static_cast<Eigen::Index>(c))));
    }
  }
  return rows;
}

DicResult dic(const Eigen::Ref<const Eigen::VectorXd>& deviance_draws, double plugin_deviance) {
  if (deviance_draws.size() == 0) throw InvalidParameter("empty deviance trace");
  DicResult out;
  out.mean_deviance = deviance_draws.mean();
  out.plugin_deviance = plugin_deviance;
  out.p_d = out.mean_deviance - plugin_deviance;
  out.dic = out.mean_deviance + out.p_d;
  return out;
}

DicResult dic(const PosteriorChain& chain) {
  const auto dev = chain.column("deviance");
  if (!dev) throw InvalidParameter("chain has no deviance trace");
  return dic(*dev, chain.plugin_deviance);
}

RecoveryRow recovery_row(const SummaryRow& summary, double truth) {
  RecoveryRow row;
  row.name = summary.name;
  row.truth = truth;
  row.mean = summary.mean;
  row.mab = std::abs(truth - summary.mean);
  if (truth != 0.0) row.apb = 100.0 * row.mab / std::abs(truth);
  row.covered = summary.q025 <= truth && truth <= summary.q975;
  return row;
}

std::vector<RecoveryRow> recovery_report(const PosteriorChain& chain, const TruthRecord& truth) {
  const auto values = truth.scalars();
  std::vector<RecoveryRow> rows;
  for (const auto& summary : summarize(chain)) {
    const auto it = values.find(summary.name);
    if (it != values.end()) rows.push_back(recovery_row(summary, it->second));
  }
  return rows;
}

std::vector<GewekeRow> geweke_screen(const PosteriorChain& chain, double level) {
  std::vector<GewekeRow> rows;
  if (chain.monitors.empty()) return rows;
  const double threshold = bonferroni_threshold(static_cast<int>(chain.monitors.size()), level);
  for (const auto& name : chain.monitors) {
    const auto col = chain.column(name);
    if (!col) throw InvalidParameter("monitored parameter not in chain: " + name);
    const GewekeResult res = geweke(*col);
    GewekeRow row;
    row.name = name;
    row.z = res.z;
    row.threshold = threshold;
    row.degenerate = res.degenerate;
    row.pass = std::abs(res.z) <= threshold;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace dsnb
