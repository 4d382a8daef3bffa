// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "dsnb/cli.hpp"
#include "dsnb/diagnostics.hpp"
#include "dsnb/distributions.hpp"
#include "dsnb/dlm.hpp"
#include "dsnb/sampler.hpp"
#include "dsnb/simulate.hpp"
#include "oracles.hpp"

using namespace dsnb;
using namespace dsnb::oracle;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, format, a);
  return buf;
}

struct Outcome {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

Outcome pg_moments() {
  Outcome o;
  const auto start = Clock::now();
  const double m10 = mean_of_pg(1.0, 0.0, 100000, 1);
  o.require(std::abs(m10 / 0.25 - 1.0) < 0.01, "PG(1,0) mean " + fmt("%.5f", m10));
  std::uint64_t seed = 2;
  for (const auto& cs : kPgSeries) {
    if (!((cs.b == 1.0 && cs.c == 2.0) || (cs.b == 3.0 && cs.c == 1.0))) continue;
    const double m = mean_of_pg(cs.b, cs.c, 100000, seed++);
    o.require(std::abs(m / cs.mean - 1.0) < 0.02, "PG(" + fmt("%g", cs.b) + "," + fmt("%g", cs.c) +
                                                      ") mean " + fmt("%.5f", m));
  }
  const double secs = seconds_since(start);
  o.require(secs < 5.0, "runtime " + fmt("%.2f s", secs));
  if (o.pass) o.detail = "PG(1,0) mean " + fmt("%.5f", m10) + ", runtime " + fmt("%.2f s", secs);
  return o;
}

Outcome laplace_identity() {
  Outcome o;
  std::uint64_t seed = 20;
  double worst = 0.0;
  for (double b : {1.0, 2.0}) {
    for (double psi : {0.5, 1.0, 2.0}) {
      RngStream rng(seed++);
      double sum = 0.0;
      const int draws = 100000;
      for (int k = 0; k < draws; ++k) sum += std::exp(-sample_pg({b, 0.0}, rng) * psi * psi / 2.0);
      const double rel = std::abs(sum / draws / std::pow(std::cosh(psi / 2.0), -b) - 1.0);
      worst = std::max(worst, rel);
      o.require(rel < 0.01, "b=" + fmt("%g", b) + " psi=" + fmt("%g", psi) + " rel err " + fmt("%.4f", rel));
    }
  }
  if (o.pass) o.detail = "max relative error " + fmt("%.5f", worst);
  return o;
}

Outcome table_counts() {
  Outcome o;
  std::uint64_t seed = 40;
  double worst = 0.0;
  for (double r : {0.5, 1.0, 3.0}) {
    for (int y = 0; y <= 6; ++y) {
      const double tv = table_count_tv(y, r, 100000, seed++);
      worst = std::max(worst, tv);
      o.require(tv < 0.01, "y=" + std::to_string(y) + " r=" + fmt("%g", r) + " TV " + fmt("%.4f", tv));
    }
  }
  if (o.pass) o.detail = "max TV " + fmt("%.5f", worst);
  return o;
}

Outcome ffbs_exactness() {
  Outcome o;
  RngStream rng(20);
  const Instance in = random_instance(2, 3, 1, rng);
  const JointOracle oracle(in);
  const FilterCache cache = forward_filter(in.zeta, in.F, in.prec, in.system, in.m0, in.C0);
  double worst = 0.0;
  for (int t = 1; t <= 3; ++t) {
    Eigen::VectorXd m;
    Eigen::MatrixXd c;
    oracle.condition(in, t, t, m, c);
    worst = std::max({worst, (cache.steps[t - 1].m - m).cwiseAbs().maxCoeff(),
                      (cache.steps[t - 1].C - c).cwiseAbs().maxCoeff()});
  }
  o.require(worst < 1e-8, "filter error " + fmt("%.3g", worst));

  Eigen::VectorXd sm;
  Eigen::MatrixXd sc;
  oracle.smoothed(in, sm, sc);
  const int draws = 100000;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(3);
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(3);
  for (int k = 0; k < draws; ++k) {
    const Eigen::VectorXd th = backward_sample(cache, in.system, rng).col(0);
    sum += th;
    sq += (th - sm).cwiseProduct(th - sm);
  }
  double worst_se = 0.0;
  for (int t = 0; t < 3; ++t) {
    const double mean_se = std::abs(sum(t) / draws - sm(t)) / std::sqrt(sc(t, t) / draws);
    const double var_se = std::abs(sq(t) / draws - sc(t, t)) / (sc(t, t) * std::sqrt(2.0 / draws));
    worst_se = std::max({worst_se, mean_se, var_se});
  }
  o.require(worst_se < 3.0, "FFBS moment off by " + fmt("%.2f", worst_se) + " MC se");
  if (o.pass) o.detail = "filter error " + fmt("%.2g", worst) + ", worst draw moment " + fmt("%.2f", worst_se) + " MC se";
  return o;
}

Outcome woodbury() {
  Outcome o;
  RngStream rng(30);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + static_cast<int>(rng.next_u64() % 20);
    const int q = 1 + static_cast<int>(rng.next_u64() % 4);
    Eigen::MatrixXd F(n, q), B(q, q);
    for (Eigen::Index k = 0; k < F.size(); ++k) F.data()[k] = rng.normal();
    for (Eigen::Index k = 0; k < B.size(); ++k) B.data()[k] = rng.normal();
    const Eigen::MatrixXd R = B * B.transpose() + 0.1 * Eigen::MatrixXd::Identity(q, q);
    Eigen::VectorXd w(n), v(n);
    for (int i = 0; i < n; ++i) {
      w(i) = 0.2 + 3.0 * rng.uniform();
      v(i) = rng.normal();
    }
    const Eigen::MatrixXd Q = F * R * F.transpose() + Eigen::MatrixXd(w.cwiseInverse().asDiagonal());
    const Eigen::MatrixXd qinv = Q.inverse();
    const PredictivePrecision pp(F, w, R);
    worst = std::max({worst, (pp.apply(v) - qinv * v).cwiseAbs().maxCoeff(),
                      (pp.ft_apply(v) - F.transpose() * qinv * v).cwiseAbs().maxCoeff(),
                      (pp.ft_qinv_f() - F.transpose() * qinv * F).cwiseAbs().maxCoeff()});
  }
  o.require(worst < 1e-8, "max error " + fmt("%.3g", worst));
  if (o.pass) o.detail = "max error over 20 trials " + fmt("%.2g", worst);
  return o;
}

struct RecoveryRun {
  PosteriorChain chain;
  TruthRecord truth;
  double seconds = 0.0;
};

RecoveryRun recovery_run() {
  const DgpSpec spec = DgpSpec::defaults(200, 10);
  RngStream rng(42);
  const SimulatedData sim = generate(spec, rng);
  GibbsConfig cfg;
  cfg.iterations = 3000;
  cfg.burn_in = 2000;
  cfg.seed = 42;
  const auto start = Clock::now();
  RecoveryRun run{run_chain(sim.data, &sim.weights, HyperParameters::defaults(3, 3), cfg), sim.truth, 0.0};
  run.seconds = seconds_since(start);
  return run;
}

Outcome recovery(const RecoveryRun& run) {
  Outcome o;
  const auto rows = recovery_report(run.chain, run.truth);
  int theta_total = 0, theta_covered = 0;
  double worst_apb = 0.0;
  for (const auto& row : rows) {
    const bool fixed = row.name.rfind("gamma[", 0) == 0 || row.name == "r";
    if (fixed) {
      const double apb = row.apb.value_or(0.0);
      worst_apb = std::max(worst_apb, apb);
      o.require(apb < 20.0, row.name + " APB " + fmt("%.2f%%", apb));
      o.require(row.covered, row.name + " not covered");
    } else if (row.name.rfind("theta[", 0) == 0) {
      ++theta_total;
      theta_covered += row.covered;
    }
  }
  o.require(theta_total == 30, "expected 30 theta values, got " + std::to_string(theta_total));
  o.require(theta_covered >= 27, "theta coverage " + std::to_string(theta_covered) + "/30");
  o.require(run.seconds < 45 * 60, "wall clock " + fmt("%.0f s", run.seconds));
  const std::string summary = "max APB " + fmt("%.2f%%", worst_apb) + ", theta coverage " +
                              std::to_string(theta_covered) + "/" + std::to_string(theta_total) +
                              ", wall clock " + fmt("%.1f s", run.seconds);
  o.detail = o.pass ? summary : o.detail + " (" + summary + ")";
  return o;
}

Outcome geweke_criterion(const RecoveryRun& run) {
  Outcome o;
  const auto rows = geweke_screen(run.chain);
  const int passed = static_cast<int>(std::count_if(rows.begin(), rows.end(), [](const GewekeRow& r) { return r.pass; }));
  o.require(rows.size() == 34, "expected 34 monitors, got " + std::to_string(rows.size()));
  o.require(passed >= 0.95 * static_cast<double>(rows.size()), "only " + std::to_string(passed) + " within threshold");
  std::string worst;
  double worst_z = 0.0;
  for (const auto& r : rows) {
    if (std::abs(r.z) > worst_z) {
      worst_z = std::abs(r.z);
      worst = r.name;
    }
  }
  const std::string summary = std::to_string(passed) + "/" + std::to_string(rows.size()) + " within +/-" +
                              fmt("%.4f", rows.empty() ? 0.0 : rows[0].threshold) + ", largest |Z| " +
                              fmt("%.2f", worst_z) + " (" + worst + ")";
  o.detail = o.pass ? summary : o.detail + " (" + summary + ")";
  return o;
}

Outcome sum_to_zero(const RecoveryRun& run) {
  Outcome o;
  const Trace* t = run.chain.find("phi_sum");
  o.require(t != nullptr, "phi_sum trace missing");
  if (!t) return o;
  const double worst = t->draws.cwiseAbs().maxCoeff();
  o.require(worst < 1e-8, "max |sum phi| " + fmt("%.3g", worst));
  if (o.pass) o.detail = "max |sum phi| " + fmt("%.3g", worst) + " over " + std::to_string(run.chain.size()) + " draws";
  return o;
}

Outcome mixture() {
  Outcome o;
  // Two well-separated components.
  DgpSpec spec;
  spec.n = 400;
  spec.T = 10;
  spec.h = 1;
  spec.eta = Eigen::Vector2d(0.5, 0.5);
  spec.mu = Eigen::MatrixXd(2, 1);
  spec.mu << -2.0, 2.0;
  spec.Sigma.assign(2, Eigen::MatrixXd::Constant(1, 1, 0.01));
  spec.resolve();
  RngStream rng(17);
  const SimulatedData sim = generate(spec, rng);
  GibbsConfig cfg;
  cfg.iterations = 1000;
  cfg.burn_in = 500;
  cfg.seed = 18;
  cfg.mixture_enabled = true;
  cfg.components = 2;
  const PosteriorChain chain = run_chain(sim.data, &sim.weights, HyperParameters::defaults(3, 3, 1, 2), cfg);
  int agree = 0;
  for (int i = 0; i < spec.n; ++i) {
    Eigen::Index best = 0;
    chain.label_frequency.row(i).maxCoeff(&best);
    agree += static_cast<int>(best) == sim.truth.labels[i];
  }
  const double recovery = std::max(agree, spec.n - agree) / static_cast<double>(spec.n);
  o.require(recovery >= 0.9, "label recovery " + fmt("%.3f", recovery));

  // One component over an all-zero random-coefficient column against the base sampler.
  DgpSpec base_spec = DgpSpec::defaults(60, 6);
  RngStream rng2(19);
  SimulatedData nested = generate(base_spec, rng2);
  nested.data.h = 1;
  nested.data.xr.assign(nested.data.T, Eigen::MatrixXd::Zero(nested.data.n, 1));
  nested.data.r_names.clear();
  nested.data.validate();
  const HyperParameters hp = HyperParameters::defaults(3, 3, 1, 1);
  GibbsConfig ext_cfg;
  ext_cfg.iterations = 300;
  ext_cfg.burn_in = 100;
  ext_cfg.seed = 20;
  ext_cfg.mixture_enabled = true;
  GibbsConfig base_cfg = ext_cfg;
  base_cfg.mixture_enabled = false;
  RngStream init_rng(21);
  const ParameterState init = GibbsSampler(nested.data, &nested.weights, hp, ext_cfg).initialize(init_rng);
  const PosteriorChain ext = run_chain(nested.data, &nested.weights, hp, ext_cfg, init);
  const PosteriorChain base = run_chain(nested.data, &nested.weights, hp, base_cfg, init);
  int compared = 0;
  bool identical = true;
  for (const auto& trace : base.traces) {
    const Trace* other = ext.find(trace.name);
    if (!other) {
      identical = false;
      continue;
    }
    identical = identical && other->draws == trace.draws;
    ++compared;
  }
  o.require(identical, "nested chains differ");
  const std::string summary = "label recovery " + fmt("%.3f", recovery) + ", nested chain identical across " +
                              std::to_string(compared) + " trace families";
  o.detail = o.pass ? summary : o.detail + " (" + summary + ")";
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism() {
  Outcome o;
  const fs::path dir = fs::temp_directory_path() / "dsnb_acceptance_determinism";
  fs::remove_all(dir);
  const std::string data = (dir / "data").string();
  run_simulate(parse_args({"simulate", "--n", "100", "--T", "10", "--seed", "3", "--out", data}));
  for (const char* workers : {"1", "4"}) {
    run_fit(parse_args({"fit", "--panel", data + "/panel.csv", "--weights", data + "/weights.csv", "--iters",
                        "400", "--burnin", "100", "--seed", "9", "--workers", workers, "--out",
                        (dir / (std::string("w") + workers)).string()}));
  }
  int files = 0;
  for (const auto& entry : fs::directory_iterator(dir / "w1")) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("draws_", 0) != 0) continue;
    ++files;
    o.require(slurp(entry.path()) == slurp(dir / "w4" / name), name + " differs");
  }
  o.require(files > 0, "no draws files written");
  fs::remove_all(dir);
  if (o.pass) o.detail = std::to_string(files) + " draws files identical for 1 and 4 workers";
  return o;
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const std::string& title, const Outcome& o) {
    std::printf("[%s] %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, title.c_str(), o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  };
  auto guarded = [&](const std::function<Outcome()>& f) {
    try {
      return f();
    } catch (const std::exception& e) {
      Outcome o;
      o.require(false, std::string("exception: ") + e.what());
      return o;
    }
  };

  report(1, "Polya-Gamma moments", guarded(pg_moments));
  report(2, "Laplace-transform identity", guarded(laplace_identity));
  report(3, "table-count sampler", guarded(table_counts));
  report(4, "FFBS exactness", guarded(ffbs_exactness));
  report(5, "Woodbury equivalence", guarded(woodbury));

  std::optional<RecoveryRun> run;
  std::string run_error;
  try {
    run = recovery_run();
  } catch (const std::exception& e) {
    run_error = e.what();
  }
  auto with_run = [&](Outcome (*f)(const RecoveryRun&)) {
    if (!run) {
      Outcome o;
      o.require(false, "recovery run failed: " + run_error);
      return o;
    }
    return guarded([&] { return f(*run); });
  };
  report(6, "parameter recovery", with_run(recovery));
  report(7, "Geweke screen", with_run(geweke_criterion));
  report(8, "sum-to-zero invariant", with_run(sum_to_zero));
  report(9, "mixture extension", guarded(mixture));
  report(10, "worker-count determinism", guarded(determinism));

  std::printf("%d of 10 criteria passed\n", 10 - failures);
  return failures == 0 ? 0 : 1;
}
