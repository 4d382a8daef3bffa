#include <cstdlib>
#include <fstream>
#include <string>

#include "doctest.h"
#include "dsnb/cli.hpp"
#include "dsnb/diagnostics.hpp"
#include "dsnb/error.hpp"
#include "dsnb/io.hpp"

using namespace dsnb;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("dsnb_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::string usage_message(const std::vector<std::string>& args) {
  try {
    parse_args(args);
  } catch (const UsageError& e) {
    return e.what();
  }
  return "";
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string("\"") + DSNB_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("simulate arguments fill the generator settings") {
  const RunConfig c = parse_args({"simulate", "--n", "1000", "--T", "10", "--seed", "42", "--out", "dir/"});
  CHECK(c.command == Subcommand::Simulate);
  CHECK(c.dgp.n == 1000);
  CHECK(c.dgp.T == 10);
  CHECK(c.seed == 42);
  CHECK(c.out_dir == fs::path("dir/"));
}

TEST_CASE("fit arguments fill the sampler settings") {
  const fs::path dir = scratch("fit_args");
  write_text(dir / "p.csv", "unit,period,y\n");
  write_text(dir / "w.csv", "i,j,w\n");
  const RunConfig c = parse_args({"fit", "--panel", (dir / "p.csv").string(), "--weights",
                                  (dir / "w.csv").string(), "--iters", "3000", "--burnin", "2000"});
  CHECK(c.command == Subcommand::Fit);
  CHECK(c.gibbs.iterations == 3000);
  CHECK(c.gibbs.burn_in == 2000);
  CHECK(c.gibbs.thin == 1);
  CHECK(c.gibbs.spatial_enabled);
  CHECK_FALSE(c.gibbs.mixture_enabled);
  fs::remove_all(dir);
}

TEST_CASE("usage errors name the offending flag") {
  CHECK(usage_message({"fit", "--iters", "10"}).find("--panel") != std::string::npos);
  CHECK(usage_message({"fit", "--panel", "/nonexistent/p.csv", "--no-spatial"}).find("--panel") !=
        std::string::npos);
  CHECK(usage_message({"simulate", "--bogus", "1"}).find("--bogus") != std::string::npos);
  CHECK(usage_message({"report"}).find("--in") != std::string::npos);

  const fs::path dir = scratch("usage");
  const std::string p = (dir / "p.csv").string(), w = (dir / "w.csv").string();
  write_text(p, "unit,period,y\n");
  write_text(w, "i,j,w\n");
  CHECK(usage_message({"fit", "--panel", p}).find("--weights") != std::string::npos);
  CHECK(usage_message({"fit", "--panel", p, "--weights", w, "--no-spatial"}).find("--no-spatial") !=
        std::string::npos);
  CHECK(usage_message({"fit", "--panel", p, "--no-spatial", "--iters", "10", "--burnin", "10"})
            .find("--burnin") != std::string::npos);
  CHECK(usage_message({"fit", "--panel", p, "--no-spatial", "--components", "2"}).find("--mixture") !=
        std::string::npos);
  CHECK(usage_message({"simulate", "--n", "0"}).find("--n") != std::string::npos);
  CHECK_THROWS_AS(parse_args({"--help"}), HelpRequested);
  fs::remove_all(dir);
}

TEST_CASE("config file values apply and flags override them") {
  const fs::path dir = scratch("config");
  const std::string p = (dir / "p.csv").string(), cfg = (dir / "run.cfg").string();
  write_text(p, "unit,period,y\n");
  write_text(cfg,
             "# run settings\n[gibbs]\niterations = 50\nburn_in = 10\nthin = 2\n"
             "[dgp]\nn = 77\ngamma = 0.5, -0.5, 0.25\n[hyper]\nr0 = 2.5\n");
  const RunConfig c = parse_args({"fit", "--panel", p, "--no-spatial", "--config", cfg, "--iters", "80"});
  CHECK(c.gibbs.iterations == 80);
  CHECK(c.gibbs.burn_in == 10);
  CHECK(c.gibbs.thin == 2);
  CHECK(c.hyper_overrides.at("r0") == "2.5");

  const RunConfig s = parse_args({"simulate", "--config", cfg, "--T", "4"});
  CHECK(s.dgp.n == 77);
  CHECK(s.dgp.T == 4);
  REQUIRE(s.dgp.gamma.size() == 3);
  CHECK(s.dgp.gamma(2) == 0.25);

  write_text(cfg, "[gibbs]\nnot_a_key = 1\n");
  CHECK(usage_message({"fit", "--panel", p, "--no-spatial", "--config", cfg}).find("not_a_key") !=
        std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("output directory defaults to the environment variable") {
  setenv("DSNB_OUT_DIR", "/tmp/dsnb_env_out", 1);
  CHECK(parse_args({"simulate"}).out_dir == fs::path("/tmp/dsnb_env_out"));
  unsetenv("DSNB_OUT_DIR");
  CHECK(parse_args({"simulate"}).out_dir == fs::path("dsnb_out"));
}

TEST_CASE("panel loading") {
  const fs::path dir = scratch("panel");
  write_text(dir / "ok.csv", "unit,period,y,f:speed\nA,1,3,0.5\nA,2,0,1.5\nB,1,7,-0.25\nB,2,2,2\n");
  const PanelDataset d = load_panel(dir / "ok.csv");
  CHECK(d.n == 2);
  CHECK(d.T == 2);
  CHECK(d.g == 1);
  CHECK(d.q == 0);
  CHECK(d.y(1, 0) == 7);
  CHECK(d.xf[1](0, 0) == 1.5);
  CHECK(d.unit_ids == std::vector<std::string>{"A", "B"});

  write_text(dir / "missing.csv", "unit,period,y,f:speed\nA,1,3,0.5\nA,2,0,1.5\nB,1,7,-0.25\n");
  try {
    load_panel(dir / "missing.csv");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("(unit B, period 2)") != std::string::npos);
  }
  write_text(dir / "frac.csv", "unit,period,y\nA,1,1.5\n");
  CHECK_THROWS_AS(load_panel(dir / "frac.csv"), DataError);
  write_text(dir / "nan.csv", "unit,period,y,d:x\nA,1,1,nan\n");
  CHECK_THROWS_AS(load_panel(dir / "nan.csv"), DataError);
  write_text(dir / "dup.csv", "unit,period,y\nA,1,1\nA,1,2\n");
  CHECK_THROWS_AS(load_panel(dir / "dup.csv"), DataError);

  DgpSpec spec = DgpSpec::defaults(12, 3);
  spec.h = 1;
  spec.eta = Eigen::VectorXd::Ones(1);
  spec.resolve();
  RngStream rng(3);
  const SimulatedData sim = generate(spec, rng);
  save_panel(sim.data, dir / "rt.csv");
  const PanelDataset back = load_panel(dir / "rt.csv");
  CHECK(back.y == sim.data.y);
  for (int t = 0; t < 3; ++t) {
    CHECK(back.xf[t] == sim.data.xf[t]);
    CHECK(back.xd[t] == sim.data.xd[t]);
    CHECK(back.xr[t] == sim.data.xr[t]);
  }
  CHECK(back.unit_ids == sim.data.unit_ids);
  CHECK(back.f_names == sim.data.f_names);
  save_weights(sim.weights, dir / "w.csv");
  CHECK(load_weights(dir / "w.csv", 12).dense() == sim.weights.dense());
  fs::remove_all(dir);
}

TEST_CASE("csv fields are quoted when needed") {
  CHECK(csv_field("plain") == "plain");
  CHECK(csv_field("a,b") == "\"a,b\"");
  CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
  const fs::path dir = scratch("csv");
  write_text(dir / "q.csv", "a,b\r\n\"x,1\",\"he said \"\"no\"\"\"\r\n");
  const auto rows = read_csv(dir / "q.csv");
  REQUIRE(rows.size() == 2);
  CHECK(rows[1][0] == "x,1");
  CHECK(rows[1][1] == "he said \"no\"");
  fs::remove_all(dir);
}

TEST_CASE("simulate then fit then report") {
  const fs::path dir = scratch("pipeline");
  const RunConfig sim = parse_args({"simulate", "--n", "30", "--T", "4", "--seed", "5", "--out", (dir / "data").string()});
  REQUIRE(run_simulate(sim) == 0);
  for (const char* f : {"panel.csv", "weights.csv", "truth.csv"}) CHECK(fs::exists(dir / "data" / f));

  const RunConfig fit = parse_args({"fit", "--panel", (dir / "data" / "panel.csv").string(), "--weights",
                                    (dir / "data" / "weights.csv").string(), "--truth",
                                    (dir / "data" / "truth.csv").string(), "--iters", "150", "--burnin",
                                    "30", "--seed", "9", "--out", (dir / "fit").string()});
  REQUIRE(run_fit(fit) == 0);
  for (const char* f : {"summary.csv", "recovery.csv", "geweke.csv", "alpha_t.csv", "theta_t.csv",
                        "dic.csv", "draws_gamma.csv", "draws_theta.csv", "phi_mean.csv"}) {
    CAPTURE(f);
    REQUIRE(fs::exists(dir / "fit" / f));
    CHECK(read_csv(dir / "fit" / f).size() >= 2);
  }
  const auto alpha = read_csv(dir / "fit" / "alpha_t.csv");
  CHECK(alpha.size() == 1 + 4);
  CHECK(alpha[0] == CsvRow{"period", "mean", "q2.5", "q97.5"});
  CHECK(read_csv(dir / "fit" / "draws_gamma.csv").size() == 1 + 120);
  CHECK(read_csv(dir / "fit" / "geweke.csv")[0] == CsvRow{"parameter", "z", "threshold", "pass"});

  const PosteriorChain chain = read_chain(dir / "fit");
  CHECK(chain.size() == 120);
  const auto summary = read_csv(dir / "fit" / "summary.csv");
  const auto rows = summarize(chain);
  int matched = 0;
  for (std::size_t k = 1; k < summary.size(); ++k) {
    for (const auto& row : rows) {
      if (row.name != summary[k][0]) continue;
      CHECK(std::stod(summary[k][1]) == row.mean);
      ++matched;
    }
  }
  CHECK(matched > 20);

  const RunConfig rep = parse_args({"report", "--in", (dir / "fit").string(), "--out", (dir / "rep").string()});
  REQUIRE(run_report(rep) == 0);
  CHECK(fs::exists(dir / "rep" / "summary.csv"));
  fs::remove_all(dir);
}

TEST_CASE("binary exit codes") {
  const fs::path dir = scratch("exit");
  const std::string data = (dir / "data").string();
  CHECK(run_binary("--help") == 0);
  CHECK(run_binary("fit") == 2);
  CHECK(run_binary("simulate --n 20 --T 3 --out " + data) == 0);
  CHECK(run_binary("fit --panel " + data + "/panel.csv --weights " + data +
                   "/weights.csv --iters 20 --burnin 5 --out " + (dir / "fit").string()) == 0);
  write_text(dir / "bad.csv", "unit,period,y\nA,1,-1\nB,1,2\n");
  CHECK(run_binary("fit --no-spatial --panel " + (dir / "bad.csv").string() + " --iters 5 --burnin 1 --out " +
                   (dir / "bad").string()) == 1);
  fs::remove_all(dir);
}
