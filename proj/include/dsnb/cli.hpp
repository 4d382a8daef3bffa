#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsnb/model.hpp"
#include "dsnb/sampler.hpp"
#include "dsnb/simulate.hpp"

namespace dsnb {

enum class Subcommand { Simulate, Fit, Report };

struct RunConfig {
  Subcommand command = Subcommand::Fit;
  std::filesystem::path panel_path;
  std::filesystem::path weights_path;
  std::filesystem::path truth_path;
  std::filesystem::path config_path;
  std::filesystem::path input_dir;  // report: directory written by fit
  std::filesystem::path out_dir;
  GibbsConfig gibbs;
  DgpSpec dgp;
  std::uint64_t seed = 1;
  // [hyper] entries from the config file, applied once dimensions are known.
  std::map<std::string, std::string> hyper_overrides;
};

// Thrown by parse_args for --help; what() holds the help text.
class HelpRequested : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Default output directory: $DSNB_OUT_DIR, else "dsnb_out".
std::filesystem::path default_out_dir();

// `args` excludes the program name. Config-file values are applied first
// and explicit flags override them. Throws UsageError naming the flag.
RunConfig parse_args(const std::vector<std::string>& args);
RunConfig parse_args(int argc, const char* const* argv);

HyperParameters resolve_hyper(const RunConfig& config, const PanelDataset& data);

// Each returns the process exit code.
int run_simulate(const RunConfig& config);
int run_fit(const RunConfig& config);
int run_report(const RunConfig& config);

// Parses, dispatches and maps exceptions to exit codes: 0 success,
// 1 data or numerical failure, 2 usage error.
int run_cli(int argc, const char* const* argv);

}  // namespace dsnb
