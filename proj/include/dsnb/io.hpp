#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dsnb/diagnostics.hpp"
#include "dsnb/model.hpp"
#include "dsnb/sampler.hpp"
#include "dsnb/simulate.hpp"
#include "dsnb/spatial.hpp"

namespace dsnb {

using CsvRow = std::vector<std::string>;

// RFC 4180 reader: quoted fields, doubled quotes, CRLF or LF line ends.
std::vector<CsvRow> read_csv(const std::filesystem::path& path);
std::string csv_field(const std::string& value);
std::string format_double(double x);

// Panel CSV: header `unit,period,y,f:<name>...,d:<name>...,r:<name>...`,
// one row per (unit, period). Units and periods keep first-seen order.
PanelDataset load_panel(const std::filesystem::path& path);
void save_panel(const PanelDataset& data, const std::filesystem::path& path);

// Weight CSV: header `i,j,w`, 0-based ids; pairs may be listed once.
SpatialWeights load_weights(const std::filesystem::path& path, int n);
void save_weights(const SpatialWeights& weights, const std::filesystem::path& path);

// Truth CSV: header `parameter,value`, full precision.
void save_truth(const TruthRecord& truth, const std::filesystem::path& path);
TruthRecord load_truth(const std::filesystem::path& path);

// INI file with `[section]` headers; keys come back as
// "section.key". Lines starting with `#` or `;` are comments.
std::map<std::string, std::string> read_config(const std::filesystem::path& path);
std::vector<double> parse_list(const std::string& text);

struct RunReports {
  std::vector<SummaryRow> summary;
  std::vector<RecoveryRow> recovery;
  std::vector<GewekeRow> geweke;
  std::optional<DicResult> dic;
};

RunReports build_reports(const PosteriorChain& chain, const TruthRecord* truth);

// Writes draws_<family>.csv, summary.csv, geweke.csv, alpha_t.csv,
// theta_t.csv, dic.csv, phi_mean.csv and, with a truth record, recovery.csv.
void write_outputs(const PosteriorChain& chain, const RunReports& reports,
                   const std::filesystem::path& dir);

// Rebuilds traces from the draws_<family>.csv files in `dir`; plugin
// deviance is read back from dic.csv when present.
PosteriorChain read_chain(const std::filesystem::path& dir);

}  // namespace dsnb
