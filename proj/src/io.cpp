#include "dsnb/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <regex>
#include <sstream>
#include <unordered_map>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "dsnb/error.hpp"

namespace fs = std::filesystem;

namespace dsnb {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

double parse_double(const std::string& text, const std::string& where) {
  const std::string s = trim(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw DataError(where + ": not a number: '" + text + "'");
  }
  if (used != s.size()) throw DataError(where + ": not a number: '" + text + "'");
  return v;
}

// Splits "name[1][2]" into ("name", {1, 2}).
bool split_indexed(const std::string& key, std::string& base, std::vector<int>& idx) {
  static const std::regex head(R"(^([A-Za-z_][A-Za-z0-9_]*)((\[[0-9]+\])*)$)");
  std::smatch m;
  if (!std::regex_match(key, m, head)) return false;
  base = m[1];
  idx.clear();
  const std::string rest = m[2];
  static const std::regex part(R"(\[([0-9]+)\])");
  for (auto it = std::sregex_iterator(rest.begin(), rest.end(), part); it != std::sregex_iterator(); ++it) {
    idx.push_back(std::stoi((*it)[1]));
  }
  return true;
}

}  // namespace

std::vector<CsvRow> read_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  std::vector<CsvRow> rows;
  CsvRow row;
  std::string field;
  bool quoted = false;
  bool row_open = false;
  for (std::size_t k = 0; k < text.size(); ++k) {
    const char ch = text[k];
    if (quoted) {
      if (ch == '"') {
        if (k + 1 < text.size() && text[k + 1] == '"') {
          field += '"';
          ++k;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
      continue;
    }
    switch (ch) {
      case '"':
        quoted = true;
        row_open = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        row_open = true;
        break;
      case '\r':
        break;
      case '\n':
        if (row_open || !field.empty()) {
          row.push_back(std::move(field));
          rows.push_back(std::move(row));
        }
        field.clear();
        row.clear();
        row_open = false;
        break;
      default:
        field += ch;
        row_open = true;
    }
  }
  if (quoted) throw DataError(path.string() + ": unterminated quoted field");
  if (row_open || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\r\n") == std::string::npos) return value;
  std::string out = "\"";
  for (char ch : value) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

PanelDataset load_panel(const fs::path& path) {
  const auto rows = read_csv(path);
  if (rows.empty()) throw DataError(path.string() + ": empty panel file");
  const CsvRow& header = rows.front();
  if (header.size() < 3 || trim(header[0]) != "unit" || trim(header[1]) != "period" ||
      trim(header[2]) != "y") {
    throw DataError(path.string() + ": header must start with unit,period,y");
  }
  PanelDataset data;
  std::vector<std::size_t> f_cols, d_cols, r_cols;
  for (std::size_t c = 3; c < header.size(); ++c) {
    const std::string name = trim(header[c]);
    if (name.rfind("f:", 0) == 0) {
      f_cols.push_back(c);
      data.f_names.push_back(name.substr(2));
    } else if (name.rfind("d:", 0) == 0) {
      d_cols.push_back(c);
      data.d_names.push_back(name.substr(2));
    } else if (name.rfind("r:", 0) == 0) {
      r_cols.push_back(c);
      data.r_names.push_back(name.substr(2));
    } else {
      throw DataError(path.string() + ": column '" + name + "' lacks an f:, d: or r: prefix");
    }
  }
  std::unordered_map<std::string, int> unit_index, period_index;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const auto& row = rows[k];
    if (row.size() != header.size()) {
      throw DataError(path.string() + ": line " + std::to_string(k + 1) + " has " +
                      std::to_string(row.size()) + " fields, expected " +
                      std::to_string(header.size()));
    }
    if (unit_index.emplace(row[0], static_cast<int>(data.unit_ids.size())).second) {
      data.unit_ids.push_back(row[0]);
    }
    if (period_index.emplace(row[1], static_cast<int>(data.period_labels.size())).second) {
      data.period_labels.push_back(row[1]);
    }
  }
  data.n = static_cast<int>(data.unit_ids.size());
  data.T = static_cast<int>(data.period_labels.size());
  data.g = static_cast<int>(f_cols.size());
  data.q = static_cast<int>(d_cols.size());
  data.h = static_cast<int>(r_cols.size());
  if (data.n == 0) throw DataError(path.string() + ": no data rows");
  data.y = Eigen::MatrixXi::Constant(data.n, data.T, -1);
  data.xf.assign(data.T, Eigen::MatrixXd::Zero(data.n, data.g));
  data.xd.assign(data.T, Eigen::MatrixXd::Zero(data.n, data.q));
  data.xr.assign(data.T, Eigen::MatrixXd::Zero(data.n, data.h));
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const auto& row = rows[k];
    const int i = unit_index.at(row[0]);
    const int t = period_index.at(row[1]);
    const std::string where = path.string() + ": line " + std::to_string(k + 1);
    if (data.y(i, t) != -1) {
      throw DataError(where + ": duplicate cell (unit " + row[0] + ", period " + row[1] + ")");
    }
    const double y = parse_double(row[2], where);
    if (!(y >= 0.0) || y != std::floor(y) || y > 2e9) {
      throw DataError(where + ": y must be a non-negative integer, got '" + row[2] + "'");
    }
    data.y(i, t) = static_cast<int>(y);
    auto fill = [&](const std::vector<std::size_t>& cols, Eigen::MatrixXd& block) {
      for (std::size_t c = 0; c < cols.size(); ++c) {
        const double v = parse_double(row[cols[c]], where);
        if (!std::isfinite(v)) throw DataError(where + ": non-finite covariate " + header[cols[c]]);
        block(i, static_cast<Eigen::Index>(c)) = v;
      }
    };
    fill(f_cols, data.xf[t]);
    fill(d_cols, data.xd[t]);
    fill(r_cols, data.xr[t]);
  }
  std::string missing;
  int n_missing = 0;
  for (int i = 0; i < data.n; ++i) {
    for (int t = 0; t < data.T; ++t) {
      if (data.y(i, t) >= 0) continue;
      if (++n_missing <= 10) {
        missing += " (unit " + data.unit_ids[i] + ", period " + data.period_labels[t] + ")";
      }
    }
  }
  if (n_missing > 0) {
    throw DataError(path.string() + ": unbalanced panel, " + std::to_string(n_missing) +
                    " missing cells:" + missing);
  }
  if (data.h == 0) data.xr.clear();
  data.validate();
  return data;
}

void save_panel(const PanelDataset& data, const fs::path& path) {
  PanelDataset copy = data;
  copy.validate();
  std::ofstream out = open_out(path);
  out << "unit,period,y";
  for (const auto& s : copy.f_names) out << ',' << csv_field("f:" + s);
  for (const auto& s : copy.d_names) out << ',' << csv_field("d:" + s);
  for (const auto& s : copy.r_names) out << ',' << csv_field("r:" + s);
  out << '\n';
  for (int i = 0; i < copy.n; ++i) {
    for (int t = 0; t < copy.T; ++t) {
      out << csv_field(copy.unit_ids[i]) << ',' << csv_field(copy.period_labels[t]) << ','
          << copy.y(i, t);
      for (int k = 0; k < copy.g; ++k) out << ',' << format_double(copy.xf[t](i, k));
      for (int k = 0; k < copy.q; ++k) out << ',' << format_double(copy.xd[t](i, k));
      for (int k = 0; k < copy.h; ++k) out << ',' << format_double(copy.xr[t](i, k));
      out << '\n';
    }
  }
}

SpatialWeights load_weights(const fs::path& path, int n) {
  const auto rows = read_csv(path);
  if (rows.empty() || rows.front().size() != 3 || trim(rows.front()[0]) != "i" ||
      trim(rows.front()[1]) != "j" || trim(rows.front()[2]) != "w") {
    throw DataError(path.string() + ": header must be i,j,w");
  }
  std::vector<WeightTriplet> triplets;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const std::string where = path.string() + ": line " + std::to_string(k + 1);
    if (rows[k].size() != 3) throw DataError(where + ": expected 3 fields");
    const double i = parse_double(rows[k][0], where);
    const double j = parse_double(rows[k][1], where);
    const double w = parse_double(rows[k][2], where);
    if (i != std::floor(i) || j != std::floor(j)) throw DataError(where + ": ids must be integers");
    triplets.push_back({static_cast<int>(i), static_cast<int>(j), w});
  }
  try {
    return SpatialWeights::from_triplets(n, triplets);
  } catch (const InvalidParameter& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void save_weights(const SpatialWeights& weights, const fs::path& path) {
  std::ofstream out = open_out(path);
  out << "i,j,w\n";
  for (const auto& tr : weights.upper_triplets()) {
    out << tr.i << ',' << tr.j << ',' << format_double(tr.w) << '\n';
  }
}

void save_truth(const TruthRecord& truth, const fs::path& path) {
  std::ofstream out = open_out(path);
  out << "parameter,value\n";
  auto put = [&](const std::string& name, double v) {
    out << csv_field(name) << ',' << format_double(v) << '\n';
  };
  auto idx = [](std::initializer_list<Eigen::Index> ks) {
    std::string s;
    for (auto k : ks) s += "[" + std::to_string(k + 1) + "]";
    return s;
  };
  for (Eigen::Index k = 0; k < truth.gamma.size(); ++k) put("gamma" + idx({k}), truth.gamma(k));
  put("r", truth.r);
  for (Eigen::Index t = 0; t < truth.theta.rows(); ++t) {
    for (Eigen::Index k = 0; k < truth.theta.cols(); ++k) put("theta" + idx({t, k}), truth.theta(t, k));
  }
  for (Eigen::Index k = 0; k < truth.theta0.size(); ++k) put("theta0" + idx({k}), truth.theta0(k));
  for (Eigen::Index k = 0; k < truth.sigma_theta_sq.size(); ++k) {
    put("sigma_theta_sq" + idx({k}), truth.sigma_theta_sq(k));
  }
  for (Eigen::Index t = 0; t < truth.tau_sq.size(); ++t) put("tau_sq" + idx({t}), truth.tau_sq(t));
  for (Eigen::Index t = 0; t < truth.alpha.size(); ++t) put("alpha" + idx({t}), truth.alpha(t));
  for (Eigen::Index i = 0; i < truth.phi.rows(); ++i) {
    for (Eigen::Index t = 0; t < truth.phi.cols(); ++t) put("phi" + idx({i, t}), truth.phi(i, t));
  }
  for (Eigen::Index i = 0; i < truth.beta.rows(); ++i) {
    for (Eigen::Index k = 0; k < truth.beta.cols(); ++k) put("beta" + idx({i, k}), truth.beta(i, k));
  }
  for (Eigen::Index c = 0; c < truth.mu.rows(); ++c) {
    for (Eigen::Index k = 0; k < truth.mu.cols(); ++k) put("mu" + idx({c, k}), truth.mu(c, k));
  }
  for (Eigen::Index c = 0; c < truth.eta.size(); ++c) put("eta" + idx({c}), truth.eta(c));
  for (std::size_t i = 0; i < truth.labels.size(); ++i) {
    put("label" + idx({static_cast<Eigen::Index>(i)}), truth.labels[i] + 1);
  }
}

TruthRecord load_truth(const fs::path& path) {
  const auto rows = read_csv(path);
  if (rows.empty() || rows.front().size() != 2 || trim(rows.front()[0]) != "parameter") {
    throw DataError(path.string() + ": header must be parameter,value");
  }
  struct Entry {
    std::vector<int> idx;
    double value;
  };
  std::map<std::string, std::vector<Entry>> groups;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const std::string where = path.string() + ": line " + std::to_string(k + 1);
    if (rows[k].size() != 2) throw DataError(where + ": expected 2 fields");
    std::string base;
    std::vector<int> idx;
    if (!split_indexed(trim(rows[k][0]), base, idx)) {
      throw DataError(where + ": bad parameter name '" + rows[k][0] + "'");
    }
    for (int& v : idx) {
      if (v < 1) throw DataError(where + ": indices are 1-based");
      --v;
    }
    groups[base].push_back({idx, parse_double(rows[k][1], where)});
  }
  auto vec = [&](const std::string& name) {
    Eigen::VectorXd v;
    const auto it = groups.find(name);
    if (it == groups.end()) return Eigen::VectorXd(0);
    int len = 0;
    for (const auto& e : it->second) {
      if (e.idx.size() != 1) throw DataError(path.string() + ": " + name + " needs one index");
      len = std::max(len, e.idx[0] + 1);
    }
    v = Eigen::VectorXd::Zero(len);
    for (const auto& e : it->second) v(e.idx[0]) = e.value;
    return v;
  };
  auto mat = [&](const std::string& name) {
    const auto it = groups.find(name);
    if (it == groups.end()) return Eigen::MatrixXd(0, 0);
    int rows_n = 0, cols_n = 0;
    for (const auto& e : it->second) {
      if (e.idx.size() != 2) throw DataError(path.string() + ": " + name + " needs two indices");
      rows_n = std::max(rows_n, e.idx[0] + 1);
      cols_n = std::max(cols_n, e.idx[1] + 1);
    }
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows_n, cols_n);
    for (const auto& e : it->second) m(e.idx[0], e.idx[1]) = e.value;
    return m;
  };
  TruthRecord truth;
  truth.gamma = vec("gamma");
  if (const auto it = groups.find("r"); it != groups.end()) truth.r = it->second.front().value;
  truth.theta = mat("theta");
  truth.theta0 = vec("theta0");
  truth.sigma_theta_sq = vec("sigma_theta_sq");
  truth.tau_sq = vec("tau_sq");
  truth.alpha = vec("alpha");
  truth.phi = mat("phi");
  truth.beta = mat("beta");
  truth.mu = mat("mu");
  truth.eta = vec("eta");
  const Eigen::VectorXd labels = vec("label");
  for (Eigen::Index i = 0; i < labels.size(); ++i) truth.labels.push_back(static_cast<int>(labels(i)) - 1);
  return truth;
}

std::map<std::string, std::string> read_config(const fs::path& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw DataError(std::string("config: ") + e.what());
  }
  std::map<std::string, std::string> out;
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      out[name] = node.data();
      continue;
    }
    for (const auto& [key, leaf] : node) out[name + "." + key] = leaf.data();
  }
  return out;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (trim(item).empty()) continue;
    out.push_back(parse_double(item, "list '" + text + "'"));
  }
  return out;
}

RunReports build_reports(const PosteriorChain& chain, const TruthRecord* truth) {
  RunReports rep;
  rep.summary = summarize(chain);
  if (truth != nullptr) rep.recovery = recovery_report(chain, *truth);
  if (chain.size() >= 100) rep.geweke = geweke_screen(chain);
  if (chain.find("deviance") != nullptr && chain.size() > 0) rep.dic = dic(chain);
  return rep;
}

void write_outputs(const PosteriorChain& chain, const RunReports& reports, const fs::path& dir) {
  fs::create_directories(dir);
  for (const auto& trace : chain.traces) {
    if (trace.columns.empty()) continue;
    std::ofstream out = open_out(dir / ("draws_" + trace.name + ".csv"));
    out << "draw";
    for (const auto& c : trace.columns) out << ',' << csv_field(c);
    out << '\n';
    for (Eigen::Index k = 0; k < trace.draws.rows(); ++k) {
      out << (k + 1);
      for (Eigen::Index c = 0; c < trace.draws.cols(); ++c) out << ',' << format_double(trace.draws(k, c));
      out << '\n';
    }
  }
  {
    std::ofstream out = open_out(dir / "summary.csv");
    out << "parameter,mean,sd,q2.5,q97.5\n";
    for (const auto& r : reports.summary) {
      out << csv_field(r.name) << ',' << format_double(r.mean) << ',' << format_double(r.sd) << ','
          << format_double(r.q025) << ',' << format_double(r.q975) << '\n';
    }
  }
  if (!reports.recovery.empty()) {
    std::ofstream out = open_out(dir / "recovery.csv");
    out << "parameter,truth,mean,mab,apb,covered\n";
    for (const auto& r : reports.recovery) {
      out << csv_field(r.name) << ',' << format_double(r.truth) << ',' << format_double(r.mean) << ','
          << format_double(r.mab) << ',' << (r.apb ? format_double(*r.apb) : "NA") << ','
          << (r.covered ? 1 : 0) << '\n';
    }
  }
  {
    std::ofstream out = open_out(dir / "geweke.csv");
    out << "parameter,z,threshold,pass\n";
    for (const auto& r : reports.geweke) {
      out << csv_field(r.name) << ',' << format_double(r.z) << ',' << format_double(r.threshold) << ','
          << (r.pass ? 1 : 0) << '\n';
    }
  }
  if (reports.dic) {
    std::ofstream out = open_out(dir / "dic.csv");
    out << "mean_deviance,plugin_deviance,p_d,dic\n"
        << format_double(reports.dic->mean_deviance) << ','
        << format_double(reports.dic->plugin_deviance) << ',' << format_double(reports.dic->p_d)
        << ',' << format_double(reports.dic->dic) << '\n';
  }
  if (const Trace* alpha = chain.find("alpha"); alpha != nullptr && chain.size() > 0) {
    std::ofstream out = open_out(dir / "alpha_t.csv");
    out << "period,mean,q2.5,q97.5\n";
    for (Eigen::Index t = 0; t < alpha->draws.cols(); ++t) {
      const SummaryRow s = summarize(alpha->columns[t], alpha->draws.col(t));
      out << (t + 1) << ',' << format_double(s.mean) << ',' << format_double(s.q025) << ','
          << format_double(s.q975) << '\n';
    }
  }
  if (const Trace* theta = chain.find("theta"); theta != nullptr && chain.size() > 0) {
    std::ofstream out = open_out(dir / "theta_t.csv");
    out << "period,coefficient,mean,q2.5,q97.5\n";
    for (std::size_t c = 0; c < theta->columns.size(); ++c) {
      std::string base;
      std::vector<int> idx;
      split_indexed(theta->columns[c], base, idx);
      const SummaryRow s = summarize(theta->columns[c], theta->draws.col(static_cast<Eigen::Index>(c)));
      out << idx.at(0) << ',' << idx.at(1) << ',' << format_double(s.mean) << ','
          << format_double(s.q025) << ',' << format_double(s.q975) << '\n';
    }
  }
  if (chain.phi_mean.size() > 0) {
    std::ofstream out = open_out(dir / "phi_mean.csv");
    out << "unit,period,mean\n";
    for (Eigen::Index i = 0; i < chain.phi_mean.rows(); ++i) {
      for (Eigen::Index t = 0; t < chain.phi_mean.cols(); ++t) {
        out << (i + 1) << ',' << (t + 1) << ',' << format_double(chain.phi_mean(i, t)) << '\n';
      }
    }
  }
}

PosteriorChain read_chain(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("draws_", 0) == 0 && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  if (files.empty()) throw DataError(dir.string() + ": no draws_*.csv files");
  std::sort(files.begin(), files.end());
  PosteriorChain chain;
  Eigen::Index length = -1;
  for (const auto& file : files) {
    const auto rows = read_csv(file);
    if (rows.empty() || rows.front().empty() || rows.front()[0] != "draw") {
      throw DataError(file.string() + ": header must start with draw");
    }
    Trace trace;
    const std::string stem = file.stem().string();
    trace.name = stem.substr(6);
    trace.columns.assign(rows.front().begin() + 1, rows.front().end());
    const auto m = static_cast<Eigen::Index>(rows.size() - 1);
    if (length >= 0 && m != length) throw DataError(file.string() + ": draw count differs");
    length = m;
    trace.draws.resize(m, static_cast<Eigen::Index>(trace.columns.size()));
    for (Eigen::Index k = 0; k < m; ++k) {
      const auto& row = rows[static_cast<std::size_t>(k) + 1];
      if (row.size() != trace.columns.size() + 1) throw DataError(file.string() + ": ragged row");
      for (std::size_t c = 0; c < trace.columns.size(); ++c) {
        trace.draws(k, static_cast<Eigen::Index>(c)) = parse_double(row[c + 1], file.string());
      }
    }
    chain.traces.push_back(std::move(trace));
  }
  if (fs::exists(dir / "dic.csv")) {
    const auto rows = read_csv(dir / "dic.csv");
    if (rows.size() >= 2 && rows[1].size() >= 2) chain.plugin_deviance = parse_double(rows[1][1], "dic.csv");
  }
  return chain;
}

}  // namespace dsnb
