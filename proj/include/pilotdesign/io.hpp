#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pilotdesign/design.hpp"
#include "pilotdesign/simulate.hpp"
#include "pilotdesign/types.hpp"

namespace pilotdesign {

enum class DenseLayout { wide, lng };

inline DenseLayout layout_from_string(const std::string& s) {
  if (s == "wide") return DenseLayout::wide;
  if (s == "long") return DenseLayout::lng;
  throw InvalidSpec("unknown dense layout: " + s + " (expected wide or long)");
}

namespace detail {

// Fixed 12-significant-digit formatting for all CSV floats: deterministic
// bytes and ~1e-12 relative round-trip error.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  for (const char c : line) {
    if (c == ',') {
      out.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  out.push_back(field);
  return out;
}

inline double parse_double(const std::string& s, const std::string& path, int line_no) {
  if (s.empty() || s == "NA" || s == "nan" || s == "NaN")
    return std::numeric_limits<double>::quiet_NaN();
  char* end = nullptr;
  const double x = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size())
    throw ParseError(path + ":" + std::to_string(line_no) + ": bad number '" + s + "'");
  return x;
}

inline long parse_long(const std::string& s, const std::string& path, int line_no) {
  char* end = nullptr;
  const long x = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size())
    throw ParseError(path + ":" + std::to_string(line_no) + ": bad integer '" + s + "'");
  return x;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  return out;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  return in;
}

// Numeric-aware subject-id ordering: numeric ids sort numerically before
// non-numeric ids, which sort lexicographically. Makes long-layout ingestion
// independent of row order.
inline bool subject_id_less(const std::string& a, const std::string& b) {
  char* ea = nullptr;
  char* eb = nullptr;
  const long na = std::strtol(a.c_str(), &ea, 10);
  const long nb = std::strtol(b.c_str(), &eb, 10);
  const bool numa = !a.empty() && ea == a.c_str() + a.size();
  const bool numb = !b.empty() && eb == b.c_str() + b.size();
  if (numa && numb) return na != nb ? na < nb : a < b;
  if (numa != numb) return numa;
  return a < b;
}

// Type-7 (linear interpolation) quantile of a sorted sample.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double pos = p * (sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - lo;
  return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

inline std::string sidecar_path(const std::string& design_path) {
  return design_path + ".meta.json";
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Design CSV + metadata sidecar

inline void write_design_csv(const IncidenceMatrix& design, const std::string& path) {
  std::ofstream out = detail::open_out(path);
  for (int j = 0; j < design.grid_size; ++j) out << (j ? "," : "") << "t" << (j + 1);
  out << "\n";
  for (int i = 0; i < design.n_subjects; ++i) {
    for (int j = 0; j < design.grid_size; ++j) out << (j ? "," : "") << int(design(i, j));
    out << "\n";
  }
  if (!out) throw IoError("failed writing " + path);
}

inline void write_design_metadata(const IncidenceMatrix& design, const DesignSpec& spec,
                                  const std::string& design_path) {
  const TargetConcurrence target = target_concurrence(spec);
  const ConcurrenceDeviation dev = concurrence_deviation(design, target);
  nlohmann::json j;
  j["spec"] = {{"n_subjects", spec.n_subjects},
               {"grid_size", spec.grid_size},
               {"obs_per_subject", spec.obs_per_subject},
               {"snippet_frac", spec.snippet_frac},
               {"concurrence_tol", spec.concurrence_tol},
               {"snippet_gap", spec.snippet_gap},
               {"seed", spec.seed}};
  j["structure"] = to_string(design.structure);
  j["snippet_rows"] = design.snippet_rows;
  j["targets"] = {{"diagonal", target.diagonal},
                  {"adjacent", target.adjacent},
                  {"distant", target.distant},
                  {"distant_subject_denominator", distant_target_subject_denominator(spec)}};
  j["achieved_max_deviation"] = {
      {"diagonal", dev.diagonal}, {"adjacent", dev.adjacent}, {"distant", dev.distant}};
  std::ofstream out = detail::open_out(detail::sidecar_path(design_path));
  out << j.dump(2) << "\n";
  if (!out) throw IoError("failed writing " + detail::sidecar_path(design_path));
}

inline IncidenceMatrix read_design_csv(const std::string& path) {
  std::ifstream in = detail::open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ":1: empty design file");
  const std::vector<std::string> header = detail::split_csv(line);
  const int v = static_cast<int>(header.size());
  for (int j = 0; j < v; ++j)
    if (header[j] != "t" + std::to_string(j + 1))
      throw ParseError(path + ":1: expected header t1..t" + std::to_string(v));

  std::vector<std::uint8_t> cells;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> fields = detail::split_csv(line);
    if (static_cast<int>(fields.size()) != v)
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(v) +
                       " fields");
    for (const std::string& f : fields) {
      if (f != "0" && f != "1")
        throw ParseError(path + ":" + std::to_string(line_no) + ": design entries must be 0 or 1");
      cells.push_back(f == "1" ? 1 : 0);
    }
  }
  if (cells.empty()) throw ParseError(path + ": design has no rows");

  IncidenceMatrix m(static_cast<int>(cells.size()) / v, v, DesignStructure::random);
  m.cells = std::move(cells);

  const std::string meta = detail::sidecar_path(path);
  if (std::filesystem::exists(meta)) {
    std::ifstream min = detail::open_in(meta);
    nlohmann::json j;
    min >> j;
    if (j.contains("structure")) m.structure = structure_from_string(j["structure"]);
    if (j.contains("snippet_rows")) m.snippet_rows = j["snippet_rows"];
  }
  return m;
}

// ---------------------------------------------------------------------------
// Model JSON

inline void write_model_json(const FpcaModel& model, const std::string& path) {
  nlohmann::json j;
  j["grid"] = std::vector<double>(model.grid.data(), model.grid.data() + model.grid.size());
  j["mean"] = std::vector<double>(model.mean.data(), model.mean.data() + model.mean.size());
  j["eigenvalues"] =
      std::vector<double>(model.eigenvalues.data(), model.eigenvalues.data() + model.eigenvalues.size());
  std::vector<double> psi;  // row-major v x M
  for (int r = 0; r < model.eigenfunctions.rows(); ++r)
    for (int c = 0; c < model.eigenfunctions.cols(); ++c) psi.push_back(model.eigenfunctions(r, c));
  j["eigenfunctions"] = psi;
  j["n_components"] = model.components();
  j["error_variance"] = model.error_variance;
  j["fve"] = model.fve;
  const char* mode = model.options.smoothing == FitOptions::Smoothing::gcv     ? "gcv"
                     : model.options.smoothing == FitOptions::Smoothing::fixed ? "fixed"
                                                                               : "none";
  j["options"] = {{"smoothing", mode},
                  {"mean_bandwidth", model.options.mean_bandwidth},
                  {"cov_bandwidth", model.options.cov_bandwidth},
                  {"fve_threshold", model.options.fve_threshold},
                  {"max_components", model.options.max_components},
                  {"fixed_components", model.options.fixed_components},
                  {"error_center_fraction", model.options.error_center_fraction},
                  {"ridge_scale", model.options.ridge_scale},
                  {"condition_limit", model.options.condition_limit}};
  std::ofstream out = detail::open_out(path);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("failed writing " + path);
}

inline FpcaModel read_model_json(const std::string& path) {
  std::ifstream in = detail::open_in(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  FpcaModel model;
  const std::vector<double> grid = j.at("grid");
  const std::vector<double> mean = j.at("mean");
  const std::vector<double> lambda = j.at("eigenvalues");
  const std::vector<double> psi = j.at("eigenfunctions");
  const int v = static_cast<int>(grid.size());
  const int m = static_cast<int>(lambda.size());
  if (static_cast<int>(mean.size()) != v || static_cast<int>(psi.size()) != v * m)
    throw ParseError(path + ": inconsistent model dimensions");
  model.grid = Eigen::Map<const Eigen::VectorXd>(grid.data(), v);
  model.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), v);
  model.eigenvalues = Eigen::Map<const Eigen::VectorXd>(lambda.data(), m);
  model.eigenfunctions.resize(v, m);
  for (int r = 0; r < v; ++r)
    for (int c = 0; c < m; ++c) model.eigenfunctions(r, c) = psi[static_cast<std::size_t>(r) * m + c];
  model.error_variance = j.at("error_variance");
  model.fve = j.value("fve", 1.0);
  if (j.contains("options")) {
    const auto& o = j["options"];
    const std::string mode = o.value("smoothing", "gcv");
    model.options.smoothing = mode == "fixed" ? FitOptions::Smoothing::fixed
                              : mode == "none" ? FitOptions::Smoothing::none
                                               : FitOptions::Smoothing::gcv;
    model.options.mean_bandwidth = o.value("mean_bandwidth", 0.0);
    model.options.cov_bandwidth = o.value("cov_bandwidth", 0.0);
    model.options.fve_threshold = o.value("fve_threshold", 0.95);
    model.options.max_components = o.value("max_components", 20);
    model.options.fixed_components = o.value("fixed_components", 0);
    model.options.error_center_fraction = o.value("error_center_fraction", 0.5);
    model.options.ridge_scale = o.value("ridge_scale", 1e-8);
    model.options.condition_limit = o.value("condition_limit", 1e12);
  }
  // The covariance surface is reconstructible from the retained eigenpairs.
  model.covariance =
      model.eigenfunctions * model.eigenvalues.asDiagonal() * model.eigenfunctions.transpose();
  return model;
}

// ---------------------------------------------------------------------------
// Experiment records and summaries

inline void write_results_csv(const std::vector<ExperimentRecord>& records, const std::string& path) {
  std::ofstream out = detail::open_out(path);
  out << "structure,n,dataset_id,design_id,metric,value\n";
  for (const auto& r : records)
    out << r.structure << "," << r.n_subjects << "," << r.dataset_id << "," << r.design_id << ","
        << r.metric << "," << detail::format_double(r.value) << "\n";
  if (!out) throw IoError("failed writing " + path);
}

inline std::vector<ExperimentRecord> read_results_csv(const std::string& path) {
  std::ifstream in = detail::open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ":1: empty results file");
  if (detail::split_csv(line) != std::vector<std::string>{"structure", "n", "dataset_id", "design_id",
                                                          "metric", "value"})
    throw ParseError(path + ":1: unexpected results header");
  std::vector<ExperimentRecord> records;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> f = detail::split_csv(line);
    if (f.size() != 6) throw ParseError(path + ":" + std::to_string(line_no) + ": expected 6 fields");
    ExperimentRecord r;
    r.structure = f[0];
    r.n_subjects = static_cast<int>(detail::parse_long(f[1], path, line_no));
    r.dataset_id = static_cast<int>(detail::parse_long(f[2], path, line_no));
    r.design_id = static_cast<int>(detail::parse_long(f[3], path, line_no));
    r.metric = f[4];
    r.value = detail::parse_double(f[5], path, line_no);
    records.push_back(std::move(r));
  }
  return records;
}

// Box-plot five-number summaries of the across-dataset means, one row per
// (structure, n, metric).
inline void write_summary_csv(const std::vector<ExperimentRecord>& records, const std::string& path) {
  std::map<std::tuple<std::string, int, std::string>, std::vector<double>> groups;
  for (const auto& r : records) {
    if (r.dataset_id != -1 || r.metric == "failed") continue;
    groups[{r.structure, r.n_subjects, r.metric}].push_back(r.value);
  }
  std::ofstream out = detail::open_out(path);
  out << "structure,n,metric,min,q1,median,q3,max\n";
  for (auto& [key, values] : groups) {
    std::sort(values.begin(), values.end());
    out << std::get<0>(key) << "," << std::get<1>(key) << "," << std::get<2>(key);
    for (const double p : {0.0, 0.25, 0.5, 0.75, 1.0})
      out << "," << detail::format_double(detail::quantile_sorted(values, p));
    out << "\n";
  }
  if (!out) throw IoError("failed writing " + path);
}

inline std::string joined_indices(const CandidateDesign& t) {
  std::string s;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (i) s += "-";
    s += std::to_string(t[i] + 1);  // 1-based in files
  }
  return s;
}

// One evaluation row per (dataset, design, structure); appends, writing the
// header only when the file is new.
inline void append_report_csv(const CriterionReport& report, const std::string& structure, int n,
                              std::uint64_t seed, const std::string& path) {
  const bool fresh = !std::filesystem::exists(path);
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot open for appending: " + path);
  if (fresh) out << "structure,n,seed,are,rrmse,composite,t_opt,t_star\n";
  out << structure << "," << n << "," << seed << "," << detail::format_double(report.are) << ","
      << detail::format_double(report.rrmse) << "," << detail::format_double(report.composite) << ","
      << joined_indices(report.t_opt) << "," << joined_indices(report.t_star) << "\n";
  if (!out) throw IoError("failed writing " + path);
}

// ---------------------------------------------------------------------------
// Dense longitudinal data

inline void write_dense_csv(const DenseDataset& data, const std::string& path, DenseLayout layout) {
  std::ofstream out = detail::open_out(path);
  const int v = static_cast<int>(data.grid.size());
  if (layout == DenseLayout::wide) {
    out << "subject";
    for (int j = 0; j < v; ++j) out << ",t" << (j + 1);
    out << "\n";
    for (int i = 0; i < data.n_subjects(); ++i) {
      out << data.subject_ids[i];
      for (int j = 0; j < v; ++j) {
        out << ",";
        if (!std::isnan(data.values(i, j))) out << detail::format_double(data.values(i, j));
      }
      out << "\n";
    }
  } else {
    out << "subject,time,value\n";
    for (int i = 0; i < data.n_subjects(); ++i)
      for (int j = 0; j < v; ++j)
        if (!std::isnan(data.values(i, j)))
          out << data.subject_ids[i] << "," << detail::format_double(data.grid(j)) << ","
              << detail::format_double(data.values(i, j)) << "\n";
  }
  if (!out) throw IoError("failed writing " + path);
}

inline DenseDataset ingest_dense_csv(const std::string& path, DenseLayout layout) {
  std::ifstream in = detail::open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ":1: empty file");
  const std::vector<std::string> header = detail::split_csv(line);
  DenseDataset data;

  if (layout == DenseLayout::wide) {
    if (header.size() < 2 || header[0] != "subject")
      throw ParseError(path + ":1: expected header subject,t1,...");
    const int v = static_cast<int>(header.size()) - 1;
    for (int j = 0; j < v; ++j)
      if (header[j + 1] != "t" + std::to_string(j + 1))
        throw ParseError(path + ":1: expected grid columns t1..t" + std::to_string(v));
    data.grid.resize(v);
    for (int j = 0; j < v; ++j) data.grid(j) = j + 1;  // wide files carry index time 1..v

    std::vector<std::vector<double>> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const std::vector<std::string> f = detail::split_csv(line);
      if (static_cast<int>(f.size()) != v + 1)
        throw ParseError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(v + 1) +
                         " fields");
      data.subject_ids.push_back(f[0]);
      std::vector<double> row(v);
      for (int j = 0; j < v; ++j) row[j] = detail::parse_double(f[j + 1], path, line_no);
      rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError(path + ": no subject rows");
    data.values.resize(rows.size(), v);
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (int j = 0; j < v; ++j) data.values(static_cast<int>(i), j) = rows[i][j];
    return data;
  }

  if (header != std::vector<std::string>{"subject", "time", "value"})
    throw ParseError(path + ":1: expected header subject,time,value");
  struct Obs {
    std::string subject;
    double time;
    double value;
  };
  std::vector<Obs> obs;
  std::vector<double> times;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> f = detail::split_csv(line);
    if (f.size() != 3) throw ParseError(path + ":" + std::to_string(line_no) + ": expected 3 fields");
    const double t = detail::parse_double(f[1], path, line_no);
    if (std::isnan(t)) throw ParseError(path + ":" + std::to_string(line_no) + ": missing time");
    obs.push_back({f[0], t, detail::parse_double(f[2], path, line_no)});
    times.push_back(t);
  }
  if (obs.empty()) throw ParseError(path + ": no observations");

  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  data.grid.resize(times.size());
  for (std::size_t j = 0; j < times.size(); ++j) data.grid(j) = times[j];

  std::vector<std::string> ids;
  for (const auto& o : obs) ids.push_back(o.subject);
  std::sort(ids.begin(), ids.end(), detail::subject_id_less);
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  data.subject_ids = ids;

  const auto grid_index = [&](double t) {
    return static_cast<int>(std::lower_bound(times.begin(), times.end(), t) - times.begin());
  };
  std::map<std::string, int> row_of;
  for (std::size_t i = 0; i < ids.size(); ++i) row_of[ids[i]] = static_cast<int>(i);
  data.values = Eigen::MatrixXd::Constant(ids.size(), times.size(),
                                          std::numeric_limits<double>::quiet_NaN());
  for (const auto& o : obs) {
    const int i = row_of[o.subject];
    const int j = grid_index(o.time);
    if (!std::isnan(data.values(i, j)))
      throw DuplicateObservation(path + ": duplicate observation for subject " + o.subject +
                                 " at time " + detail::format_double(o.time));
    data.values(i, j) = o.value;
  }
  return data;
}

// ---------------------------------------------------------------------------
// Experiment configuration JSON

inline SimConfig read_config_json(const std::string& path) {
  std::ifstream in = detail::open_in(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  SimConfig c;
  c.master_seed = j.value("master_seed", static_cast<std::uint64_t>(0));
  c.grid_size = j.value("grid_size", 25);
  c.n_components = j.value("n_components", 5);
  if (j.contains("eigenvalues")) {
    const std::vector<double> lam = j["eigenvalues"];
    c.eigenvalues = Eigen::Map<const Eigen::VectorXd>(lam.data(), lam.size());
  }
  c.error_variance = j.value("error_variance", 0.96875);
  c.n_datasets = j.value("n_datasets", 10);
  c.n_designs_per_structure = j.value("n_designs_per_structure", 20);
  if (j.contains("subject_counts")) c.subject_counts = j["subject_counts"].get<std::vector<int>>();
  if (j.contains("structures")) {
    c.structures.clear();
    for (const std::string s : j["structures"]) c.structures.push_back(structure_from_string(s));
  }
  c.obs_per_subject = j.value("obs_per_subject", 5);
  c.snippet_frac = j.value("snippet_frac", 0.2);
  c.concurrence_tol = j.value("concurrence_tol", 1.0);
  c.snippet_gap = j.value("snippet_gap", 2);
  if (j.contains("thresholds")) c.thresholds = j["thresholds"].get<std::vector<double>>();
  c.composite_weight = j.value("composite_weight", 0.5);
  if (j.contains("fit")) {
    const auto& o = j["fit"];
    const std::string mode = o.value("smoothing", "gcv");
    c.fit.smoothing = mode == "fixed" ? FitOptions::Smoothing::fixed
                      : mode == "none" ? FitOptions::Smoothing::none
                                       : FitOptions::Smoothing::gcv;
    c.fit.mean_bandwidth = o.value("mean_bandwidth", 0.0);
    c.fit.cov_bandwidth = o.value("cov_bandwidth", 0.0);
    c.fit.fve_threshold = o.value("fve_threshold", 0.95);
    c.fit.max_components = o.value("max_components", 20);
    c.fit.fixed_components = o.value("fixed_components", 0);
    c.fit.error_center_fraction = o.value("error_center_fraction", 0.5);
    c.fit.ridge_scale = o.value("ridge_scale", 1e-8);
    c.fit.condition_limit = o.value("condition_limit", 1e12);
  }
  if (j.contains("search")) {
    const auto& o = j["search"];
    const std::string kind = o.value("kind", "exhaustive");
    c.search.kind = kind == "weighted_heuristic" ? SearchMethod::Kind::weighted_heuristic
                                                 : SearchMethod::Kind::exhaustive;
    c.search.samples = o.value("samples", 2000);
    c.search.seed = o.value("seed", static_cast<std::uint64_t>(0));
  }
  c.max_failure_fraction = j.value("max_failure_fraction", 0.1);
  return c;
}

// ---------------------------------------------------------------------------
// Minimal grouped box-plot SVG for one metric of the across-dataset means.

inline std::string render_boxplot_svg(const std::vector<ExperimentRecord>& records,
                                      const std::string& metric) {
  std::vector<int> counts;
  std::vector<std::string> structures;
  std::map<std::pair<int, std::string>, std::vector<double>> groups;
  for (const auto& r : records) {
    if (r.dataset_id != -1 || r.metric != metric) continue;
    groups[{r.n_subjects, r.structure}].push_back(r.value);
    if (std::find(counts.begin(), counts.end(), r.n_subjects) == counts.end())
      counts.push_back(r.n_subjects);
    if (std::find(structures.begin(), structures.end(), r.structure) == structures.end())
      structures.push_back(r.structure);
  }
  std::sort(counts.begin(), counts.end());
  if (groups.empty()) return {};

  double lo = 1e300, hi = -1e300;
  for (const auto& [key, vals] : groups)
    for (const double x : vals) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  if (hi <= lo) hi = lo + 1.0;
  const double pad = 0.08 * (hi - lo);
  lo -= pad;
  hi += pad;

  const double width = 120.0 * counts.size() + 140.0;
  const double height = 320.0;
  const double plot_left = 70.0, plot_top = 20.0, plot_bottom = 280.0;
  const auto y_of = [&](double value) {
    return plot_bottom - (value - lo) / (hi - lo) * (plot_bottom - plot_top);
  };
  const char* colors[] = {"#4477aa", "#ee6677", "#228833", "#ccbb44"};

  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
      << "' font-family='sans-serif' font-size='11'>\n";
  svg << "<text x='" << plot_left << "' y='14'>" << metric << "</text>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double value = lo + (hi - lo) * tick / 4.0;
    svg << "<line x1='" << plot_left << "' y1='" << y_of(value) << "' x2='" << width - 20 << "' y2='"
        << y_of(value) << "' stroke='#dddddd'/>\n";
    svg << "<text x='4' y='" << y_of(value) + 4 << "'>" << detail::format_double(value)
        << "</text>\n";
  }
  for (std::size_t ci = 0; ci < counts.size(); ++ci) {
    const double group_x = plot_left + 20.0 + 120.0 * ci;
    svg << "<text x='" << group_x + 30 << "' y='" << plot_bottom + 18 << "'>n=" << counts[ci]
        << "</text>\n";
    for (std::size_t si = 0; si < structures.size(); ++si) {
      auto it = groups.find({counts[ci], structures[si]});
      if (it == groups.end()) continue;
      std::vector<double> vals = it->second;
      std::sort(vals.begin(), vals.end());
      const double q0 = detail::quantile_sorted(vals, 0.0);
      const double q1 = detail::quantile_sorted(vals, 0.25);
      const double q2 = detail::quantile_sorted(vals, 0.5);
      const double q3 = detail::quantile_sorted(vals, 0.75);
      const double q4 = detail::quantile_sorted(vals, 1.0);
      const double x = group_x + 28.0 * si;
      const double w = 20.0;
      const char* color = colors[si % 4];
      svg << "<line x1='" << x + w / 2 << "' y1='" << y_of(q0) << "' x2='" << x + w / 2 << "' y2='"
          << y_of(q4) << "' stroke='" << color << "'/>\n";
      svg << "<rect x='" << x << "' y='" << y_of(q3) << "' width='" << w << "' height='"
          << y_of(q1) - y_of(q3) << "' fill='" << color << "' fill-opacity='0.35' stroke='" << color
          << "'/>\n";
      svg << "<line x1='" << x << "' y1='" << y_of(q2) << "' x2='" << x + w << "' y2='" << y_of(q2)
          << "' stroke='" << color << "' stroke-width='2'/>\n";
    }
  }
  for (std::size_t si = 0; si < structures.size(); ++si) {
    svg << "<rect x='" << plot_left + 120.0 * counts.size() << "' y='" << 30 + 18 * si
        << "' width='12' height='12' fill='" << colors[si % 4] << "' fill-opacity='0.5'/>\n";
    svg << "<text x='" << plot_left + 120.0 * counts.size() + 16 << "' y='" << 40 + 18 * si << "'>"
        << structures[si] << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace pilotdesign
