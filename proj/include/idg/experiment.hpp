#pragma once

// End-to-end reconstruction pipeline and the replicated benchmark harness:
// instance replicates x run replicates over a (p, sigma) grid, with CSV / TSV /
// JSON reports.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <atomic>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "idg/core.hpp"
#include "idg/instance_gen.hpp"
#include "idg/io.hpp"
#include "idg/layout.hpp"
#include "idg/local_opt.hpp"
#include "idg/maxent.hpp"
#include "idg/metrics.hpp"
#include "idg/pdb.hpp"

namespace idg {

// ---------------------------------------------------------------------------
// pipeline

inline Embedding initial_layout(const Instance& inst, const SolverConfig& cfg) {
  const std::size_t n = inst.vertex_count();
  auto d = midpoint_distances(inst);
  Embedding x;
  switch (cfg.init) {
    case InitialLayout::random_cube: {
      double mean_d = 0;
      for (double v : d) mean_d += v;
      mean_d = d.empty() ? 1.0 : std::max(mean_d / static_cast<double>(d.size()), 1e-3);
      x = layout_random_cube(n, mean_d * std::cbrt(static_cast<double>(std::max<std::size_t>(n, 1))), cfg.seed);
      break;
    }
    case InitialLayout::hypersphere:
      x = layout_hypersphere(inst.graph, d, cfg.seed);
      break;
    case InitialLayout::pivot_mds:
      if (n >= 3 && inst.edge_count() > 0)
        x = layout_pivot_mds(inst.graph, d, std::min(n, std::max<std::size_t>(cfg.pivots, 3)), cfg.seed);
      else
        x = layout_hypersphere(inst.graph, d, cfg.seed);
      break;
  }

  // a flat start stays flat under majorization; lift degenerate axes
  double extent[3] = {0, 0, 0};
  for (const auto& p : x)
    for (int a = 0; a < 3; ++a) extent[a] = std::max(extent[a], std::abs(p[a]));
  double largest = std::max({extent[0], extent[1], extent[2], 1e-3});
  std::mt19937_64 rng(hash_combine(cfg.seed, 0x11f7));
  std::uniform_real_distribution<double> jitter(-1e-3 * largest, 1e-3 * largest);
  for (int a = 0; a < 3; ++a)
    if (extent[a] < 1e-6 * largest)
      for (auto& p : x) p[a] += jitter(rng);
  return x;
}

struct PipelineResult {
  Embedding x;
  Embedding after_maxent;
  SolveTrace trace;
  RefineResult refine;
  double seconds = 0;
};

/// Initial layout, maxent-stress, then local refinement.
inline PipelineResult reconstruct(const Instance& inst, const SolverConfig& cfg,
                                  const RefineConfig& refine_cfg, bool refine = true) {
  PipelineResult res;
  auto start = std::chrono::steady_clock::now();
  auto init = initial_layout(inst, cfg);
  auto solved = maxent_solve(inst, cfg, init);
  res.trace = std::move(solved.trace);
  res.after_maxent = solved.x;
  if (refine && inst.edge_count() > 0) {
    RefineConfig rc = refine_cfg;
    rc.sa.seed = cfg.seed;
    rc.sa.threads = cfg.threads;
    res.refine = refine_workflow(inst, solved.x, rc);
    res.x = res.refine.x;
  } else {
    res.x = std::move(solved.x);
  }
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

// ---------------------------------------------------------------------------
// experiment specification

enum class Recipe { normal, bonds, weighted };

inline Recipe parse_recipe(std::string_view s) {
  if (s == "normal") return Recipe::normal;
  if (s == "bonds") return Recipe::bonds;
  if (s == "weighted") return Recipe::weighted;
  throw ValidationError("unknown recipe '" + std::string(s) + "'");
}

inline std::string to_string(Recipe r) {
  switch (r) {
    case Recipe::normal: return "normal";
    case Recipe::bonds: return "bonds";
    case Recipe::weighted: return "weighted";
  }
  return "?";
}

inline InitialLayout parse_layout(std::string_view s) {
  if (s == "pivot-mds" || s == "pivot_mds") return InitialLayout::pivot_mds;
  if (s == "hypersphere") return InitialLayout::hypersphere;
  if (s == "random-cube" || s == "random_cube") return InitialLayout::random_cube;
  throw ValidationError("unknown initial layout '" + std::string(s) + "'");
}

enum class ReportFormat { csv, tsv, json };

inline ReportFormat parse_format(std::string_view s) {
  if (s == "csv") return ReportFormat::csv;
  if (s == "tsv") return ReportFormat::tsv;
  if (s == "json") return ReportFormat::json;
  throw ValidationError("unknown report format '" + std::string(s) + "'");
}

struct ExperimentSpec {
  /// A PDB path, "synthetic-chain:<n>[:<seed>]" or "synthetic-cloud:<n>:<side>[:<seed>]".
  std::string input;
  Recipe recipe = Recipe::normal;
  std::vector<double> p_values{0.5};
  std::vector<double> sigma_values{0.1};
  double cutoff = default_contact_cutoff;
  int instances = 3;
  int runs = 3;
  std::uint64_t seed = 1;
  SolverConfig solver;
  RefineConfig refine;
  bool run_refine = true;
  bool record_time = true;
  int threads = 1;
  std::string out_dir = ".";
  ReportFormat format = ReportFormat::csv;

  void validate() const {
    if (input.empty()) throw ValidationError("experiment: no input given");
    if (instances < 1 || runs < 1) throw ValidationError("experiment: replicates must be >= 1");
    if (p_values.empty() || sigma_values.empty()) throw ValidationError("experiment: empty p or sigma grid");
    for (double p : p_values)
      if (!(p > 0 && p <= 1) && !(recipe == Recipe::bonds && p == 0))
        throw ValidationError("experiment: p must lie in (0,1]");
    for (double s : sigma_values)
      if (!(s >= 0)) throw ValidationError("experiment: sigma must be non-negative");
    solver.validate();
  }
};

namespace detail {

inline std::vector<double> parse_list(std::string_view s, const std::string& key) {
  std::vector<double> out;
  std::size_t i = 0;
  while (i <= s.size()) {
    auto j = s.find(',', i);
    if (j == std::string_view::npos) j = s.size();
    auto tok = trim(s.substr(i, j - i));
    if (!tok.empty()) out.push_back(parse_number<double>(tok, 0, key.c_str()));
    i = j + 1;
  }
  return out;
}

inline bool parse_bool(std::string_view s) {
  if (s == "1" || s == "true" || s == "on" || s == "yes") return true;
  if (s == "0" || s == "false" || s == "off" || s == "no") return false;
  throw ValidationError("expected a boolean, got '" + std::string(s) + "'");
}

}  // namespace detail

/// Applies one "key value" setting; shared by spec files and CLI overrides.
inline void apply_setting(ExperimentSpec& spec, const std::string& key, std::string_view value) {
  using detail::parse_number;
  auto num = [&](const char* what) { return parse_number<double>(value, 0, what); };
  auto integer = [&](const char* what) { return parse_number<long long>(value, 0, what); };
  if (key == "input") spec.input = std::string(value);
  else if (key == "recipe") spec.recipe = parse_recipe(value);
  else if (key == "p") spec.p_values = detail::parse_list(value, key);
  else if (key == "sigma") spec.sigma_values = detail::parse_list(value, key);
  else if (key == "cutoff") spec.cutoff = value == "inf" ? std::numeric_limits<double>::infinity() : num("cutoff");
  else if (key == "instances") spec.instances = static_cast<int>(integer("instances"));
  else if (key == "runs") spec.runs = static_cast<int>(integer("runs"));
  else if (key == "seed") spec.seed = parse_number<std::uint64_t>(value, 0, "seed");
  else if (key == "threads") spec.threads = static_cast<int>(integer("threads"));
  else if (key == "out") spec.out_dir = std::string(value);
  else if (key == "format") spec.format = parse_format(value);
  else if (key == "timing") spec.record_time = detail::parse_bool(value);
  else if (key == "refine") spec.run_refine = detail::parse_bool(value);
  else if (key == "annealing") spec.refine.run_sa = detail::parse_bool(value);
  else if (key == "alpha_start") spec.solver.alpha_start = num("alpha_start");
  else if (key == "alpha_end") spec.solver.alpha_end = num("alpha_end");
  else if (key == "alpha_rate") spec.solver.alpha_rate = num("alpha_rate");
  else if (key == "q") spec.solver.q = value == "auto" ? std::optional<double>{} : std::optional<double>{num("q")};
  else if (key == "solves_per_alpha") spec.solver.solves_per_alpha = static_cast<int>(integer("solves_per_alpha"));
  else if (key == "conv_tol") spec.solver.conv_tol = num("conv_tol");
  else if (key == "cg_tol") spec.solver.cg_tol = num("cg_tol");
  else if (key == "cg_max_iter") spec.solver.cg_max_iter = static_cast<int>(integer("cg_max_iter"));
  else if (key == "theta") spec.solver.theta = num("theta");
  else if (key == "pivots") spec.solver.pivots = static_cast<std::size_t>(integer("pivots"));
  else if (key == "init") spec.solver.init = parse_layout(value);
  else if (key == "normalize_entropy") spec.solver.normalize_entropy = detail::parse_bool(value);
  else if (key == "exact_entropy") spec.solver.exact_entropy = detail::parse_bool(value);
  else if (key == "early_alpha_exit") spec.solver.early_alpha_exit = detail::parse_bool(value);
  else throw ValidationError("unknown experiment setting '" + key + "'");
}

/// Plain "key = value" (or "key value") lines; '#' starts a comment.
inline ExperimentSpec parse_experiment_spec(std::istream& in) {
  ExperimentSpec spec;
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line = raw;
    if (auto h = line.find('#'); h != std::string_view::npos) line = line.substr(0, h);
    line = detail::trim(line);
    if (line.empty()) continue;
    std::size_t split = line.find('=');
    std::string_view key, value;
    if (split != std::string_view::npos) {
      key = detail::trim(line.substr(0, split));
      value = detail::trim(line.substr(split + 1));
    } else {
      split = line.find_first_of(" \t");
      if (split == std::string_view::npos) throw ParseError("setting without value", lineno);
      key = line.substr(0, split);
      value = detail::trim(line.substr(split));
    }
    try {
      apply_setting(spec, std::string(key), value);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), lineno);
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  return spec;
}

inline ExperimentSpec read_experiment_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path, 0);
  return parse_experiment_spec(in);
}

/// Resolves the input of an experiment into atoms.
inline AtomSet load_atoms(const std::string& input, std::uint64_t seed) {
  auto fields = [&] {
    std::vector<std::string> f;
    std::stringstream ss(input);
    std::string tok;
    while (std::getline(ss, tok, ':')) f.push_back(tok);
    return f;
  }();
  auto number = [&](std::size_t i) { return detail::parse_number<double>(fields.at(i), 0, "synthetic parameter"); };
  try {
    if (fields[0] == "synthetic-chain") {
      ChainSpec cs;
      cs.n = static_cast<std::size_t>(number(1));
      cs.seed = fields.size() > 2 ? static_cast<std::uint64_t>(number(2)) : seed;
      return synthetic_chain(cs);
    }
    if (fields[0] == "synthetic-cloud") {
      auto s = fields.size() > 3 ? static_cast<std::uint64_t>(number(3)) : seed;
      return synthetic_cloud(static_cast<std::size_t>(number(1)), number(2), s);
    }
  } catch (const std::out_of_range&) {
    throw ValidationError("malformed synthetic input '" + input + "'");
  }
  auto atoms = read_pdb_file(input);
  if (atoms.empty()) throw ValidationError("no ATOM records in " + input);
  return atoms;
}

inline Instance generate_instance(const AtomSet& atoms, Recipe recipe, double p, double sigma,
                                  double cutoff, std::uint64_t seed, const std::string& source) {
  switch (recipe) {
    case Recipe::normal: return gen_normal_instance(atoms, {p, sigma, cutoff, seed}, source);
    case Recipe::bonds: return gen_bonds_instance(atoms, {p, sigma, cutoff, seed}, source);
    case Recipe::weighted: return gen_weighted_instance(atoms, p, seed, cutoff, source);
  }
  throw ValidationError("unknown recipe");
}

// ---------------------------------------------------------------------------
// reports

struct ReportRow {
  double p = 0;
  double sigma = 0;
  int instance = 0;
  int run = 0;
  std::uint64_t seed = 0;
  double rmsd = std::numeric_limits<double>::quiet_NaN();
  double ldme = std::numeric_limits<double>::quiet_NaN();
  std::size_t violations = 0;
  double seconds = 0;
  std::string error;
};

struct AggregateRow {
  double p = 0;
  double sigma = 0;
  int instance = 0;
  int runs = 0;
  double rmsd_mean = 0, rmsd_std = 0;
  double ldme_mean = 0, ldme_std = 0;
  double time_mean = 0, time_std = 0;
};

struct PlotRow {
  double p = 0;
  double sigma = 0;
  double rmsd_mean = 0;
  int rows = 0;
};

struct Report {
  std::vector<ReportRow> rows;
  std::vector<AggregateRow> aggregates;
  std::vector<PlotRow> plot;
};

namespace detail {

inline std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  double m = 0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  s = v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0;
  return {m, s};
}

}  // namespace detail

/// Groups rows by (p, sigma, instance) for means / sample standard deviations
/// and by (p, sigma) for plot data, in order of first appearance. Failed rows
/// are left out of the statistics.
inline void aggregate(Report& r) {
  r.aggregates.clear();
  r.plot.clear();
  auto same_cell = [](const ReportRow& a, double p, double s) { return a.p == p && a.sigma == s; };
  for (const auto& row : r.rows) {
    bool seen = false;
    for (const auto& a : r.aggregates)
      if (a.p == row.p && a.sigma == row.sigma && a.instance == row.instance) seen = true;
    if (seen) continue;
    std::vector<double> rm, ld, tm;
    for (const auto& o : r.rows)
      if (same_cell(o, row.p, row.sigma) && o.instance == row.instance && o.error.empty()) {
        rm.push_back(o.rmsd);
        ld.push_back(o.ldme);
        tm.push_back(o.seconds);
      }
    AggregateRow a;
    a.p = row.p;
    a.sigma = row.sigma;
    a.instance = row.instance;
    a.runs = static_cast<int>(rm.size());
    std::tie(a.rmsd_mean, a.rmsd_std) = detail::mean_std(rm);
    std::tie(a.ldme_mean, a.ldme_std) = detail::mean_std(ld);
    std::tie(a.time_mean, a.time_std) = detail::mean_std(tm);
    r.aggregates.push_back(a);
  }
  for (const auto& row : r.rows) {
    bool seen = false;
    for (const auto& c : r.plot)
      if (c.p == row.p && c.sigma == row.sigma) seen = true;
    if (seen) continue;
    std::vector<double> rm;
    for (const auto& o : r.rows)
      if (same_cell(o, row.p, row.sigma) && o.error.empty()) rm.push_back(o.rmsd);
    r.plot.push_back({row.p, row.sigma, detail::mean_std(rm).first, static_cast<int>(rm.size())});
  }
}

/// Runs the replicated pipeline. Instance i of a cell is generated with seed
/// `seed + 1000 i`, run j solved with seed `seed + 1000 i + j`. A failing run
/// is recorded in its row and does not stop the batch.
inline Report run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const AtomSet atoms = load_atoms(spec.input, spec.seed);

  struct Task {
    const Instance* inst;
    ReportRow row;
  };
  std::vector<Instance> instances;
  std::vector<std::string> gen_errors;
  std::vector<std::tuple<double, double, int>> keys;
  for (double p : spec.p_values)
    for (double s : spec.sigma_values)
      for (int i = 0; i < spec.instances; ++i) keys.emplace_back(p, s, i);
  instances.reserve(keys.size());
  for (const auto& [p, s, i] : keys) {
    try {
      instances.push_back(generate_instance(atoms, spec.recipe, p, s, spec.cutoff,
                                            spec.seed + 1000ULL * static_cast<std::uint64_t>(i), spec.input));
      gen_errors.emplace_back();
    } catch (const std::exception& e) {
      instances.emplace_back();
      gen_errors.emplace_back(e.what());
    }
  }

  std::vector<Task> tasks;
  for (std::size_t k = 0; k < keys.size(); ++k) {
    const auto& [p, s, i] = keys[k];
    for (int j = 0; j < spec.runs; ++j) {
      ReportRow row;
      row.p = p;
      row.sigma = s;
      row.instance = i;
      row.run = j;
      row.seed = spec.seed + 1000ULL * static_cast<std::uint64_t>(i) + static_cast<std::uint64_t>(j);
      row.error = gen_errors[k];
      tasks.push_back({&instances[k], row});
    }
  }

  auto execute = [&](Task& task) {
    if (!task.row.error.empty()) return;
    try {
      SolverConfig cfg = spec.solver;
      cfg.seed = task.row.seed;
      cfg.threads = 1;
      auto res = reconstruct(*task.inst, cfg, spec.refine, spec.run_refine);
      task.row.seconds = spec.record_time ? res.seconds : 0.0;
      task.row.rmsd = rmsd(res.x, *task.inst->reference);
      task.row.ldme = ldme(res.x, *task.inst);
      task.row.violations = violation_stats(res.x, *task.inst).count;
    } catch (const std::exception& e) {
      task.row.error = e.what();
    }
  };

  const int threads = std::max(1, spec.threads);
  if (threads == 1) {
    for (auto& t : tasks) execute(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t k; (k = next.fetch_add(1)) < tasks.size();) execute(tasks[k]);
      });
  }

  Report report;
  for (auto& t : tasks) report.rows.push_back(std::move(t.row));
  aggregate(report);
  return report;
}

namespace detail {

inline std::string cell(double v) { return std::isnan(v) ? "nan" : format_real(v); }

inline std::string quote_if_needed(const std::string& s, char sep) {
  if (s.find(sep) == std::string::npos && s.find('"') == std::string::npos &&
      s.find('\n') == std::string::npos)
    return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + '"';
}

inline void write_table(std::ostream& out, char sep, const std::vector<std::string>& header,
                        const std::vector<std::vector<std::string>>& rows) {
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? std::string(1, sep) : "") << header[i];
  out << '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i)
      out << (i ? std::string(1, sep) : "") << quote_if_needed(r[i], sep);
    out << '\n';
  }
}

}  // namespace detail

inline const std::vector<std::string>& row_columns() {
  static const std::vector<std::string> cols{"p",      "sigma", "instance",   "run", "seed",
                                             "rmsd_A", "ldme",  "violations", "time_s", "error"};
  return cols;
}

inline const std::vector<std::string>& aggregate_columns() {
  static const std::vector<std::string> cols{"p",         "sigma",    "instance",  "runs",
                                             "rmsd_mean", "rmsd_std", "ldme_mean", "ldme_std",
                                             "time_mean", "time_std"};
  return cols;
}

inline const std::vector<std::string>& plot_columns() {
  static const std::vector<std::string> cols{"p", "sigma", "rmsd_mean", "rows"};
  return cols;
}

struct ReportFiles {
  std::filesystem::path rows, aggregate, plot;
};

/// Writes rows.<ext>, aggregate.<ext> and plot.<ext> into `dir`.
inline ReportFiles emit_report(const Report& r, const std::filesystem::path& dir, ReportFormat format) {
  std::filesystem::create_directories(dir);
  const std::string ext = format == ReportFormat::csv ? ".csv" : format == ReportFormat::tsv ? ".tsv" : ".json";
  ReportFiles files{dir / ("rows" + ext), dir / ("aggregate" + ext), dir / ("plot" + ext)};

  using detail::cell;
  std::vector<std::vector<std::string>> rows, aggs, plot;
  for (const auto& x : r.rows)
    rows.push_back({cell(x.p), cell(x.sigma), std::to_string(x.instance), std::to_string(x.run),
                    std::to_string(x.seed), cell(x.rmsd), cell(x.ldme), std::to_string(x.violations),
                    cell(x.seconds), x.error});
  for (const auto& a : r.aggregates)
    aggs.push_back({cell(a.p), cell(a.sigma), std::to_string(a.instance), std::to_string(a.runs),
                    cell(a.rmsd_mean), cell(a.rmsd_std), cell(a.ldme_mean), cell(a.ldme_std),
                    cell(a.time_mean), cell(a.time_std)});
  for (const auto& c : r.plot)
    plot.push_back({cell(c.p), cell(c.sigma), cell(c.rmsd_mean), std::to_string(c.rows)});

  auto write = [&](const std::filesystem::path& path, const std::vector<std::string>& header,
                   const std::vector<std::vector<std::string>>& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    if (format == ReportFormat::json) {
      nlohmann::ordered_json arr = nlohmann::ordered_json::array();
      for (const auto& b : body) {
        nlohmann::ordered_json obj;
        for (std::size_t i = 0; i < header.size(); ++i) obj[header[i]] = b[i];
        arr.push_back(std::move(obj));
      }
      out << arr.dump(2) << '\n';
    } else {
      detail::write_table(out, format == ReportFormat::csv ? ',' : '\t', header, body);
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
  };
  write(files.rows, row_columns(), rows);
  write(files.aggregate, aggregate_columns(), aggs);
  write(files.plot, plot_columns(), plot);
  return files;
}

}  // namespace idg
