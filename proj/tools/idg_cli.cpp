// idg: generate, solve, benchmark and evaluate interval distance geometry
// instances.
//
// Exit codes: 0 success, 1 usage error, 2 input error, 3 numerical failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "idg/idg.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int exit_usage = 1;
constexpr int exit_input = 2;
constexpr int exit_numerical = 3;

struct SolverFlags {
  std::uint64_t seed = 1;
  int threads = 1;
  double alpha_start = 1.0, alpha_end = 0.008, alpha_rate = 0.3;
  std::size_t pivots = 250;
  double theta = 0.6;
  bool exact_entropy = false;
  bool no_refine = false;
  std::string init = "pivot-mds";
};

void add_solver_flags(CLI::App* app, SolverFlags& f, std::vector<CLI::Option*>& opts) {
  opts.push_back(app->add_option("--seed", f.seed, "Master seed")->envname("IDG_SEED"));
  opts.push_back(app->add_option("--threads", f.threads, "Worker threads")->envname("IDG_THREADS")->check(CLI::PositiveNumber));
  opts.push_back(app->add_option("--alpha-start", f.alpha_start, "Initial entropy weight")->envname("IDG_ALPHA_START"));
  opts.push_back(app->add_option("--alpha-end", f.alpha_end, "Final entropy weight")->envname("IDG_ALPHA_END"));
  opts.push_back(app->add_option("--alpha-rate", f.alpha_rate, "Entropy weight decay factor")->envname("IDG_ALPHA_RATE"));
  opts.push_back(app->add_option("--pivots", f.pivots, "PivotMDS pivot count")->envname("IDG_PIVOTS"));
  opts.push_back(app->add_option("--theta", f.theta, "Barnes-Hut opening parameter")->envname("IDG_THETA"));
  opts.push_back(app->add_option("--init", f.init, "Initial layout: pivot-mds, hypersphere, random-cube")->envname("IDG_INIT"));
  opts.push_back(app->add_flag("--exact-entropy", f.exact_entropy, "Quadratic entropy evaluation"));
  opts.push_back(app->add_flag("--no-refine", f.no_refine, "Skip local refinement"));
}

idg::SolverConfig make_solver_config(const SolverFlags& f) {
  idg::SolverConfig cfg;
  cfg.seed = f.seed;
  cfg.threads = f.threads;
  cfg.alpha_start = f.alpha_start;
  cfg.alpha_end = f.alpha_end;
  cfg.alpha_rate = f.alpha_rate;
  cfg.pivots = f.pivots;
  cfg.theta = f.theta;
  cfg.exact_entropy = f.exact_entropy;
  cfg.init = idg::parse_layout(f.init);
  cfg.validate();
  return cfg;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void write_metrics(const fs::path& dir, idg::ReportFormat format,
                   const std::vector<std::pair<std::string, std::string>>& fields) {
  fs::create_directories(dir);
  const char* ext = format == idg::ReportFormat::csv ? "csv" : format == idg::ReportFormat::tsv ? "tsv" : "json";
  auto out = open_output(dir / (std::string("metrics.") + ext));
  if (format == idg::ReportFormat::json) {
    nlohmann::ordered_json obj;
    for (const auto& [k, v] : fields) obj[k] = v;
    out << obj.dump(2) << '\n';
    return;
  }
  const char sep = format == idg::ReportFormat::csv ? ',' : '\t';
  for (std::size_t i = 0; i < fields.size(); ++i) out << (i ? std::string(1, sep) : "") << fields[i].first;
  out << '\n';
  for (std::size_t i = 0; i < fields.size(); ++i) out << (i ? std::string(1, sep) : "") << fields[i].second;
  out << '\n';
}

std::vector<std::pair<std::string, std::string>> metric_fields(const idg::Instance* inst,
                                                                const idg::Embedding& x,
                                                                const idg::Embedding* reference,
                                                                std::optional<double> seconds) {
  std::vector<std::pair<std::string, std::string>> f;
  if (reference) f.emplace_back("rmsd_A", idg::format_real(idg::rmsd(x, *reference)));
  if (inst && inst->edge_count() > 0) {
    auto v = idg::violation_stats(x, *inst);
    f.emplace_back("ldme", idg::format_real(idg::ldme(x, *inst)));
    f.emplace_back("violations", std::to_string(v.count));
    f.emplace_back("max_violation", idg::format_real(v.max_error));
  }
  if (seconds) f.emplace_back("time_s", idg::format_real(*seconds));
  return f;
}

void print_fields(const std::vector<std::pair<std::string, std::string>>& fields) {
  for (const auto& [k, v] : fields) std::cout << k << ' ' << v << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interval distance geometry toolkit"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Build instance files from a PDB file or a synthetic structure");
  std::string gen_input, gen_recipe = "normal", gen_out = ".";
  double gen_p = 0.5, gen_sigma = 0.1, gen_cutoff = idg::default_contact_cutoff;
  std::uint64_t gen_seed = 1;
  int gen_count = 1;
  gen->add_option("input", gen_input, "PDB path, synthetic-chain:<n>[:<seed>] or synthetic-cloud:<n>:<side>[:<seed>]")
      ->required();
  gen->add_option("--recipe", gen_recipe, "normal, bonds or weighted")->envname("IDG_RECIPE");
  gen->add_option("--p", gen_p, "Fraction of candidate distances kept")->envname("IDG_P");
  gen->add_option("--sigma", gen_sigma, "Noise standard deviation")->envname("IDG_SIGMA");
  gen->add_option("--cutoff", gen_cutoff, "Contact cutoff in Angstrom")->envname("IDG_CUTOFF");
  gen->add_option("--seed", gen_seed, "Master seed")->envname("IDG_SEED");
  gen->add_option("--instances", gen_count, "Number of instances")->check(CLI::PositiveNumber);
  gen->add_option("--out", gen_out, "Output directory")->envname("IDG_OUT");

  // solve
  auto* solve = app.add_subcommand("solve", "Reconstruct coordinates for an instance file");
  std::string solve_input, solve_out, solve_format = "csv";
  SolverFlags solve_flags;
  std::vector<CLI::Option*> solve_opts;
  solve->add_option("instance", solve_input, "Instance file")->required();
  add_solver_flags(solve, solve_flags, solve_opts);
  solve->add_option("--out", solve_out, "Output directory for solution.xyz and metrics")->envname("IDG_OUT");
  solve->add_option("--format", solve_format, "csv, tsv or json")->envname("IDG_FORMAT");

  // bench
  auto* bench = app.add_subcommand("bench", "Run a replicated experiment from a spec file");
  std::string bench_spec, bench_out, bench_format, bench_recipe, bench_p, bench_sigma, bench_timing;
  SolverFlags bench_flags;
  std::vector<CLI::Option*> bench_opts;
  bench->add_option("spec", bench_spec, "Experiment spec file")->required();
  auto* o_recipe = bench->add_option("--recipe", bench_recipe, "normal, bonds or weighted")->envname("IDG_RECIPE");
  auto* o_p = bench->add_option("--p", bench_p, "Comma-separated p values")->envname("IDG_P");
  auto* o_sigma = bench->add_option("--sigma", bench_sigma, "Comma-separated sigma values")->envname("IDG_SIGMA");
  add_solver_flags(bench, bench_flags, bench_opts);
  auto* o_out = bench->add_option("--out", bench_out, "Report directory")->envname("IDG_OUT");
  auto* o_format = bench->add_option("--format", bench_format, "csv, tsv or json")->envname("IDG_FORMAT");
  auto* o_timing = bench->add_option("--timing", bench_timing, "on or off; off writes time_s as 0")->envname("IDG_TIMING");

  // eval
  auto* eval = app.add_subcommand("eval", "Compare coordinates with a reference");
  std::string eval_input, eval_reference, eval_instance, eval_out, eval_format = "csv";
  eval->add_option("coordinates", eval_input, "XYZ file")->required();
  eval->add_option("--reference", eval_reference, "Reference XYZ or instance file with reference");
  eval->add_option("--instance", eval_instance, "Instance file for constraint metrics");
  eval->add_option("--out", eval_out, "Output directory for metrics")->envname("IDG_OUT");
  eval->add_option("--format", eval_format, "csv, tsv or json")->envname("IDG_FORMAT");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_usage;
  }

  try {
    if (*gen) {
      auto atoms = idg::load_atoms(gen_input, gen_seed);
      auto recipe = idg::parse_recipe(gen_recipe);
      fs::create_directories(gen_out);
      for (int i = 0; i < gen_count; ++i) {
        auto inst = idg::generate_instance(atoms, recipe, gen_p, gen_sigma, gen_cutoff,
                                           gen_seed + 1000ULL * static_cast<std::uint64_t>(i), gen_input);
        auto path = fs::path(gen_out) / ("instance_" + std::to_string(i) + ".dgp");
        idg::write_instance_file(path.string(), inst);
        std::cout << path.string() << ' ' << inst.vertex_count() << ' ' << inst.edge_count() << '\n';
      }
      return 0;
    }

    if (*solve) {
      auto inst = idg::read_instance_file(solve_input);
      auto cfg = make_solver_config(solve_flags);
      auto res = idg::reconstruct(inst, cfg, idg::RefineConfig{}, !solve_flags.no_refine);
      auto fields = metric_fields(&inst, res.x, inst.reference ? &*inst.reference : nullptr, res.seconds);
      print_fields(fields);
      if (!solve_out.empty()) {
        fs::create_directories(solve_out);
        idg::write_xyz_file((fs::path(solve_out) / "solution.xyz").string(), res.x,
                            "seed " + std::to_string(cfg.seed));
        write_metrics(solve_out, idg::parse_format(solve_format), fields);
      }
      return 0;
    }

    if (*bench) {
      auto spec = idg::read_experiment_spec(bench_spec);
      if (*o_recipe) idg::apply_setting(spec, "recipe", bench_recipe);
      if (*o_p) idg::apply_setting(spec, "p", bench_p);
      if (*o_sigma) idg::apply_setting(spec, "sigma", bench_sigma);
      if (*o_out) spec.out_dir = bench_out;
      if (*o_format) idg::apply_setting(spec, "format", bench_format);
      if (*o_timing) idg::apply_setting(spec, "timing", bench_timing);
      const char* solver_keys[] = {"seed", "threads", "alpha_start", "alpha_end", "alpha_rate",
                                   "pivots", "theta", "init"};
      std::string values[] = {std::to_string(bench_flags.seed), std::to_string(bench_flags.threads),
                              idg::format_real(bench_flags.alpha_start), idg::format_real(bench_flags.alpha_end),
                              idg::format_real(bench_flags.alpha_rate), std::to_string(bench_flags.pivots),
                              idg::format_real(bench_flags.theta), bench_flags.init};
      for (std::size_t k = 0; k < std::size(solver_keys); ++k)
        if (*bench_opts[k]) idg::apply_setting(spec, solver_keys[k], values[k]);
      if (bench_flags.exact_entropy) spec.solver.exact_entropy = true;
      if (bench_flags.no_refine) spec.run_refine = false;

      auto report = idg::run_experiment(spec);
      auto files = idg::emit_report(report, spec.out_dir, spec.format);
      std::size_t failed = 0;
      for (const auto& r : report.rows) failed += !r.error.empty();
      for (const auto& c : report.plot)
        std::cout << "p " << idg::format_real(c.p) << " sigma " << idg::format_real(c.sigma)
                  << " mean_rmsd_A " << idg::format_real(c.rmsd_mean) << '\n';
      std::cout << report.rows.size() << " rows (" << failed << " failed) -> " << files.rows.string() << '\n';
      return 0;
    }

    if (*eval) {
      auto x = idg::read_xyz_file(eval_input);
      std::optional<idg::Instance> inst;
      if (!eval_instance.empty()) inst = idg::read_instance_file(eval_instance);
      std::optional<idg::Embedding> ref;
      if (!eval_reference.empty()) {
        std::ifstream probe(eval_reference);
        std::string first;
        std::getline(probe, first);
        bool is_instance = first.starts_with("#") || first.starts_with("dgp");
        if (is_instance) {
          auto ri = idg::read_instance_file(eval_reference);
          if (!ri.reference) throw idg::ValidationError("instance file has no reference coordinates");
          ref = *ri.reference;
        } else {
          ref = idg::read_xyz_file(eval_reference);
        }
      } else if (inst && inst->reference) {
        ref = *inst->reference;
      }
      if (!ref && !inst) throw idg::ValidationError("eval needs --reference or --instance");
      if (ref && ref->size() != x.size())
        throw idg::ValidationError("coordinate count " + std::to_string(x.size()) + " differs from reference " +
                                   std::to_string(ref->size()));
      if (inst && inst->vertex_count() != x.size())
        throw idg::ValidationError("coordinate count differs from instance vertex count");
      auto fields = metric_fields(inst ? &*inst : nullptr, x, ref ? &*ref : nullptr, std::nullopt);
      print_fields(fields);
      if (!eval_out.empty()) write_metrics(eval_out, idg::parse_format(eval_format), fields);
      return 0;
    }
  } catch (const idg::ParseError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return exit_input;
  } catch (const idg::ValidationError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return exit_input;
  } catch (const idg::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return exit_numerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_input;
  }
  return exit_usage;
}
