// Command-line front end for the scenario runner.
//
// Exit codes: 0 success, 1 I/O failure, 2 validation error,
// 3 instability or singular solve, 4 equivalence check failed.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fbsense/runner/config.hpp"
#include "fbsense/runner/defaults.hpp"
#include "fbsense/runner/experiments.hpp"

namespace {

using namespace fbsense;
using namespace fbsense::runner;

constexpr int kExitIo = 1;
constexpr int kExitValidation = 2;
constexpr int kExitInstability = 3;
constexpr int kExitNotEquivalent = 4;
constexpr const char* kOutEnv = "FBSENSE_OUT_DIR";

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> trials;
  unsigned threads = 1;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Scenario file (JSON)");
  cmd->add_option("--seed", c.seed, "Override master_seed");
  cmd->add_option("--out", c.out, std::string("Output directory (default: $") + kOutEnv + ", then output.dir)");
  cmd->add_option("--trials", c.trials, "Override estimation.n_trials")->check(CLI::Range(2, 1000000));
  cmd->add_option("--threads", c.threads, "Worker threads; results do not depend on it")->check(CLI::Range(1, 256));
}

ScenarioConfig resolve_config(const Common& c, const std::optional<ScenarioConfig>& fallback) {
  ScenarioConfig cfg;
  if (!c.config.empty()) {
    cfg = load_config(c.config);
  } else if (fallback) {
    cfg = *fallback;
  } else {
    throw ValidationError("--config is required for this command");
  }
  if (c.seed) cfg.master_seed = *c.seed;
  if (c.trials) cfg.estimation.n_trials = *c.trials;
  cfg.validate();
  return cfg;
}

fs::path output_dir(const Common& c, const ScenarioConfig* cfg) {
  if (!c.out.empty()) return c.out;
  if (const char* env = std::getenv(kOutEnv); env && *env) return env;
  if (cfg && !cfg->output.dir.empty()) return cfg->output.dir;
  return "fbsense_out";
}

void print_files(const fs::path& dir, const std::vector<std::string>& files) {
  for (const auto& f : files) std::cout << (dir / f).string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feedback / filtering equivalence simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(fbsense::kVersion));

  Common common;

  auto* simulate = app.add_subcommand("simulate", "Simulate one record in the configured mode");
  add_common(simulate, common);
  auto* filter = app.add_subcommand("filter", "Filter an open-loop record with the equivalent filter");
  add_common(filter, common);
  auto* fredholm = app.add_subcommand("fredholm", "Solve the causal Fredholm form for a (scheduled) gain");
  add_common(fredholm, common);

  auto* cmp = app.add_subcommand("compare", "Compare two record files");
  std::string rec_a, rec_b;
  double tolerance = 1e-8;
  cmp->add_option("record_a", rec_a)->required();
  cmp->add_option("record_b", rec_b)->required();
  cmp->add_option("--tol", tolerance, "Relative L2 tolerance");
  add_common(cmp, common);

  auto* sweep = app.add_subcommand("sweep", "Ensemble sweep of force sensitivity");
  bool by_gain = false, by_tau = false;
  auto* og = sweep->add_flag("--gain", by_gain, "deltaF against gain at fixed tau");
  auto* ot = sweep->add_flag("--tau", by_tau, "deltaF against tau per gain");
  og->excludes(ot);
  add_common(sweep, common);

  auto* resolve = app.add_subcommand("resolve", "Time to resolve an incoherent signal, per gain");
  add_common(resolve, common);

  auto* figure = app.add_subcommand("figure", "Emit the data bundle of one figure");
  std::string figure_id;
  bool no_run = false;
  figure->add_option("id", figure_id, "fig2a | fig2b | fig2c | fig3a | fig3b")->required();
  figure->add_flag("--no-run", no_run, "Only use runs already in the output manifest");
  add_common(figure, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*cmp) {
      const auto rep = compare(rec_a, rec_b);
      const auto j = report_json(rep, tolerance);
      std::cout << "relative_l2_error " << rep.relative_l2_error << "\n"
                << "max_abs_error     " << rep.max_abs_error << "\n"
                << "psd_fraction      " << rep.psd_fraction_mean << " +/- " << rep.psd_fraction_stderr << "\n"
                << j.dump(2) << "\n";
      if (!common.out.empty() || std::getenv(kOutEnv)) {
        const fs::path dir = output_dir(common, nullptr);
        ensure_dir(dir);
        write_text(dir / "compare.json", j.dump(2) + "\n");
      }
      return rep.equivalent(tolerance) ? 0 : kExitNotEquivalent;
    }

    if (*simulate || *filter || *fredholm) {
      ScenarioConfig cfg = resolve_config(common, std::nullopt);
      if (*filter) cfg.mode = Mode::filter;
      if (*fredholm) cfg.mode = Mode::fredholm;
      cfg.validate();
      const fs::path dir = output_dir(common, &cfg);
      const RunManifest m = run_scenario(cfg, dir);
      print_files(dir, m.runs.at(to_string(cfg.mode)).files);
      return 0;
    }

    if (*sweep) {
      if (!by_gain && !by_tau) throw ValidationError("sweep needs --gain or --tau");
      const std::string fig = by_gain ? "fig2c" : "fig2b";
      const ScenarioConfig cfg = resolve_config(common, desk_config(fig));
      const fs::path dir = output_dir(common, &cfg);
      const std::string run = by_gain ? "sweep_gain" : "sweep_tau";
      const RunManifest m = run_named(cfg, run, dir, common.threads);
      print_files(dir, m.runs.at(run).files);
      return 0;
    }

    if (*resolve) {
      const ScenarioConfig cfg = resolve_config(common, desk_config("fig3b"));
      const fs::path dir = output_dir(common, &cfg);
      const RunManifest m = run_named(cfg, "resolve", dir, common.threads);
      print_files(dir, m.runs.at("resolve").files);
      return 0;
    }

    if (*figure) {
      figure_dependencies(figure_id);  // validates the id
      const ScenarioConfig cfg = resolve_config(common, desk_config(figure_id));
      const fs::path dir = output_dir(common, &cfg);
      ensure_dir(dir);
      RunManifest m = load_manifest(dir);
      if (!no_run) {
        const std::string hash = hash_hex(scenario_hash(cfg));
        for (const auto& dep : figure_dependencies(figure_id))
          if (!m.has_run(dep, hash)) m = run_named(cfg, dep, dir, common.threads);
      }
      print_files(dir, emit_figure_data(m, figure_id, dir));
      return 0;
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const MissingRunsError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const InstabilityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInstability;
  } catch (const SingularSystemError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInstability;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return 0;
}
