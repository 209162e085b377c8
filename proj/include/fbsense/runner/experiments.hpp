#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <map>
#include <string>
#include <vector>

#include "fbsense/equivalent_filter.hpp"
#include "fbsense/estimation.hpp"
#include "fbsense/feedback.hpp"
#include "fbsense/runner/config.hpp"
#include "fbsense/runner/io.hpp"
#include "fbsense/spectrum.hpp"
#include "fbsense/version.hpp"

namespace fbsense::runner {

/// Raised when a figure needs runs that are absent from the manifest.
class MissingRunsError : public Error {
 public:
  MissingRunsError(const std::string& msg, std::vector<std::string> missing)
      : Error(msg), missing_(std::move(missing)) {}
  const std::vector<std::string>& missing() const { return missing_; }

 private:
  std::vector<std::string> missing_;
};

struct RunEntry {
  std::string scenario_hash;
  std::uint64_t seed = 0;
  std::vector<std::string> files;
};

struct RunManifest {
  std::string scenario_hash;
  std::uint64_t seed = 0;
  std::string code_version = kVersion;
  std::string started_utc;
  std::string finished_utc;
  std::vector<std::string> outputs;
  std::map<std::string, RunEntry> runs;

  bool has_run(const std::string& name, const std::string& hash) const {
    const auto it = runs.find(name);
    return it != runs.end() && it->second.scenario_hash == hash;
  }

  void add_run(const std::string& name, RunEntry entry) {
    for (const auto& f : entry.files)
      if (std::find(outputs.begin(), outputs.end(), f) == outputs.end()) outputs.push_back(f);
    runs[name] = std::move(entry);
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["scenario_hash"] = scenario_hash;
    j["seed"] = seed;
    j["code_version"] = code_version;
    j["started_utc"] = started_utc;
    j["finished_utc"] = finished_utc;
    j["outputs"] = outputs;
    nlohmann::json r = nlohmann::json::object();
    for (const auto& [name, e] : runs) r[name] = {{"scenario_hash", e.scenario_hash}, {"seed", e.seed}, {"files", e.files}};
    j["runs"] = r;
    return j;
  }

  static RunManifest from_json(const nlohmann::json& j) {
    RunManifest m;
    m.scenario_hash = j.value("scenario_hash", "");
    m.seed = j.value("seed", std::uint64_t{0});
    m.code_version = j.value("code_version", "");
    m.started_utc = j.value("started_utc", "");
    m.finished_utc = j.value("finished_utc", "");
    m.outputs = j.value("outputs", std::vector<std::string>{});
    if (j.contains("runs"))
      for (auto it = j["runs"].begin(); it != j["runs"].end(); ++it)
        m.runs[it.key()] = {it.value().value("scenario_hash", ""), it.value().value("seed", std::uint64_t{0}),
                            it.value().value("files", std::vector<std::string>{})};
    return m;
  }
};

inline std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline RunManifest load_manifest(const fs::path& dir) {
  const fs::path p = dir / "manifest.json";
  if (!fs::exists(p)) return {};
  std::ifstream in(p);
  try {
    return RunManifest::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(p.string() + ": " + e.what());
  }
}

inline void save_manifest(const fs::path& dir, const RunManifest& m) { write_text(dir / "manifest.json", m.to_json().dump(2) + "\n"); }

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
}

/// Feedback kernel described by the config (constant gain or schedule).
inline FeedbackKernel config_kernel(const ScenarioConfig& cfg, const SimGrid& grid) {
  const OscillatorParams p = cfg.oscillator_si();
  FeedbackKernel k;
  if (cfg.gain_schedule) {
    const auto g = cfg.gain_schedule->expand(grid.n_samples);
    k = nonstationary_schedule(g, p, grid);
  } else {
    k = cold_damping_kernel(cfg.gain, p);
  }
  k.delay_steps = cfg.delay_steps;
  return k;
}

// ---------------------------------------------------------------- records

struct RecordRun {
  std::vector<std::pair<std::string, MeasurementRecord>> records;
};

/// Memory needed by the dense Fredholm path (packed lower triangle).
inline double fredholm_dense_bytes(std::size_t n) { return 8.0 * static_cast<double>(n) * (static_cast<double>(n) + 1) / 2.0; }

inline RecordRun run_records(const ScenarioConfig& cfg) {
  const OscillatorParams p = cfg.oscillator_si();
  const SimGrid grid = cfg.grid();
  grid.validate_for(p);
  const NoiseRealization noise = generate_noise(cfg.noise_si(), grid, cfg.master_seed);
  RecordRun out;
  switch (cfg.mode) {
    case Mode::open_loop:
      out.records.emplace_back("open_loop", simulate_open_loop(p, noise, grid).second);
      break;
    case Mode::feedback:
      out.records.emplace_back("feedback", simulate_closed_loop(p, noise, config_kernel(cfg, grid), grid).record);
      break;
    case Mode::filter: {
      auto open = simulate_open_loop(p, noise, grid).second;
      auto filtered = apply_filter(open, stationary_filter(p, config_kernel(cfg, grid)));
      filtered.scenario_id = "filter";
      out.records.emplace_back("open_loop", std::move(open));
      out.records.emplace_back("filter", std::move(filtered));
      break;
    }
    case Mode::fredholm: {
      const FeedbackKernel kernel = config_kernel(cfg, grid);
      if (!kernel.is_stationary() || kernel.delay_steps > 0) {
        const double bytes = fredholm_dense_bytes(grid.n_samples);
        if (bytes > 2.5e9) {
          std::ostringstream os;
          os << "config field 'grid.n_samples' = " << grid.n_samples << " needs " << bytes / 1e9
             << " GB for the dense Fredholm kernel; reduce it";
          throw ValidationError(os.str());
        }
      }
      auto open = simulate_open_loop(p, noise, grid).second;
      const TwoTimeKernel g = to_two_time(kernel, grid.n_samples, grid.dt);
      const KernelMatrix kmat = discretize_kernels(nullptr, &g, p, grid);
      auto solved = fredholm_solve(kmat, open);
      solved.scenario_id = "fredholm";
      out.records.emplace_back("open_loop", std::move(open));
      out.records.emplace_back("fredholm", std::move(solved));
      break;
    }
  }
  return out;
}

/// Executes the single-record pipeline of `cfg.mode` and writes its records.
inline RunManifest run_scenario(const ScenarioConfig& cfg, const fs::path& out_dir) {
  ensure_dir(out_dir);
  RunManifest m = load_manifest(out_dir);
  m.started_utc = utc_now();
  m.scenario_hash = hash_hex(scenario_hash(cfg));
  m.seed = cfg.master_seed;
  m.code_version = kVersion;
  const RecordRun run = run_records(cfg);
  RunEntry entry{m.scenario_hash, cfg.master_seed, {}};
  for (const auto& [name, rec] : run.records) {
    write_record(out_dir / (name + ".bin"), rec, m.scenario_hash);
    entry.files.push_back(name + ".bin");
    if (cfg.output.csv_records) {
      record_table(rec).write(out_dir / (name + ".csv"));
      entry.files.push_back(name + ".csv");
    }
  }
  const std::string cfg_file = std::string("config_") + to_string(cfg.mode) + ".json";
  write_text(out_dir / cfg_file, canonical_text(cfg));
  entry.files.push_back(cfg_file);
  m.add_run(to_string(cfg.mode), entry);
  m.finished_utc = utc_now();
  save_manifest(out_dir, m);
  return m;
}

// ------------------------------------------------------------- ensembles

enum class EnsembleKind { thermal, signal };

inline NoiseConfig ensemble_noise(const ScenarioConfig& cfg, EnsembleKind kind) {
  NoiseConfig n = cfg.noise_si();
  const bool explicit_signal = n.signal_force_psd > 0.0;
  if (kind == EnsembleKind::thermal) {
    n.signal_force_psd = 0.0;
    n.signal_band.reset();
    return n;
  }
  if (!explicit_signal) {
    const OscillatorParams p = cfg.oscillator_si();
    const double hw = cfg.signal_halfwidth_si();
    n.signal_force_psd = calibrate_signal_psd(p, n.thermal_force_psd, cfg.estimation.signal_fraction, hw);
    n.signal_band = SignalBand{p.omega_m, hw};
  }
  return n;
}

/// Sorted union of tau_list and tau_fixed.
inline std::vector<double> ensemble_taus(const ScenarioConfig& cfg) {
  auto taus = cfg.estimation.taus.values();
  if (cfg.estimation.tau_fixed && std::find(taus.begin(), taus.end(), *cfg.estimation.tau_fixed) == taus.end()) {
    taus.push_back(*cfg.estimation.tau_fixed);
    std::sort(taus.begin(), taus.end());
  }
  if (taus.empty()) throw ValidationError("config field 'estimation.tau_list' is required for ensemble runs");
  return taus;
}

inline std::vector<Processing> ensemble_processings(const ScenarioConfig& cfg) {
  std::vector<Processing> out;
  for (double g : cfg.estimation.gains)
    out.push_back(g == 0.0 ? Processing::open() : Processing{cfg.estimation.processing, g});
  if (out.empty()) throw ValidationError("config field 'estimation.gains' must not be empty");
  return out;
}

inline EnsembleResult run_config_ensemble(const ScenarioConfig& cfg, EnsembleKind kind, unsigned threads) {
  EnsembleScenario s = cfg.ensemble_scenario();
  s.noise = ensemble_noise(cfg, kind);
  const auto procs = ensemble_processings(cfg);
  const auto taus = ensemble_taus(cfg);
  return run_ensemble(s, procs, taus, cfg.estimation.n_trials, cfg.master_seed, threads);
}

/// Per (gain, tau) ensemble statistics with the matching chi' normalisation.
inline Table energy_table(const EnsembleResult& res, const OscillatorParams& p, const std::string& scenario) {
  Table t({"scenario", "mode", "gain", "tau_s", "mean_energy", "sigma_energy", "n_trials", "chi_norm", "delta_f"});
  for (std::size_t i = 0; i < res.processings.size(); ++i) {
    const Processing& proc = res.processings[i];
    const double g = proc.effective_gain();
    const double norm = chi_prime_norm(p, g);
    for (const auto& s : res.stats(i))
      t.add({scenario, std::string(to_string(proc.mode)), g, s.tau, s.mean, s.sigma, static_cast<double>(s.n_trials),
             norm, force_sensitivity(s.sigma, norm)});
  }
  return t;
}

inline bool interior_minimum(const std::vector<double>& y, std::size_t* where = nullptr) {
  if (y.size() < 3) return false;
  const auto it = std::min_element(y.begin(), y.end());
  const auto k = static_cast<std::size_t>(it - y.begin());
  if (where) *where = k;
  return k > 0 && k + 1 < y.size();
}

struct GainSweep {
  Table curve{{"gain", "mode", "tau_s", "mean_energy", "sigma_energy", "delta_f", "delta_f_theory"}};
  Table markers{{"name", "value"}};
};

/// deltaF against gain at the fixed averaging time.
inline GainSweep gain_sweep(const ScenarioConfig& cfg, const EnsembleResult& thermal) {
  const OscillatorParams p = cfg.oscillator_si();
  const NoiseConfig noise = ensemble_noise(cfg, EnsembleKind::thermal);
  const DemodSettings demod = cfg.demod_si();
  const double tau = cfg.tau_fixed();
  const auto tit = std::find(thermal.taus.begin(), thermal.taus.end(), tau);
  if (tit == thermal.taus.end()) throw ValidationError("tau_fixed is not on the ensemble tau grid");
  const auto ti = static_cast<std::size_t>(tit - thermal.taus.begin());
  GainSweep out;
  std::vector<double> df;
  std::vector<double> gains;
  for (std::size_t i = 0; i < thermal.processings.size(); ++i) {
    const Processing& proc = thermal.processings[i];
    const double g = proc.effective_gain();
    const EnergyEstimate s = thermal.stats(i)[ti];
    const double d = force_sensitivity(s.sigma, chi_prime_norm(p, g));
    out.curve.add({g, std::string(to_string(proc.mode)), tau, s.mean, s.sigma, d,
                   predicted_sensitivity(p, noise, g, demod, tau)});
    df.push_back(d);
    gains.push_back(g);
  }
  std::size_t k = 0;
  const bool interior = interior_minimum(df, &k);
  out.markers.add({std::string("squashing_threshold_gain"), squashing_threshold(p, noise)});
  out.markers.add({std::string("argmin_gain"), gains.empty() ? 0.0 : gains[k]});
  out.markers.add({std::string("interior_minimum"), interior ? 1.0 : 0.0});
  return out;
}

struct TauSweep {
  Table curve{{"tau_s", "delta_f", "gain", "mode", "mean_energy", "sigma_energy"}};
  Table fits{{"gain", "mode", "slope", "stderr", "n_points", "tau_min_s"}};
};

/// deltaF against tau per gain, with power-law fits over tau >= 30/gamma.
inline TauSweep tau_sweep(const ScenarioConfig& cfg, const EnsembleResult& thermal) {
  const OscillatorParams p = cfg.oscillator_si();
  const double tau_min = 30.0 / p.gamma;
  TauSweep out;
  for (std::size_t i = 0; i < thermal.processings.size(); ++i) {
    const Processing& proc = thermal.processings[i];
    const double g = proc.effective_gain();
    const auto stats = thermal.stats(i);
    const auto curve = sensitivity_vs_tau(stats, p, g);
    SensitivityCurve fit_part;
    for (std::size_t t = 0; t < stats.size(); ++t) {
      out.curve.add({curve.abscissa[t], curve.delta_f[t], g, std::string(to_string(proc.mode)), stats[t].mean,
                     stats[t].sigma});
      if (curve.abscissa[t] >= tau_min) {
        fit_part.abscissa.push_back(curve.abscissa[t]);
        fit_part.delta_f.push_back(curve.delta_f[t]);
      }
    }
    if (fit_part.abscissa.size() >= 5) {
      const ScalingFit f = fit_scaling_exponent(fit_part);
      out.fits.add({g, std::string(to_string(proc.mode)), f.slope, f.stderr_slope,
                    static_cast<double>(fit_part.abscissa.size()), tau_min});
    }
  }
  return out;
}

struct ResolveSweep {
  Table curves{{"tau_s", "scenario", "gain", "mode", "mean_energy", "sigma_energy"}};
  Table times{{"gain", "mode", "tau_resolve_s", "resolved"}};
};

inline ResolveSweep resolve_sweep(const EnsembleResult& thermal, const EnsembleResult& signal) {
  ResolveSweep out;
  for (std::size_t i = 0; i < thermal.processings.size(); ++i) {
    const Processing& proc = thermal.processings[i];
    const double g = proc.effective_gain();
    const std::string mode = to_string(proc.mode);
    const auto th = thermal.stats(i);
    const auto sg = signal.stats(i);
    for (std::size_t t = 0; t < th.size(); ++t) {
      out.curves.add({th[t].tau, std::string("thermal"), g, mode, th[t].mean, th[t].sigma});
      out.curves.add({sg[t].tau, std::string("signal"), g, mode, sg[t].mean, sg[t].sigma});
    }
    const ResolveResult r = resolve_time(th, sg, g);
    out.times.add({g, mode, r.resolved ? r.tau_resolve : std::nan(""), r.resolved ? 1.0 : 0.0});
  }
  return out;
}

struct SpectraRun {
  Table spectra{{"panel", "mode", "gain", "omega_rad_s", "psd"}};
  Table summary{{"gain", "mode", "psd_at_omega_m", "measurement_floor_psd", "below_floor", "fwhm_fit"}};
  double inset_relative_l2 = 0.0;
};

/// In-loop spectra per gain (shared noise) plus the paired feedback/filter
/// inset at `inset_gain`. PSD is two-sided per Hz as returned by psd_welch.
inline SpectraRun spectra_run(const ScenarioConfig& cfg) {
  const OscillatorParams p = cfg.oscillator_si();
  const SimGrid grid = cfg.grid();
  grid.validate_for(p);
  NoiseConfig nc = cfg.noise_si();
  const NoiseRealization noise = generate_noise(nc, grid, cfg.master_seed);
  const auto seg = std::min(cfg.spectra.segment_len, grid.n_samples);
  const double lo = cfg.spectra.band_lo ? cfg.to_rad(*cfg.spectra.band_lo) : 0.0;
  const double hi = cfg.spectra.band_hi ? cfg.to_rad(*cfg.spectra.band_hi) : std::numbers::pi / grid.dt;
  const double floor = nc.measurement_noise_psd / 2.0;
  SpectraRun out;

  auto emit = [&](const std::string& panel, const std::string& mode, double g, const Spectrum& s) {
    for (std::size_t k = 1; k < s.freqs.size(); ++k)
      if (s.freqs[k] >= lo && s.freqs[k] <= hi) out.spectra.add({panel, mode, g, s.freqs[k], s.psd[k]});
  };
  auto at_resonance = [&](const Spectrum& s) {
    const double dw = s.freqs[1] - s.freqs[0];
    return s.psd[static_cast<std::size_t>(std::llround(p.omega_m / dw))];
  };

  const auto open = simulate_open_loop(p, noise, grid).second;
  for (double g : cfg.spectra.gains) {
    const auto rec = g == 0.0 ? open : simulate_closed_loop(p, noise, cold_damping_kernel(g, p), grid).record;
    const Spectrum s = psd_welch(rec, seg, cfg.spectra.overlap);
    emit("main", g == 0.0 ? "open_loop" : "feedback", g, s);
    double fwhm = std::nan("");
    try {
      fwhm = fit_lorentzian(s).fwhm;
    } catch (const Error&) {
    }
    const double peak = at_resonance(s);
    out.summary.add({g, std::string(g == 0.0 ? "open_loop" : "feedback"), peak, floor, peak < floor ? 1.0 : 0.0, fwhm});
  }

  const double gi = cfg.spectra.inset_gain;
  const auto fb = simulate_closed_loop(p, noise, cold_damping_kernel(gi, p), grid).record;
  const auto fl = apply_filter(open, stationary_filter(p, cold_damping_kernel(gi, p)));
  emit("inset", "open_loop", 0.0, psd_welch(open, seg, cfg.spectra.overlap));
  emit("inset", "feedback", gi, psd_welch(fb, seg, cfg.spectra.overlap));
  emit("inset", "filter", gi, psd_welch(fl, seg, cfg.spectra.overlap));
  out.inset_relative_l2 = verify_equivalence(fb, fl, 0).relative_l2_error;
  return out;
}

// ---------------------------------------------------------- named runs

inline const std::vector<std::string>& run_names() {
  static const std::vector<std::string> names{"spectra", "sweep_gain", "sweep_tau", "resolve"};
  return names;
}

/// Executes one named ensemble or spectra run and records it in the
/// manifest of `out_dir`. Output bytes depend only on the config.
inline RunManifest run_named(const ScenarioConfig& cfg, const std::string& name, const fs::path& out_dir,
                             unsigned threads) {
  ensure_dir(out_dir);
  RunManifest m = load_manifest(out_dir);
  m.started_utc = utc_now();
  m.scenario_hash = hash_hex(scenario_hash(cfg));
  m.seed = cfg.master_seed;
  m.code_version = kVersion;
  RunEntry entry{m.scenario_hash, cfg.master_seed, {}};
  auto put = [&](const std::string& file, const Table& t) {
    t.write(out_dir / file);
    entry.files.push_back(file);
  };
  const OscillatorParams p = cfg.oscillator_si();
  if (name == "spectra") {
    const SpectraRun s = spectra_run(cfg);
    put("spectra.csv", s.spectra);
    put("spectra_summary.csv", s.summary);
    Table eq({"gain", "relative_l2"});
    eq.add({cfg.spectra.inset_gain, s.inset_relative_l2});
    put("spectra_inset_equivalence.csv", eq);
  } else if (name == "sweep_gain") {
    const auto th = run_config_ensemble(cfg, EnsembleKind::thermal, threads);
    const GainSweep gs = gain_sweep(cfg, th);
    put("sweep_gain.csv", gs.curve);
    put("sweep_gain_markers.csv", gs.markers);
  } else if (name == "sweep_tau") {
    const auto th = run_config_ensemble(cfg, EnsembleKind::thermal, threads);
    const TauSweep ts = tau_sweep(cfg, th);
    put("sweep_tau.csv", ts.curve);
    put("sweep_tau_fits.csv", ts.fits);
  } else if (name == "resolve") {
    const auto th = run_config_ensemble(cfg, EnsembleKind::thermal, threads);
    const auto sg = run_config_ensemble(cfg, EnsembleKind::signal, threads);
    const ResolveSweep rs = resolve_sweep(th, sg);
    put("resolve_curves.csv", rs.curves);
    put("resolve_times.csv", rs.times);
    put("energies.csv", energy_table(th, p, "thermal"));
  } else {
    throw ValidationError("unknown run '" + name + "'");
  }
  write_text(out_dir / ("config_" + name + ".json"), canonical_text(cfg));
  entry.files.push_back("config_" + name + ".json");
  m.add_run(name, entry);
  m.finished_utc = utc_now();
  save_manifest(out_dir, m);
  return m;
}

// -------------------------------------------------------------- figures

inline const std::vector<std::string>& figure_ids() {
  static const std::vector<std::string> ids{"fig2a", "fig2b", "fig2c", "fig3a", "fig3b"};
  return ids;
}

inline std::vector<std::string> figure_dependencies(const std::string& which) {
  if (which == "fig2a") return {"spectra"};
  if (which == "fig2b") return {"sweep_tau"};
  if (which == "fig2c") return {"sweep_gain"};
  if (which == "fig3a" || which == "fig3b") return {"resolve"};
  throw ValidationError("unknown figure '" + which + "' (expected fig2a, fig2b, fig2c, fig3a or fig3b)");
}

/// Writes <which>.csv (and companion tables) from runs already in the
/// manifest; throws MissingRunsError naming any absent run.
inline std::vector<std::string> emit_figure_data(const RunManifest& manifest, const std::string& which,
                                                 const fs::path& out_dir) {
  std::vector<std::string> missing;
  for (const auto& dep : figure_dependencies(which))
    if (!manifest.runs.count(dep)) missing.push_back(dep);
  if (!missing.empty()) {
    std::string msg = "figure " + which + " needs missing run(s):";
    for (const auto& d : missing) msg += " " + d;
    throw MissingRunsError(msg, missing);
  }
  std::vector<std::string> written;
  auto copy = [&](const std::string& src, const std::string& dst, const std::vector<std::string>& cols) {
    const Table in = Table::read(out_dir / src);
    Table out(cols);
    for (std::size_t r = 0; r < in.size(); ++r) {
      std::vector<Table::Cell> row;
      for (const auto& c : cols) row.push_back(in.rows()[r][in.column(c)]);
      out.add(std::move(row));
    }
    out.write(out_dir / dst);
    written.push_back(dst);
  };
  if (which == "fig2a") {
    copy("spectra.csv", "fig2a.csv", {"panel", "mode", "gain", "omega_rad_s", "psd"});
    copy("spectra_summary.csv", "fig2a_summary.csv",
         {"gain", "mode", "psd_at_omega_m", "measurement_floor_psd", "below_floor", "fwhm_fit"});
  } else if (which == "fig2b") {
    copy("sweep_tau.csv", "fig2b.csv", {"tau_s", "delta_f", "gain", "mode"});
    copy("sweep_tau_fits.csv", "fig2b_fits.csv", {"gain", "mode", "slope", "stderr", "n_points", "tau_min_s"});
  } else if (which == "fig2c") {
    copy("sweep_gain.csv", "fig2c.csv", {"gain", "delta_f", "delta_f_theory", "tau_s", "mode"});
    copy("sweep_gain_markers.csv", "fig2c_markers.csv", {"name", "value"});
  } else if (which == "fig3a") {
    copy("resolve_curves.csv", "fig3a.csv", {"tau_s", "scenario", "gain", "mode", "mean_energy", "sigma_energy"});
  } else if (which == "fig3b") {
    copy("resolve_times.csv", "fig3b.csv", {"gain", "tau_resolve_s", "resolved", "mode"});
  }
  return written;
}

// -------------------------------------------------------------- compare

inline nlohmann::json report_json(const EquivalenceReport& r, double tolerance) {
  return {{"relative_l2_error", r.relative_l2_error},
          {"max_abs_error", r.max_abs_error},
          {"n_samples", r.n_samples},
          {"scenario_a", r.scenario_a},
          {"scenario_b", r.scenario_b},
          {"psd_fraction_mean", r.psd_fraction_mean},
          {"psd_fraction_stderr", r.psd_fraction_stderr},
          {"tolerance", tolerance},
          {"equivalent", r.equivalent(tolerance)}};
}

inline EquivalenceReport compare(const fs::path& a, const fs::path& b) {
  const LoadedRecord ra = read_record(a);
  const LoadedRecord rb = read_record(b);
  return verify_equivalence(ra.record, rb.record);
}

}  // namespace fbsense::runner
