// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/LU>

#include "fbsense/equivalent_filter.hpp"
#include "fbsense/estimation.hpp"
#include "fbsense/feedback.hpp"
#include "fbsense/runner/defaults.hpp"
#include "fbsense/runner/experiments.hpp"
#include "fbsense/spectrum.hpp"

namespace {

using namespace fbsense;
using namespace fbsense::runner;
using Clock = std::chrono::steady_clock;

// Tolerances.
constexpr double kCentralTol = 1e-8;
constexpr double kCentralSeconds = 60.0;
constexpr double kFredholmTol = 1e-8;
constexpr double kDenseOracleTol = 1e-10;
constexpr double kCoolingTarget = 0.50;
constexpr double kCoolingTol = 0.02;
constexpr double kLinewidthTol = 0.05;
constexpr double kSlopeTarget = -0.25;
constexpr double kSlopeTol = 0.05;
constexpr double kEstimatorTol = 1e-6;
constexpr double kReversibleTol = 1e-8;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& check) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("%s  criterion %2d  %-28s %s  (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(),
              secs);
  std::fflush(stdout);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

unsigned worker_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

OscillatorParams slow_params() { return {1.0, 1e-3, 1.0}; }

NoiseConfig floor_noise(const OscillatorParams& p, double floor_db) {
  NoiseConfig n;
  n.thermal_force_psd = 1.0;
  n.measurement_noise_psd = 1.0 / (p.gamma * p.gamma) / std::pow(10.0, floor_db / 10.0);
  return n;
}

double rel_l2(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    num += (a[k] - b[k]) * (a[k] - b[k]);
    den += a[k] * a[k];
  }
  return std::sqrt(num / den);
}

// ---------------------------------------------------------------------- 1

Outcome central_equivalence() {
  const OscillatorParams p = slow_params();
  const SimGrid grid{0.1, std::size_t{1} << 20};
  struct Case {
    const char* name;
    NoiseConfig noise;
  };
  std::vector<Case> cases;
  NoiseConfig gauss = floor_noise(p, 25.0);
  cases.push_back({"gaussian", gauss});
  NoiseConfig heavy = gauss;
  heavy.noise_law = NoiseLaw::heavy_tailed(3.0);
  cases.push_back({"student_t3", heavy});
  NoiseConfig corr = gauss;
  corr.backaction_force_psd = 0.5;
  corr.backaction_measurement_correlation = 0.6;
  cases.push_back({"backaction_rho0.6", corr});

  const std::vector<double> gains{0.5, 1.0, 2.0, 8.0, 34.0, 72.0, 150.0};
  double worst = 0.0, slowest = 0.0;
  std::uint64_t seed = 101;
  for (const auto& c : cases) {
    for (double g : gains) {
      const auto t0 = Clock::now();
      const NoiseRealization noise = generate_noise(c.noise, grid, seed++);
      const FeedbackKernel k = cold_damping_kernel(g, p);
      const auto fb = simulate_closed_loop(p, noise, k, grid).record;
      const auto open = simulate_open_loop(p, noise, grid).second;
      const auto filtered = apply_filter(open, stationary_filter(p, k));
      worst = std::max(worst, verify_equivalence(fb, filtered, 1).relative_l2_error);
      slowest = std::max(slowest, std::chrono::duration<double>(Clock::now() - t0).count());
    }
  }
  return {worst <= kCentralTol && slowest <= kCentralSeconds,
          "21 cases, worst rel L2 " + fmt(worst) + " (tol " + fmt(kCentralTol) + "), slowest case " + fmt(slowest) + " s"};
}

// ---------------------------------------------------------------------- 2

Outcome nonstationary_equivalence() {
  const OscillatorParams p = slow_params();
  const std::size_t n = std::size_t{1} << 14;
  const SimGrid grid{0.1, n};
  const NoiseConfig nc = floor_noise(p, 25.0);
  std::vector<double> step(n), ramp(n);
  for (std::size_t k = 0; k < n; ++k) {
    step[k] = k < n / 2 ? 1.0 : 8.0;
    ramp[k] = 0.5 + 19.5 * static_cast<double>(k) / static_cast<double>(n - 1);
  }
  double worst = 0.0;
  std::uint64_t seed = 7;
  for (const auto* sched : {&step, &ramp}) {
    const NoiseRealization noise = generate_noise(nc, grid, seed++);
    const FeedbackKernel k = nonstationary_schedule(*sched, p, grid);
    const auto fb = simulate_closed_loop(p, noise, k, grid).record;
    const auto open = simulate_open_loop(p, noise, grid).second;
    const TwoTimeKernel g = to_two_time(k, n, grid.dt);
    const KernelMatrix km = discretize_kernels(nullptr, &g, p, grid);
    worst = std::max(worst, rel_l2(fb.samples, fredholm_solve(km, open).samples));
  }

  // Forward substitution against a dense LU oracle.
  const std::size_t m = 512;
  const SimGrid small{0.1, m};
  std::vector<double> sched(m);
  for (std::size_t k = 0; k < m; ++k) sched[k] = k < m / 3 ? 2.0 : 12.0;
  const FeedbackKernel ks = nonstationary_schedule(sched, p, small);
  const TwoTimeKernel gs = to_two_time(ks, m, small.dt);
  const KernelMatrix kms = discretize_kernels(nullptr, &gs, p, small);
  const auto open = simulate_open_loop(p, generate_noise(nc, small, 99), small).second;
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m)) -
                            kms.h_act.to_eigen();
  const Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(open.samples.data(), static_cast<Eigen::Index>(m));
  const Eigen::VectorXd dense = a.partialPivLu().solve(rhs);
  const auto tri = fredholm_solve(kms, open).samples;
  const double oracle = rel_l2(std::vector<double>(dense.data(), dense.data() + m), tri);
  return {worst <= kFredholmTol && oracle <= kDenseOracleTol,
          "step/ramp N=2^14 rel L2 " + fmt(worst) + " (tol " + fmt(kFredholmTol) + "), dense oracle N=512 " +
              fmt(oracle) + " (tol " + fmt(kDenseOracleTol) + ")"};
}

// ---------------------------------------------------------------------- 3

Outcome cooling_factor() {
  ScenarioConfig cfg = desk_estimation("cooling", {0.0, 1.0});
  cfg.noise.measurement_noise_psd = 1e-6;
  cfg.estimation.processing = Processing::Mode::feedback;
  cfg.estimation.taus = {};
  cfg.estimation.taus.list = {60000.0};
  cfg.estimation.tau_fixed.reset();
  cfg.estimation.n_trials = 100;
  const EnsembleResult r = run_config_ensemble(cfg, EnsembleKind::thermal, worker_threads());
  const double ratio = r.stats(1)[0].mean / r.stats(0)[0].mean;
  return {std::abs(ratio - kCoolingTarget) <= kCoolingTol,
          "<E>_fb(g=1)/<E>_open = " + fmt(ratio) + " (target " + fmt(kCoolingTarget) + " +/- " + fmt(kCoolingTol) + ")"};
}

// ---------------------------------------------------------------------- 4

Outcome linewidth() {
  const OscillatorParams p{1.0, 1e-2, 1.0};
  const SimGrid grid{0.1, std::size_t{1} << 22};
  NoiseConfig nc;
  nc.thermal_force_psd = 1.0;
  nc.measurement_noise_psd = 1e-6;
  const NoiseRealization noise = generate_noise(nc, grid, 4242);
  double worst = 0.0;
  std::string detail;
  for (double g : {0.0, 1.0, 2.0, 5.0, 10.0}) {
    const auto rec = simulate_closed_loop(p, noise, cold_damping_kernel(g, p), grid).record;
    const LorentzianFit fit = fit_lorentzian(psd_welch(rec, std::size_t{1} << 17, 0.5));
    const double expect = p.gamma * (1.0 + g);
    const double err = std::abs(fit.fwhm / expect - 1.0);
    worst = std::max(worst, err);
    detail += " g" + fmt(g) + ":" + fmt(fit.fwhm / expect);
  }
  return {worst <= kLinewidthTol, "fwhm/(gamma(1+g))" + detail + ", worst error " + fmt(worst) + " (tol 0.05)"};
}

// ----------------------------------------------------------- shared ensembles

struct Ensembles {
  ScenarioConfig cfg;
  EnsembleResult thermal;
  EnsembleResult signal;
  EnsembleResult resolve_thermal;  // thermal trials restricted to the resolve gains
  ScenarioConfig resolve_cfg;
};

// Same seeds and processing give the same per-trial energies, so the resolve
// gains can be read off the larger thermal ensemble.
EnsembleResult select_gains(const EnsembleResult& r, const std::vector<double>& gains) {
  EnsembleResult out;
  out.taus = r.taus;
  out.n_trials = r.n_trials;
  out.energies.assign(r.n_trials, {});
  for (double g : gains) {
    std::size_t i = 0;
    while (i < r.processings.size() && r.processings[i].effective_gain() != g) ++i;
    if (i == r.processings.size()) throw ValidationError("gain missing from the thermal ensemble");
    out.processings.push_back(r.processings[i]);
    for (std::size_t t = 0; t < r.n_trials; ++t) out.energies[t].push_back(r.energies[t][i]);
  }
  return out;
}

Ensembles& ensembles() {
  static Ensembles e = [] {
    Ensembles out;
    out.cfg = desk_estimation("acceptance", {0.0, 1.0, 2.0, 2.4, 3.0, 5.0, 8.0, 10.0, 12.0, 16.0, 20.0, 30.0, 40.0});
    out.thermal = run_config_ensemble(out.cfg, EnsembleKind::thermal, worker_threads());
    out.resolve_cfg = desk_config("fig3b");
    out.signal = run_config_ensemble(out.resolve_cfg, EnsembleKind::signal, worker_threads());
    out.resolve_thermal = select_gains(out.thermal, out.resolve_cfg.estimation.gains);
    return out;
  }();
  return e;
}

// ---------------------------------------------------------------------- 5

Outcome squashing() {
  auto& e = ensembles();
  const OscillatorParams p = e.cfg.oscillator_si();
  const NoiseConfig nc = ensemble_noise(e.cfg, EnsembleKind::thermal);
  const double gstar = squashing_threshold(p, nc);

  // In-loop PSD at omega_m against the floor on either side of the threshold.
  const SimGrid grid{e.cfg.dt, std::size_t{1} << 20};
  const NoiseRealization noise = generate_noise(nc, grid, 5);
  auto psd_at_resonance = [&](double g) {
    const auto rec = simulate_closed_loop(p, noise, cold_damping_kernel(g, p), grid).record;
    const Spectrum s = psd_welch(rec, std::size_t{1} << 14, 0.5);
    return s.band_mean(p.omega_m, 0.02);
  };
  const double floor = nc.measurement_noise_psd / 2.0;
  const double below = psd_at_resonance(2.0 * gstar) / floor;
  const double above = psd_at_resonance(0.5 * gstar) / floor;

  const GainSweep gs = gain_sweep(e.cfg, e.thermal);
  std::vector<double> df;
  for (std::size_t r = 0; r < gs.curve.size(); ++r) df.push_back(gs.curve.number(r, "delta_f"));
  std::size_t kmin = 0;
  const bool df_min = interior_minimum(df, &kmin);

  const ResolveSweep rs = resolve_sweep(e.resolve_thermal, e.signal);
  std::vector<double> tr;
  for (std::size_t r = 0; r < rs.times.size(); ++r) {
    const double v = rs.times.number(r, "tau_resolve_s");
    tr.push_back(std::isnan(v) ? std::numeric_limits<double>::infinity() : v);
  }
  std::size_t tmin = 0;
  const bool tr_min = interior_minimum(tr, &tmin);
  return {below < 1.0 && above > 1.0 && df_min && tr_min,
          "g*=" + fmt(gstar) + ", PSD(omega_m)/floor at 2g*: " + fmt(below) + ", at g*/2: " + fmt(above) +
              "; deltaF argmin g=" + fmt(gs.curve.number(kmin, "gain")) + (df_min ? " (interior)" : " (edge)") +
              "; tau_resolve argmin g=" + fmt(rs.times.number(tmin, "gain")) + (tr_min ? " (interior)" : " (edge)")};
}

// ---------------------------------------------------------------------- 6

Outcome scaling_law() {
  auto& e = ensembles();
  const OscillatorParams p = e.cfg.oscillator_si();
  const double gstar = squashing_threshold(p, ensemble_noise(e.cfg, EnsembleKind::thermal));
  const TauSweep ts = tau_sweep(e.cfg, e.thermal);
  bool ok = ts.fits.size() > 0;
  std::size_t tested = 0;
  double worst = 0.0;
  std::string detail;
  for (std::size_t r = 0; r < ts.fits.size(); ++r) {
    const double g = ts.fits.number(r, "gain");
    if (!(g < gstar)) continue;
    const double s = ts.fits.number(r, "slope");
    ++tested;
    worst = std::max(worst, std::abs(s - kSlopeTarget));
    detail += " g" + fmt(g) + ":" + fmt(s);
    if (std::abs(s - kSlopeTarget) > kSlopeTol) ok = false;
  }
  return {ok && tested >= 5, std::to_string(tested) + " gains below g*, tau>=30/gamma, slopes" + detail +
                                 "; worst |slope+0.25| " + fmt(worst)};
}

// ---------------------------------------------------------------------- 7

Outcome signal_resolution() {
  auto& e = ensembles();
  const ResolveSweep rs = resolve_sweep(e.resolve_thermal, e.signal);
  std::vector<double> g, t;
  for (std::size_t r = 0; r < rs.times.size(); ++r) {
    g.push_back(rs.times.number(r, "gain"));
    const double v = rs.times.number(r, "tau_resolve_s");
    t.push_back(std::isnan(v) ? std::numeric_limits<double>::infinity() : v);
  }
  const auto kopt = static_cast<std::size_t>(std::min_element(t.begin(), t.end()) - t.begin());
  bool ok = std::isfinite(t[0]) && kopt > 0;
  std::string detail;
  for (std::size_t k = 0; k <= kopt; ++k) {
    detail += " g" + fmt(g[k]) + ":" + fmt(t[k]);
    if (k > 0 && !(t[k] < t[k - 1])) ok = false;
  }
  return {ok, "tau_resolve (s) from g=0 to optimum" + detail};
}

// ---------------------------------------------------------------------- 8

Outcome estimator_equality() {
  ScenarioConfig cfg = desk_estimation("estimator_equality", {0.0});
  cfg.estimation.n_trials = 8;
  EnsembleScenario s = cfg.ensemble_scenario();
  s.noise = ensemble_noise(cfg, EnsembleKind::thermal);
  const std::vector<double> gains{1.0, 2.0, 2.4, 3.0, 5.0, 8.0, 10.0, 12.0, 16.0, 20.0, 30.0, 40.0};
  std::vector<Processing> procs;
  for (double g : gains) {
    procs.push_back(Processing::feedback(g));
    procs.push_back(Processing::filter(g));
  }
  const auto taus = ensemble_taus(cfg);
  const EnsembleResult r = run_ensemble(s, procs, taus, cfg.estimation.n_trials, cfg.master_seed, worker_threads());
  double worst = 0.0;
  for (std::size_t i = 0; i < gains.size(); ++i) {
    const auto fb = r.stats(2 * i), fl = r.stats(2 * i + 1);
    const double norm = chi_prime_norm(s.params, gains[i]);
    for (std::size_t t = 0; t < taus.size(); ++t) {
      const double a = force_sensitivity(fb[t].sigma, norm), b = force_sensitivity(fl[t].sigma, norm);
      worst = std::max(worst, std::abs(a - b) / a);
    }
  }
  return {worst <= kEstimatorTol, std::to_string(gains.size()) + " gains x " + std::to_string(taus.size()) +
                                       " taus, worst relative deltaF difference " + fmt(worst) + " (tol 1e-6)"};
}

// ---------------------------------------------------------------------- 9

Outcome reversibility() {
  const OscillatorParams p = slow_params();
  const SimGrid grid{0.1, std::size_t{1} << 20};
  const auto open = simulate_open_loop(p, generate_noise(floor_noise(p, 25.0), grid, 9), grid).second;
  double worst = 0.0;
  for (double g : {0.5, 1.0, 8.0, 34.0, 150.0}) {
    const FilterSpec h = stationary_filter(p, cold_damping_kernel(g, p));
    const auto back = apply_filter(apply_filter(open, h), inverse_filter(h));
    worst = std::max(worst, rel_l2(open.samples, back.samples));
  }
  return {worst <= kReversibleTol, "h then h^-1, 5 gains, worst rel L2 " + fmt(worst) + " (tol 1e-8)"};
}

// --------------------------------------------------------------------- 10

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const auto base = std::filesystem::temp_directory_path() / "fbsense_acceptance_determinism";
  std::filesystem::remove_all(base);
  std::size_t compared = 0;
  std::vector<std::string> differing;
  for (const auto& id : figure_ids()) {
    ScenarioConfig cfg = desk_config(id);
    cfg.estimation.n_trials = 6;
    std::vector<std::string> files[2];
    const unsigned threads[2] = {1, 3};
    for (int run = 0; run < 2; ++run) {
      const auto dir = base / ("threads" + std::to_string(threads[run]));
      RunManifest m;
      for (const auto& dep : figure_dependencies(id)) m = run_named(cfg, dep, dir, threads[run]);
      files[run] = emit_figure_data(m, id, dir);
    }
    for (const auto& f : files[0]) {
      ++compared;
      if (slurp(base / "threads1" / f) != slurp(base / "threads3" / f)) differing.push_back(f);
    }
  }
  std::filesystem::remove_all(base);
  std::string detail = std::to_string(compared) + " figure CSVs, --threads 1 vs 3";
  for (const auto& f : differing) detail += " DIFF:" + f;
  return {differing.empty() && compared >= 5, detail + (differing.empty() ? ", byte-identical" : "")};
}

}  // namespace

int main() {
  std::printf("acceptance: %u worker thread(s)\n", worker_threads());
  report(1, "central equivalence", central_equivalence);
  report(2, "non-stationary equivalence", nonstationary_equivalence);
  report(3, "cooling factor", cooling_factor);
  report(4, "linewidth", linewidth);
  report(5, "squashing", squashing);
  report(6, "scaling law", scaling_law);
  report(7, "signal resolution", signal_resolution);
  report(8, "estimator equality", estimator_equality);
  report(9, "reversibility", reversibility);
  report(10, "determinism", determinism);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
