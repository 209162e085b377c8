#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "fbsense/dsp.hpp"
#include "fbsense/equivalent_filter.hpp"
#include "fbsense/feedback.hpp"
#include "fbsense/noise.hpp"
#include "fbsense/parallel.hpp"
#include "fbsense/rng.hpp"
#include "fbsense/simulate.hpp"

namespace fbsense {

/// Slowly varying quadratures, x(t) ~ I cos(w t) + Q sin(w t).
struct QuadratureRecord {
  std::vector<double> i_vals;
  std::vector<double> q_vals;
  double dt_decimated = 0.0;
  double omega_ref = 0.0;

  std::size_t size() const { return i_vals.size(); }
  double duration() const { return dt_decimated * static_cast<double>(size()); }

  QuadratureRecord drop_front(std::size_t n) const {
    QuadratureRecord out = *this;
    n = std::min(n, size());
    out.i_vals.erase(out.i_vals.begin(), out.i_vals.begin() + static_cast<std::ptrdiff_t>(n));
    out.q_vals.erase(out.q_vals.begin(), out.q_vals.begin() + static_cast<std::ptrdiff_t>(n));
    return out;
  }
};

struct DemodSettings {
  double omega_ref = 1.0;
  double lowpass_cutoff = 0.5;
  std::size_t decimation = 1;

  void validate(double dt) const {
    if (!(omega_ref > 0.0)) throw ValidationError("demod.omega_ref must be > 0");
    if (omega_ref * dt > 0.5) throw ValidationError("demod.omega_ref*dt must not exceed 0.5");
    if (!(lowpass_cutoff > 0.0) || !(lowpass_cutoff < omega_ref))
      throw ValidationError("demod.lowpass_cutoff must lie in (0, omega_ref)");
    if (decimation < 1) throw ValidationError("demod.decimation must be >= 1");
    const double nyquist = std::numbers::pi / (dt * static_cast<double>(decimation));
    if (!(lowpass_cutoff < nyquist)) {
      std::ostringstream os;
      os << "demod: cutoff " << lowpass_cutoff << " rad/s violates the decimated Nyquist limit " << nyquist << " rad/s";
      throw ValidationError(os.str());
    }
  }

  /// Decimation keeping at least 8 output samples per cutoff period.
  static std::size_t default_decimation(double cutoff, double dt) {
    const double d = 2.0 * std::numbers::pi / (8.0 * cutoff * dt);
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(d)));
  }
};

/// Lock-in: mix with 2cos / 2sin, 4th-order Butterworth low-pass, decimate.
/// The reference phase tables are built once and shared across records.
class Demodulator {
 public:
  Demodulator(const DemodSettings& settings, double dt, std::size_t n_max) : settings_(settings), dt_(dt) {
    settings_.validate(dt);
    cos2_.resize(n_max);
    sin2_.resize(n_max);
    for (std::size_t k = 0; k < n_max; ++k) {
      const double ph = settings.omega_ref * dt * static_cast<double>(k);
      cos2_[k] = 2.0 * std::cos(ph);
      sin2_[k] = 2.0 * std::sin(ph);
    }
  }

  QuadratureRecord operator()(std::span<const double> x) const {
    if (x.size() > cos2_.size()) throw ValidationError("record longer than the demodulator tables");
    dsp::Butterworth4 lp_i(settings_.lowpass_cutoff, dt_), lp_q(settings_.lowpass_cutoff, dt_);
    const std::size_t d = settings_.decimation;
    QuadratureRecord out;
    out.dt_decimated = dt_ * static_cast<double>(d);
    out.omega_ref = settings_.omega_ref;
    out.i_vals.reserve(x.size() / d + 1);
    out.q_vals.reserve(x.size() / d + 1);
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double i = lp_i(x[k] * cos2_[k]);
      const double q = lp_q(x[k] * sin2_[k]);
      if (k % d == 0) {
        out.i_vals.push_back(i);
        out.q_vals.push_back(q);
      }
    }
    return out;
  }

  const DemodSettings& settings() const { return settings_; }

 private:
  DemodSettings settings_;
  double dt_;
  std::vector<double> cos2_;
  std::vector<double> sin2_;
};

inline QuadratureRecord demodulate(const MeasurementRecord& record, double omega_ref, double lowpass_cutoff,
                                   std::size_t decimation) {
  record.validate();
  const Demodulator demod({omega_ref, lowpass_cutoff, decimation}, record.grid.dt, record.samples.size());
  return demod(record.samples);
}

namespace detail {

inline std::size_t tau_samples(const QuadratureRecord& quad, double tau) {
  if (!(tau > 0.0)) throw ValidationError("tau must be > 0");
  const auto n = static_cast<std::size_t>(std::llround(tau / quad.dt_decimated));
  if (n == 0) throw ValidationError("tau shorter than one decimated sample");
  if (n > quad.size()) {
    std::ostringstream os;
    os << "tau = " << tau << " exceeds the record duration " << quad.duration();
    throw ValidationError(os.str());
  }
  return n;
}

}  // namespace detail

/// E_tau = (1/tau) * integral_0^tau (I^2 + Q^2) dt.
inline double energy_estimate(const QuadratureRecord& quad, double tau) {
  const std::size_t n = detail::tau_samples(quad, tau);
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) acc += quad.i_vals[k] * quad.i_vals[k] + quad.q_vals[k] * quad.q_vals[k];
  return acc / static_cast<double>(n);
}

/// Same values as energy_estimate for every tau, in one pass.
inline std::vector<double> energy_estimates(const QuadratureRecord& quad, std::span<const double> taus) {
  std::vector<std::size_t> ns(taus.size());
  for (std::size_t t = 0; t < taus.size(); ++t) ns[t] = detail::tau_samples(quad, taus[t]);
  const std::size_t n_max = ns.empty() ? 0 : *std::max_element(ns.begin(), ns.end());
  std::vector<double> prefix(n_max + 1, 0.0);
  double acc = 0.0;
  for (std::size_t k = 0; k < n_max; ++k) {
    acc += quad.i_vals[k] * quad.i_vals[k] + quad.q_vals[k] * quad.q_vals[k];
    prefix[k + 1] = acc;
  }
  std::vector<double> out(taus.size());
  for (std::size_t t = 0; t < taus.size(); ++t) out[t] = prefix[ns[t]] / static_cast<double>(ns[t]);
  return out;
}

struct EnergyEstimate {
  double tau = 0.0;
  double mean = 0.0;
  double sigma = 0.0;
  std::size_t n_trials = 0;
};

/// How each trial's record is produced from its noise realization.
struct Processing {
  enum class Mode { open_loop, feedback, filter };
  Mode mode = Mode::open_loop;
  double gain = 0.0;  // cold-damping gain for feedback / filter

  static Processing open() { return {Mode::open_loop, 0.0}; }
  static Processing feedback(double g) { return {Mode::feedback, g}; }
  static Processing filter(double g) { return {Mode::filter, g}; }
  // Gain of the processing actually applied, used for chi' normalisation.
  double effective_gain() const { return mode == Mode::open_loop ? 0.0 : gain; }
};

inline const char* to_string(Processing::Mode m) {
  switch (m) {
    case Processing::Mode::open_loop:
      return "open_loop";
    case Processing::Mode::feedback:
      return "feedback";
    case Processing::Mode::filter:
      return "filter";
  }
  return "?";
}

/// One end-to-end trial pipeline: noise -> record -> lock-in -> E_tau.
struct EnsembleScenario {
  OscillatorParams params;
  NoiseConfig noise;
  SimGrid grid;             // includes burn-in
  std::size_t burn_in = 0;  // samples discarded before statistics
  DemodSettings demod;

  void validate() const {
    params.validate();
    noise.validate();
    grid.validate_for(params);
    demod.validate(grid.dt);
    if (burn_in >= grid.n_samples) throw ValidationError("burn_in must be shorter than the record");
  }

  static std::size_t default_burn_in(const OscillatorParams& p, double dt) {
    return static_cast<std::size_t>(std::ceil(10.0 / (p.gamma * dt)));
  }
};

/// Per-trial energies for several processings of the same realizations.
struct EnsembleResult {
  std::vector<Processing> processings;
  std::vector<double> taus;
  std::size_t n_trials = 0;
  // energies[trial][processing][tau]
  std::vector<std::vector<std::vector<double>>> energies;

  std::vector<EnergyEstimate> stats(std::size_t processing) const {
    std::vector<EnergyEstimate> out(taus.size());
    std::vector<double> col(n_trials);
    for (std::size_t t = 0; t < taus.size(); ++t) {
      for (std::size_t i = 0; i < n_trials; ++i) col[i] = energies[i][processing][t];
      const double mean = pairwise_sum(col) / static_cast<double>(n_trials);
      std::vector<double> dev(n_trials);
      for (std::size_t i = 0; i < n_trials; ++i) dev[i] = (col[i] - mean) * (col[i] - mean);
      out[t] = {taus[t], mean, std::sqrt(pairwise_sum(dev) / static_cast<double>(n_trials)), n_trials};
    }
    return out;
  }
};

/// Trial i uses seed derive_seed(master_seed, i); all processings of a trial
/// see the same realization (filter mode reuses one open-loop record). The
/// result is independent of `threads`.
inline EnsembleResult run_ensemble(const EnsembleScenario& scenario, std::span<const Processing> processings,
                                   std::span<const double> taus, std::size_t n_trials, std::uint64_t master_seed,
                                   unsigned threads = 1) {
  scenario.validate();
  if (n_trials < 2) throw ValidationError("ensemble needs n_trials >= 2");
  if (processings.empty()) throw ValidationError("ensemble needs at least one processing");
  for (std::size_t t = 1; t < taus.size(); ++t)
    if (!(taus[t] > taus[t - 1])) throw ValidationError("tau list must be strictly increasing");
  for (const auto& p : processings)
    if (p.mode != Processing::Mode::open_loop && !(p.gain > -1.0)) throw ValidationError("processing gain must exceed -1");

  EnsembleResult res;
  res.processings.assign(processings.begin(), processings.end());
  res.taus.assign(taus.begin(), taus.end());
  res.n_trials = n_trials;
  res.energies.assign(n_trials, {});

  const Demodulator demod(scenario.demod, scenario.grid.dt, scenario.grid.n_samples);
  const std::size_t drop = scenario.burn_in / scenario.demod.decimation;
  const bool need_open = std::any_of(processings.begin(), processings.end(),
                                     [](const Processing& p) { return p.mode != Processing::Mode::feedback; });

  parallel_for(n_trials, threads, [&](std::size_t trial) {
    const std::uint64_t seed = derive_seed(master_seed, trial);
    const NoiseRealization noise = generate_noise(scenario.noise, scenario.grid, seed);
    std::optional<MeasurementRecord> open;
    if (need_open) open = simulate_open_loop(scenario.params, noise, scenario.grid).second;
    auto& slot = res.energies[trial];
    slot.reserve(processings.size());
    for (const auto& p : processings) {
      std::vector<double> samples;
      switch (p.mode) {
        case Processing::Mode::open_loop:
          samples = open->samples;
          break;
        case Processing::Mode::filter:
          samples = apply_filter(*open, stationary_filter(scenario.params, cold_damping_kernel(p.gain, scenario.params)))
                        .samples;
          break;
        case Processing::Mode::feedback:
          samples = simulate_closed_loop(scenario.params, noise, cold_damping_kernel(p.gain, scenario.params),
                                         scenario.grid)
                        .record.samples;
          break;
      }
      const QuadratureRecord quad = demod(samples).drop_front(drop);
      slot.push_back(energy_estimates(quad, taus));
    }
  });
  return res;
}

inline std::vector<EnergyEstimate> ensemble_stats(const EnsembleScenario& scenario, const Processing& processing,
                                                  std::span<const double> taus, std::size_t n_trials,
                                                  std::uint64_t master_seed, unsigned threads = 1) {
  const Processing one[] = {processing};
  return run_ensemble(scenario, one, taus, n_trials, master_seed, threads).stats(0);
}

/// Closed form of integral_0^inf |chi'|^2 d(omega) for linewidth gamma(1+g).
inline double chi_prime_norm_closed_form(const OscillatorParams& p, double gain) {
  const double gp = p.gamma * (1.0 + gain);
  return std::numbers::pi / (2.0 * p.mass * p.mass * gp * p.omega_m * p.omega_m);
}

/// Trapezoid quadrature of |chi'(omega)|^2 over [0, band_hi], one-sided in
/// omega. Fine uniform steps through the resonance, geometric steps in the
/// tail. Throws when the band misses more than 1% of the closed form.
inline double chi_prime_norm(const OscillatorParams& p, double gain, double band_hi = 0.0) {
  p.validate();
  if (!(gain > -1.0)) throw ValidationError("gain must exceed -1");
  const double gp = p.gamma * (1.0 + gain);
  auto f = [&](double w) {
    const double re = p.omega_m * p.omega_m - w * w;
    return 1.0 / (p.mass * p.mass * (re * re + gp * gp * w * w));
  };
  if (band_hi <= 0.0) band_hi = p.omega_m + std::max(3.0 * p.omega_m, 2000.0 * gp);
  const double split = std::min(band_hi, p.omega_m + 100.0 * gp);
  const double step = std::min(gp / 50.0, p.omega_m / 2000.0);
  const auto n1 = static_cast<std::size_t>(std::ceil(split / step));
  double acc = 0.0;
  double prev_w = 0.0, prev_f = f(0.0);
  for (std::size_t k = 1; k <= n1; ++k) {
    const double w = split * static_cast<double>(k) / static_cast<double>(n1);
    const double fw = f(w);
    acc += 0.5 * (fw + prev_f) * (w - prev_w);
    prev_w = w;
    prev_f = fw;
  }
  if (band_hi > split) {
    const std::size_t n2 = 4000;
    const double ratio = std::pow(band_hi / split, 1.0 / static_cast<double>(n2));
    double w = split;
    for (std::size_t k = 1; k <= n2; ++k) {
      const double wn = k == n2 ? band_hi : w * ratio;
      const double fw = f(wn);
      acc += 0.5 * (fw + prev_f) * (wn - w);
      w = wn;
      prev_f = fw;
    }
  }
  const double closed = chi_prime_norm_closed_form(p, gain);
  if (std::abs(acc - closed) > 0.01 * closed) {
    std::ostringstream os;
    os << "integration band [0, " << band_hi << "] too narrow: quadrature " << acc << " vs closed form " << closed;
    throw ValidationError(os.str());
  }
  return acc;
}

/// deltaF = sqrt(sigma_E / integral_0^inf |chi'|^2 d(omega)).
inline double force_sensitivity(double sigma_e, double chi_norm) {
  if (!(sigma_e >= 0.0)) throw ValidationError("sigma_E must be >= 0");
  if (!(chi_norm > 0.0)) throw ValidationError("susceptibility norm must be > 0");
  return std::sqrt(sigma_e / chi_norm);
}

inline double force_sensitivity(const EnergyEstimate& stats, const OscillatorParams& params, double gain,
                                double band_hi = 0.0) {
  if (stats.n_trials < 2) throw ValidationError("sigma_E needs at least two trials");
  return force_sensitivity(stats.sigma, chi_prime_norm(params, gain, band_hi));
}

struct SensitivityCurve {
  enum class Kind { vs_tau, vs_gain };
  std::vector<double> abscissa;
  std::vector<double> delta_f;
  Kind kind = Kind::vs_tau;

  void validate() const {
    if (abscissa.size() != delta_f.size()) throw ValidationError("curve arrays differ in length");
    for (std::size_t k = 1; k < abscissa.size(); ++k)
      if (!(abscissa[k] > abscissa[k - 1])) throw ValidationError("curve abscissa must be strictly increasing");
    for (double v : delta_f)
      if (!(v > 0.0)) throw ValidationError("curve delta_f must be > 0");
  }
};

struct ScalingFit {
  double slope = 0.0;
  double stderr_slope = 0.0;
  double intercept = 0.0;
};

/// Least-squares slope of log(deltaF) against log(tau).
inline ScalingFit fit_scaling_exponent(const SensitivityCurve& curve) {
  curve.validate();
  if (curve.kind != SensitivityCurve::Kind::vs_tau) throw ValidationError("scaling fit needs a vs_tau curve");
  const std::size_t n = curve.abscissa.size();
  if (n < 5) throw ValidationError("scaling fit needs at least 5 points");
  double sx = 0.0, sy = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    sx += std::log(curve.abscissa[k]);
    sy += std::log(curve.delta_f[k]);
  }
  const double mx = sx / static_cast<double>(n), my = sy / static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double dx = std::log(curve.abscissa[k]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(curve.delta_f[k]) - my);
  }
  ScalingFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ssr = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double r = std::log(curve.delta_f[k]) - (fit.intercept + fit.slope * std::log(curve.abscissa[k]));
    ssr += r * r;
  }
  fit.stderr_slope = std::sqrt(ssr / static_cast<double>(n - 2) / sxx);
  return fit;
}

inline SensitivityCurve sensitivity_vs_tau(std::span<const EnergyEstimate> stats, const OscillatorParams& params,
                                           double gain) {
  SensitivityCurve c;
  c.kind = SensitivityCurve::Kind::vs_tau;
  const double norm = chi_prime_norm(params, gain);
  for (const auto& s : stats) {
    c.abscissa.push_back(s.tau);
    c.delta_f.push_back(force_sensitivity(s.sigma, norm));
  }
  return c;
}

struct ResolveResult {
  double tau_resolve = 0.0;
  double gain = 0.0;
  bool resolved = false;
  std::string criterion;
};

/// Smallest tau with |<E>_signal - <E>_thermal| > sigma_E,thermal(tau),
/// interpolated linearly in log(tau) between grid points.
inline ResolveResult resolve_time(std::span<const EnergyEstimate> thermal, std::span<const EnergyEstimate> signal,
                                  double gain) {
  if (thermal.size() != signal.size() || thermal.empty()) throw ValidationError("resolve_time needs matching tau grids");
  for (std::size_t t = 0; t < thermal.size(); ++t)
    if (thermal[t].tau != signal[t].tau) throw ValidationError("resolve_time needs matching tau grids");
  ResolveResult r;
  r.gain = gain;
  r.criterion = "|mean_signal - mean_thermal| > sigma_thermal(tau)";
  auto margin = [&](std::size_t t) { return std::abs(signal[t].mean - thermal[t].mean) - thermal[t].sigma; };
  for (std::size_t t = 0; t < thermal.size(); ++t) {
    const double m = margin(t);
    if (m > 0.0) {
      r.resolved = true;
      if (t == 0) {
        r.tau_resolve = thermal[0].tau;
      } else {
        const double m0 = margin(t - 1);
        const double l0 = std::log(thermal[t - 1].tau), l1 = std::log(thermal[t].tau);
        r.tau_resolve = std::exp(l0 + (l1 - l0) * m0 / (m0 - m));
      }
      return r;
    }
  }
  r.criterion += " (not met within the tau budget)";
  return r;
}

/// Signal level whose energy is `fraction` of the thermal energy for a
/// Lorentzian signal band of the given halfwidth centred on omega_m.
inline double calibrate_signal_psd(const OscillatorParams& p, double thermal_psd, double fraction, double halfwidth) {
  if (!(halfwidth > 0.0)) throw ValidationError("signal halfwidth must be > 0");
  const double a = 0.5 * p.gamma;
  return fraction * thermal_psd * (a + halfwidth) / halfwidth;
}

/// Gain at which the in-loop record PSD at omega_m drops to the measurement
/// floor: (1 + g)^2 = 1 + peak force-noise / floor ratio.
inline double squashing_threshold(const OscillatorParams& p, const NoiseConfig& noise) {
  if (!(noise.measurement_noise_psd > 0.0)) return std::numeric_limits<double>::infinity();
  const double chi2 = std::norm(susceptibility(p.omega_m, p));
  const double snr = chi2 * (noise.thermal_force_psd + noise.backaction_force_psd) / noise.measurement_noise_psd;
  return std::sqrt(1.0 + snr) - 1.0;
}

/// Gaussian-envelope moments of the estimator for cold-damping gain g:
/// mean E and tau * Var(E_tau) in the long-tau limit.
struct EnvelopeMoments {
  double mean_energy = 0.0;
  double variance_tau = 0.0;
};

inline EnvelopeMoments envelope_moments(const OscillatorParams& p, const NoiseConfig& noise, double gain,
                                        const DemodSettings& demod) {
  const double gp = p.gamma * (1.0 + std::max(gain, 0.0));
  const double c = demod.lowpass_cutoff;
  const double span = std::min(8.0 * c, 0.999 * demod.omega_ref);
  const double step = std::min(gp / 40.0, c / 400.0);
  const auto n = static_cast<std::size_t>(std::ceil(2.0 * span / step));
  const double dw = 2.0 * span / static_cast<double>(n);
  const double corr = noise.backaction_measurement_correlation *
                      std::sqrt(noise.backaction_force_psd * noise.measurement_noise_psd);
  double e = 0.0, v = 0.0;
  for (std::size_t k = 0; k <= n; ++k) {
    const double w = -span + dw * static_cast<double>(k);
    const double om = demod.omega_ref + w;
    const std::complex<double> chi = susceptibility(om, p);
    const std::complex<double> g(0.0, -p.mass * p.gamma * om * gain);
    const double h2 = 1.0 / std::norm(1.0 - chi * g);
    double force = noise.thermal_force_psd + noise.backaction_force_psd;
    if (noise.signal_force_psd > 0.0) {
      double shape = 1.0;
      if (noise.signal_band) {
        const double q = noise.signal_band->center / (2.0 * noise.signal_band->halfwidth);
        const double x = om / noise.signal_band->center - noise.signal_band->center / om;
        shape = 1.0 / (1.0 + q * q * x * x);
      }
      force += noise.signal_force_psd * shape;
    }
    const double sx = h2 * (std::norm(chi) * force / 2.0 + noise.measurement_noise_psd / 2.0 + chi.real() * corr);
    const double l2 = 1.0 / (1.0 + std::pow(w / c, 8));
    const double sz = 4.0 * l2 * sx;
    const double wt = (k == 0 || k == n) ? 0.5 : 1.0;
    e += wt * sz;
    v += wt * sz * sz;
  }
  return {e * dw / (2.0 * std::numbers::pi), v * dw / (2.0 * std::numbers::pi)};
}

/// Long-tau prediction of deltaF at averaging time tau.
inline double predicted_sensitivity(const OscillatorParams& p, const NoiseConfig& noise, double gain,
                                    const DemodSettings& demod, double tau) {
  const EnvelopeMoments m = envelope_moments(p, noise, gain, demod);
  return std::sqrt(std::sqrt(m.variance_tau / tau) / chi_prime_norm_closed_form(p, gain));
}

}  // namespace fbsense
