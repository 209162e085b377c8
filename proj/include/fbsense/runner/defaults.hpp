#pragma once

#include <cmath>
#include <string>

#include "fbsense/runner/config.hpp"

namespace fbsense::runner {

/// Desk-scale scenarios behind each figure bundle (scaled units, rad/s).
/// The measurement floor sits 25 dB below the open-loop thermal peak.
inline ScenarioConfig desk_base(double gamma) {
  ScenarioConfig c;
  c.unit = FrequencyUnit::rad_s;
  c.mass = 1.0;
  c.gamma = gamma;
  c.omega_m = 1.0;
  c.dt = 0.1;
  c.noise.thermal_force_psd = 1.0;
  c.noise.measurement_noise_psd = 1.0 / (gamma * gamma) / std::pow(10.0, 2.5);
  c.master_seed = 20240601;
  return c;
}

inline ScenarioConfig desk_estimation(const std::string& name, std::vector<double> gains) {
  ScenarioConfig c = desk_base(1e-2);
  c.name = name;
  c.mode = Mode::filter;
  c.estimation.processing = Processing::Mode::filter;
  c.estimation.gains = std::move(gains);
  c.estimation.taus.min = 3000.0;
  c.estimation.taus.max = 60000.0;
  c.estimation.taus.count = 9;
  c.estimation.tau_fixed = 30000.0;
  c.estimation.n_trials = 200;
  c.estimation.demod_cutoff = 0.5;
  return c;
}

inline ScenarioConfig desk_config(const std::string& figure) {
  if (figure == "fig2a") {
    ScenarioConfig c = desk_base(1e-3);
    c.name = "fig2a";
    c.mode = Mode::feedback;
    c.n_samples = std::size_t{1} << 20;
    c.spectra.gains = {0.0, 2.0, 8.0, 34.0, 72.0, 150.0};
    c.spectra.inset_gain = 1.0;
    c.spectra.segment_len = std::size_t{1} << 17;
    c.spectra.band_lo = 0.5;
    c.spectra.band_hi = 1.5;
    return c;
  }
  if (figure == "fig2b") return desk_estimation("fig2b", {0.0, 1.0, 2.4, 5.0, 10.0});
  if (figure == "fig2c") return desk_estimation("fig2c", {0.0, 1.0, 2.0, 3.0, 5.0, 8.0, 12.0, 16.0, 20.0, 30.0, 40.0});
  if (figure == "fig3a" || figure == "fig3b")
    return desk_estimation("fig3", {0.0, 1.0, 2.0, 3.0, 5.0, 8.0, 12.0, 16.0, 20.0});
  throw ValidationError("unknown figure '" + figure + "'");
}

}  // namespace fbsense::runner
