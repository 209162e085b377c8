#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "fbsense/dsp.hpp"
#include "fbsense/error.hpp"
#include "fbsense/oscillator.hpp"
#include "fbsense/rng.hpp"

namespace fbsense {

struct SignalBand {
  double center = 1.0;     // rad/s
  double halfwidth = 0.01;  // rad/s
  bool operator==(const SignalBand&) const = default;
};

struct NoiseLaw {
  enum class Kind { gaussian, heavy_tailed };
  Kind kind = Kind::gaussian;
  double dof = 3.0;  // Student-t degrees of freedom, heavy_tailed only

  static NoiseLaw gaussian() { return {}; }
  static NoiseLaw heavy_tailed(double dof) { return {Kind::heavy_tailed, dof}; }
  bool operator==(const NoiseLaw&) const = default;
};

/// Spectral levels of every stochastic input. A white process with level S is
/// sampled as a zero-order-hold sequence of per-step variance S / (2 dt).
struct NoiseConfig {
  double thermal_force_psd = 0.0;
  double measurement_noise_psd = 0.0;
  double backaction_force_psd = 0.0;
  double backaction_measurement_correlation = 0.0;
  // Band-limited signal force: white at this level, shaped by a unit-peak
  // bandpass when signal_band is set.
  double signal_force_psd = 0.0;
  std::optional<SignalBand> signal_band;
  double static_force = 0.0;
  NoiseLaw noise_law;

  void validate() const {
    auto nonneg = [](double v, const char* name) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError(std::string("noise.") + name + " must be >= 0");
    };
    nonneg(thermal_force_psd, "thermal_force_psd");
    nonneg(measurement_noise_psd, "measurement_noise_psd");
    nonneg(backaction_force_psd, "backaction_force_psd");
    nonneg(signal_force_psd, "signal_force_psd");
    if (!(std::abs(backaction_measurement_correlation) <= 1.0))
      throw ValidationError("noise.backaction_measurement_correlation must lie in [-1, 1]");
    if (signal_band && !(signal_band->halfwidth > 0.0))
      throw ValidationError("noise.signal_band.halfwidth must be > 0");
    if (signal_band && !(signal_band->center > 0.0))
      throw ValidationError("noise.signal_band.center must be > 0");
    if (!std::isfinite(static_force)) throw ValidationError("noise.static_force must be finite");
    if (noise_law.kind == NoiseLaw::Kind::heavy_tailed && !(noise_law.dof > 2.0))
      throw ValidationError("noise.noise_law heavy_tailed needs dof > 2 for finite variance");
  }

  bool operator==(const NoiseConfig&) const = default;
};

/// Pre-drawn noise arrays; the same realization drives paired open- and
/// closed-loop runs.
struct NoiseRealization {
  std::vector<double> thermal;
  std::vector<double> backaction;
  std::vector<double> signal;
  std::vector<double> measurement;
  double static_force = 0.0;
  SimGrid grid;
  std::uint64_t seed = 0;

  static NoiseRealization zeros(const SimGrid& grid) {
    NoiseRealization r;
    r.thermal.assign(grid.n_samples, 0.0);
    r.backaction.assign(grid.n_samples, 0.0);
    r.signal.assign(grid.n_samples, 0.0);
    r.measurement.assign(grid.n_samples, 0.0);
    r.grid = grid;
    return r;
  }

  // Sum of all external forces at step k, static term included.
  double external_force(std::size_t k) const {
    return thermal[k] + backaction[k] + signal[k] + static_force;
  }

  void check_against(const SimGrid& g) const {
    if (!(grid == g)) throw GridMismatchError("noise realization was drawn on a different grid");
    const std::size_t n = g.n_samples;
    if (thermal.size() != n || backaction.size() != n || signal.size() != n || measurement.size() != n)
      throw GridMismatchError("noise array length differs from grid.n_samples");
  }
};

namespace detail {

// Zero-mean, unit-variance variate under the configured law.
class UnitNoise {
 public:
  UnitNoise(std::uint64_t seed, Stream stream, NoiseLaw law)
      : engine_(make_engine(seed, stream)), law_(law), student_(law.kind == NoiseLaw::Kind::heavy_tailed ? law.dof : 3.0) {
    if (law_.kind == NoiseLaw::Kind::heavy_tailed) t_scale_ = std::sqrt((law_.dof - 2.0) / law_.dof);
  }

  double operator()() {
    if (law_.kind == NoiseLaw::Kind::gaussian) return normal_(engine_);
    return t_scale_ * student_(engine_);
  }

 private:
  Engine engine_;
  NoiseLaw law_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::student_t_distribution<double> student_;
  double t_scale_ = 1.0;
};

inline double white_sigma(double psd, double dt) { return std::sqrt(psd / (2.0 * dt)); }

}  // namespace detail

/// Draw a realization. Deterministic in (config, grid, seed); each component
/// uses its own sub-stream so enabling one source never perturbs another.
inline NoiseRealization generate_noise(const NoiseConfig& config, const SimGrid& grid, std::uint64_t seed) {
  config.validate();
  grid.validate();
  NoiseRealization out = NoiseRealization::zeros(grid);
  out.seed = seed;
  out.static_force = config.static_force;
  const std::size_t n = grid.n_samples;
  const double dt = grid.dt;
  const NoiseLaw law = config.noise_law;

  if (config.thermal_force_psd > 0.0) {
    detail::UnitNoise draw(seed, Stream::thermal, law);
    const double s = detail::white_sigma(config.thermal_force_psd, dt);
    for (std::size_t k = 0; k < n; ++k) out.thermal[k] = s * draw();
  }

  const double rho = config.backaction_measurement_correlation;
  const bool need_ba = config.backaction_force_psd > 0.0;
  const bool need_meas = config.measurement_noise_psd > 0.0;
  if (need_ba || (need_meas && rho != 0.0)) {
    // The backaction stream is the shared factor of the correlated pair.
    detail::UnitNoise shared(seed, Stream::backaction, law);
    detail::UnitNoise own(seed, Stream::measurement, law);
    const double s_ba = detail::white_sigma(config.backaction_force_psd, dt);
    const double s_m = detail::white_sigma(config.measurement_noise_psd, dt);
    const double rest = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    for (std::size_t k = 0; k < n; ++k) {
      const double z1 = shared();
      out.backaction[k] = s_ba * z1;
      if (need_meas) {
        const double z2 = own();
        out.measurement[k] = s_m * (rho * z1 + rest * z2);
      }
    }
  } else if (need_meas) {
    detail::UnitNoise own(seed, Stream::measurement, law);
    const double s_m = detail::white_sigma(config.measurement_noise_psd, dt);
    for (std::size_t k = 0; k < n; ++k) out.measurement[k] = s_m * own();
  }

  if (config.signal_force_psd > 0.0) {
    detail::UnitNoise draw(seed, Stream::signal, law);
    const double s = detail::white_sigma(config.signal_force_psd, dt);
    if (config.signal_band) {
      dsp::Biquad bp = dsp::bandpass(config.signal_band->center, config.signal_band->halfwidth, dt);
      for (std::size_t k = 0; k < n; ++k) out.signal[k] = bp(s * draw());
    } else {
      for (std::size_t k = 0; k < n; ++k) out.signal[k] = s * draw();
    }
  }
  return out;
}

}  // namespace fbsense
