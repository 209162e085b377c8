#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <utility>
#include <vector>

#include "fbsense/kernels.hpp"
#include "fbsense/noise.hpp"
#include "fbsense/oscillator.hpp"
#include "fbsense/record.hpp"

namespace fbsense {

struct LoopOptions {
  // |x| limit; default is 1e6 x a reference RMS derived from the noise.
  std::optional<double> instability_bound;
  // Susceptibility-modifying force g'_m acting on the true position x.
  const TwoTimeKernel* intrinsic = nullptr;
  double x0 = 0.0;
  double v0 = 0.0;
};

namespace detail {

inline double mean_square(std::span<const double> a) {
  double acc = 0.0;
  for (double v : a) acc += v * v;
  return a.empty() ? 0.0 : acc / static_cast<double>(a.size());
}

// Reference displacement scale for the instability guard.
inline double reference_rms(const OscillatorParams& p, const NoiseRealization& noise, const LoopOptions& opts) {
  const double dt = noise.grid.dt;
  const double force_ms = mean_square(noise.thermal) + mean_square(noise.backaction) + mean_square(noise.signal);
  const double psd = 2.0 * dt * force_ms;
  const double x_thermal = std::sqrt(psd / (4.0 * p.mass * p.mass * p.gamma * p.omega_m * p.omega_m));
  double ref = x_thermal;
  ref = std::max(ref, std::sqrt(mean_square(noise.measurement)));
  ref = std::max(ref, std::abs(noise.static_force) * p.static_compliance());
  ref = std::max(ref, std::abs(opts.x0));
  ref = std::max(ref, std::abs(opts.v0) / p.omega_m);
  return ref;
}

inline double instability_bound(const OscillatorParams& p, const NoiseRealization& noise, const LoopOptions& opts) {
  if (opts.instability_bound) return *opts.instability_bound;
  const double ref = reference_rms(p, noise, opts);
  return ref > 0.0 ? 1e6 * ref : std::numeric_limits<double>::infinity();
}

/// Shared per-step loop for open and closed loop runs. `act(k, y)` returns the
/// actuation from measured samples y[0..k]; it is applied over step k -> k+1.
template <class Actuate>
void integrate(const OscillatorParams& params, const NoiseRealization& noise, const SimGrid& grid, const LoopOptions& opts,
               Actuate&& act, StateTrajectory& traj, std::vector<double>& measured, std::vector<double>* actuation_out) {
  const std::size_t n = grid.n_samples;
  const Propagator prop = Propagator::exact(params, grid.dt);
  const double bound = instability_bound(params, noise, opts);
  traj.x.assign(n, 0.0);
  traj.v.assign(n, 0.0);
  traj.grid = grid;
  measured.assign(n, 0.0);
  if (actuation_out) actuation_out->assign(n, 0.0);

  double x = opts.x0;
  double v = opts.v0;
  for (std::size_t k = 0; k < n; ++k) {
    traj.x[k] = x;
    traj.v[k] = v;
    if (!(std::abs(x) <= bound)) {
      std::ostringstream os;
      os << "closed loop diverged at step " << k << " (t = " << grid.time(k) << "): |x| = " << std::abs(x)
         << " exceeds bound " << bound;
      throw InstabilityError(os.str());
    }
    measured[k] = x + noise.measurement[k];
    double force = noise.external_force(k);
    if (opts.intrinsic) force += opts.intrinsic->apply(k, std::span<const double>(traj.x.data(), k + 1));
    const double u = act(k, std::span<const double>(measured.data(), k + 1));
    if (actuation_out) (*actuation_out)[k] = u;
    prop.step(x, v, force + u);
  }
}

}  // namespace detail

/// Feedback-free evolution driven by the realization; record = x + measurement noise.
inline std::pair<StateTrajectory, MeasurementRecord> simulate_open_loop(const OscillatorParams& params,
                                                                        const NoiseRealization& noise,
                                                                        const SimGrid& grid,
                                                                        const LoopOptions& opts = {}) {
  params.validate();
  grid.validate();
  noise.check_against(grid);
  if (opts.intrinsic && opts.intrinsic->size() != grid.n_samples)
    throw ValidationError("intrinsic kernel size differs from grid.n_samples");
  StateTrajectory traj;
  MeasurementRecord rec;
  detail::integrate(params, noise, grid, opts, [](std::size_t, std::span<const double>) { return 0.0; }, traj, rec.samples,
                    nullptr);
  rec.grid = grid;
  rec.seed = noise.seed;
  rec.scenario_id = "open_loop";
  return {std::move(traj), std::move(rec)};
}

}  // namespace fbsense
