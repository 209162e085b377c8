#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <sstream>
#include <vector>

#include <Eigen/Eigenvalues>

#include "fbsense/kernels.hpp"
#include "fbsense/simulate.hpp"

namespace fbsense {

struct ClosedLoopResult {
  StateTrajectory trajectory;
  MeasurementRecord record;
  std::vector<double> actuation;
  // Deterministic mean displacement added by the loop (static force acting
  // through the kernel's DC response).
  double mean_shift = 0.0;
};

/// F_act = -m gamma g_f dy/dt. Effective linewidth gamma (1 + g_f).
inline FeedbackKernel cold_damping_kernel(double gain, const OscillatorParams& params) {
  params.validate();
  if (!(gain > -1.0)) {
    std::ostringstream os;
    os << "cold-damping gain " << gain << " <= -1 makes the effective damping negative (anti-damping instability)";
    throw ValidationError(os.str());
  }
  return {ColdDamping{gain, params.mass, params.gamma}, 0};
}

/// Cold damping with gain g(t_k); a constant schedule reproduces
/// cold_damping_kernel bit for bit.
inline FeedbackKernel nonstationary_schedule(std::span<const double> gain, const OscillatorParams& params,
                                             const SimGrid& grid) {
  params.validate();
  if (gain.size() != grid.n_samples) throw ValidationError("gain schedule length differs from grid.n_samples");
  for (std::size_t k = 0; k < gain.size(); ++k)
    if (!(gain[k] > -1.0)) {
      std::ostringstream os;
      os << "gain schedule entry " << k << " = " << gain[k] << " must exceed -1";
      throw ValidationError(os.str());
    }
  return {GainSchedule{std::vector<double>(gain.begin(), gain.end()), params.mass, params.gamma}, 0};
}

/// Spectral radius of the homogeneous sampled loop for a stationary kernel
/// (< 1 means the discrete loop is stable).
inline double closed_loop_spectral_radius(const OscillatorParams& params, const FeedbackKernel& kernel, double dt) {
  std::vector<double> taps;
  if (const auto* cd = std::get_if<ColdDamping>(&kernel.form)) {
    const double c = cd->mass * cd->gamma * cd->gain / dt;
    taps = {-c, c};
  } else if (const auto* st = std::get_if<StationaryTaps>(&kernel.form)) {
    taps = st->taps;
  } else {
    throw ValidationError("spectral radius is only defined for stationary kernels");
  }
  const std::size_t d = kernel.delay_steps;
  const std::size_t lags = d + taps.size() - 1;  // x_{k-1} .. x_{k-lags} carried
  const auto dim = static_cast<Eigen::Index>(2 + lags);
  const Propagator prop = Propagator::exact(params, dt);

  // Row vector u_k = sum_j taps[j] x_{k-d-j} over the state [x_k, v_k, x_{k-1}, ...].
  Eigen::RowVectorXd u = Eigen::RowVectorXd::Zero(dim);
  for (std::size_t j = 0; j < taps.size(); ++j) {
    const std::size_t lag = d + j;
    u(lag == 0 ? 0 : static_cast<Eigen::Index>(1 + lag)) += taps[j];
  }
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim, dim);
  a.block(0, 0, 2, 2) = prop.phi;
  a.topRows(2) += prop.input * u;
  if (lags > 0) {
    a(2, 0) = 1.0;
    for (Eigen::Index i = 3; i < dim; ++i) a(i, i - 1) = 1.0;
  }
  return a.eigenvalues().cwiseAbs().maxCoeff();
}

/// Static force that reproduces, without feedback, the loop's mean shift.
inline double compensating_static_force(double mean_shift, const OscillatorParams& params) {
  return mean_shift / params.static_compliance();
}

namespace detail {

inline double loop_mean_shift(const OscillatorParams& params, const NoiseRealization& noise, const FeedbackKernel& kernel,
                              const SimGrid& grid, const LoopOptions& opts) {
  if (noise.static_force == 0.0) return 0.0;
  if (kernel.is_stationary() && !opts.intrinsic) {
    const double dc = kernel_response(kernel, 0.0, grid.dt).real();
    const double c = params.static_compliance();
    const double closed = c * noise.static_force / (1.0 - c * dc);
    return closed - c * noise.static_force;
  }
  // Time-varying case: difference of the deterministic (noise-free) runs at
  // the last sample.
  NoiseRealization det = NoiseRealization::zeros(grid);
  det.static_force = noise.static_force;
  LoopOptions quiet = opts;
  quiet.instability_bound = std::numeric_limits<double>::infinity();
  StateTrajectory a, b;
  std::vector<double> ya, yb;
  integrate(params, det, grid, quiet, [](std::size_t, std::span<const double>) { return 0.0; }, a, ya, nullptr);
  integrate(params, det, grid, quiet,
            [&](std::size_t k, std::span<const double> y) { return actuation(kernel, k, y, grid.dt); }, b, yb, nullptr);
  return b.x.back() - a.x.back();
}

}  // namespace detail

/// Paired closed-loop run: same realization as the open loop, with
/// F_act[k] computed from x~[0..k] and held over step k -> k+1.
inline ClosedLoopResult simulate_closed_loop(const OscillatorParams& params, const NoiseRealization& noise,
                                             const FeedbackKernel& kernel, const SimGrid& grid,
                                             const LoopOptions& opts = {}) {
  params.validate();
  grid.validate();
  noise.check_against(grid);
  validate_kernel(kernel, grid);
  if (opts.intrinsic && opts.intrinsic->size() != grid.n_samples)
    throw ValidationError("intrinsic kernel size differs from grid.n_samples");

  ClosedLoopResult out;
  try {
    detail::integrate(
        params, noise, grid, opts,
        [&](std::size_t k, std::span<const double> y) { return actuation(kernel, k, y, grid.dt); }, out.trajectory,
        out.record.samples, &out.actuation);
  } catch (const InstabilityError& e) {
    std::ostringstream os;
    os << e.what();
    if (kernel.is_stationary()) {
      const double radius = closed_loop_spectral_radius(params, kernel, grid.dt);
      os << "; discrete loop spectral radius = " << radius
         << (radius >= 1.0 ? " (>= 1: beyond the sampled-loop stability limit, reduce gain or dt)" : " (< 1)");
    }
    throw InstabilityError(os.str());
  }
  out.record.grid = grid;
  out.record.seed = noise.seed;
  out.record.scenario_id = "feedback";
  out.mean_shift = detail::loop_mean_shift(params, noise, kernel, grid, opts);
  return out;
}

}  // namespace fbsense
