#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>
#include <unsupported/Eigen/MatrixFunctions>

#include "fbsense/error.hpp"

namespace fbsense {

/// Mass, angular damping rate and angular resonance frequency of a single
/// mechanical mode. All frequencies are in rad/s.
struct OscillatorParams {
  double mass = 1.0;
  double gamma = 1e-3;
  double omega_m = 1.0;

  static OscillatorParams from_hz(double mass, double gamma_hz, double omega_m_hz) {
    return {mass, 2.0 * std::numbers::pi * gamma_hz, 2.0 * std::numbers::pi * omega_m_hz};
  }

  void validate() const {
    if (!(mass > 0.0) || !std::isfinite(mass)) throw ValidationError("oscillator.mass must be > 0");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ValidationError("oscillator.gamma must be > 0");
    if (!(omega_m > 0.0) || !std::isfinite(omega_m))
      throw ValidationError("oscillator.omega_m must be > 0");
  }

  bool underdamped() const { return gamma < 2.0 * omega_m; }

  // Hooke's-law displacement per unit static force.
  double static_compliance() const { return 1.0 / (mass * omega_m * omega_m); }

  bool operator==(const OscillatorParams&) const = default;
};

/// Uniform sampling grid.
struct SimGrid {
  double dt = 0.1;
  std::size_t n_samples = 2;

  double duration() const { return dt * static_cast<double>(n_samples); }
  double time(std::size_t k) const { return dt * static_cast<double>(k); }

  void validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("grid.dt must be > 0");
    if (n_samples < 2) throw ValidationError("grid.n_samples must be >= 2");
  }

  /// Throws if the grid cannot resolve the resonance; returns advisory
  /// warnings otherwise.
  std::vector<std::string> validate_for(const OscillatorParams& params) const {
    validate();
    std::vector<std::string> warnings;
    const double phase_step = params.omega_m * dt;
    if (phase_step > 0.5) {
      std::ostringstream os;
      os << "grid.dt too coarse: omega_m*dt = " << phase_step << " exceeds 0.5";
      throw ValidationError(os.str());
    }
    if (phase_step > 0.1) {
      std::ostringstream os;
      os << "omega_m*dt = " << phase_step << " above recommended 0.1";
      warnings.push_back(os.str());
    }
    return warnings;
  }

  bool operator==(const SimGrid&) const = default;
};

/// chi(omega) = 1 / (m (omega_m^2 - omega^2 + i gamma omega)).
inline std::complex<double> susceptibility(double omega, const OscillatorParams& p) {
  const std::complex<double> inv(p.mass * (p.omega_m * p.omega_m - omega * omega),
                                 p.mass * p.gamma * omega);
  return 1.0 / inv;
}

/// Exact one-step map of the [x, v] system under a force held constant over
/// the step:  s[k+1] = phi * s[k] + input * F[k].
struct Propagator {
  Eigen::Matrix2d phi;
  Eigen::Vector2d input;
  double dt = 0.0;

  static Propagator exact(const OscillatorParams& p, double dt) {
    // exp of the augmented generator [[A, B], [0, 0]] gives phi and the ZOH
    // input column in one shot.
    Eigen::Matrix3d gen = Eigen::Matrix3d::Zero();
    gen(0, 1) = 1.0;
    gen(1, 0) = -p.omega_m * p.omega_m;
    gen(1, 1) = -p.gamma;
    gen(1, 2) = 1.0 / p.mass;
    const Eigen::Matrix3d e = (gen * dt).exp();
    Propagator out;
    out.phi = e.topLeftCorner<2, 2>();
    out.input = e.topRightCorner<2, 1>();
    out.dt = dt;
    return out;
  }

  void step(double& x, double& v, double force) const {
    const double xn = phi(0, 0) * x + phi(0, 1) * v + input(0) * force;
    const double vn = phi(1, 0) * x + phi(1, 1) * v + input(1) * force;
    x = xn;
    v = vn;
  }
};

/// Displacement response to a unit force held over step 0:
/// h[0] = 0, h[n] = [1 0] phi^(n-1) input.
inline std::vector<double> discrete_impulse_response(const Propagator& prop, std::size_t n) {
  std::vector<double> h(n, 0.0);
  Eigen::Vector2d s = prop.input;
  for (std::size_t k = 1; k < n; ++k) {
    h[k] = s(0);
    s = prop.phi * s;
  }
  return h;
}

/// z-domain susceptibility of the sampled loop, evaluated at z = exp(i omega dt).
inline std::complex<double> discrete_susceptibility(double omega, const Propagator& prop) {
  using C = std::complex<double>;
  const C z = std::polar(1.0, omega * prop.dt);
  Eigen::Matrix2cd m = -prop.phi.cast<C>();
  m(0, 0) += z;
  m(1, 1) += z;
  const Eigen::Vector2cd sol = m.partialPivLu().solve(prop.input.cast<C>());
  return sol(0);
}

}  // namespace fbsense
