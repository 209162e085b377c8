#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fbsense/feedback.hpp"
#include "fbsense/kernels.hpp"
#include "fbsense/oscillator.hpp"
#include "fbsense/record.hpp"
#include "fbsense/spectrum.hpp"
#include "fbsense/triangular.hpp"

namespace fbsense {

/// h = 1 / (1 - chi g), realised as the loop recursion driven by the
/// feedback-free record. inverse = true gives 1 - chi g.
struct StationaryRational {
  OscillatorParams params;
  FeedbackKernel kernel;
  bool inverse = false;
};

/// Plain causal FIR filter y[k] = sum_j taps[j] x[k - j].
struct ImpulseTaps {
  std::vector<double> taps;
  double dt = 0.0;
};

struct FilterSpec {
  std::variant<StationaryRational, ImpulseTaps> form;
  std::string label;

  static FilterSpec identity(double dt) { return {ImpulseTaps{{1.0}, dt}, "identity"}; }

  /// Continuous-frequency response 1 / (1 - chi(omega) g(omega)); for cold
  /// damping g = -i m gamma omega g_f, so h = chi'/chi.
  std::complex<double> response(double omega) const {
    if (const auto* taps = std::get_if<ImpulseTaps>(&form)) return fir_response(*taps, omega);
    const auto& sr = std::get<StationaryRational>(form);
    std::complex<double> g;
    if (const auto* cd = std::get_if<ColdDamping>(&sr.kernel.form)) {
      g = cold_damping_response(omega, cd->gain, sr.params);
      if (sr.kernel.delay_steps > 0) throw ValidationError("continuous response undefined for a sampled delay; use discrete_response");
    } else {
      const auto& st = std::get<StationaryTaps>(sr.kernel.form);
      g = kernel_response(sr.kernel, omega, st.dt);
    }
    const std::complex<double> loop = 1.0 - susceptibility(omega, sr.params) * g;
    return sr.inverse ? loop : 1.0 / loop;
  }

  /// Exact response of the implemented sampled recursion, z = exp(i omega dt).
  std::complex<double> discrete_response(double omega, double dt) const {
    if (const auto* taps = std::get_if<ImpulseTaps>(&form)) return fir_response(*taps, omega);
    const auto& sr = std::get<StationaryRational>(form);
    const Propagator prop = Propagator::exact(sr.params, dt);
    const std::complex<double> loop = 1.0 - discrete_susceptibility(omega, prop) * kernel_response(sr.kernel, omega, dt);
    return sr.inverse ? loop : 1.0 / loop;
  }

 private:
  static std::complex<double> fir_response(const ImpulseTaps& f, double omega) {
    std::complex<double> acc = 0.0, z = 1.0;
    const std::complex<double> zinv = std::polar(1.0, -omega * f.dt);
    for (double t : f.taps) {
      acc += t * z;
      z *= zinv;
    }
    return acc;
  }
};

/// Filter mapping the feedback-free record onto the record the given
/// stationary feedback would have produced.
inline FilterSpec stationary_filter(const OscillatorParams& params, const FeedbackKernel& kernel) {
  params.validate();
  if (!kernel.is_stationary())
    throw ValidationError("stationary_filter needs a stationary kernel; use discretize_kernels + fredholm_solve");
  std::string label = "stationary";
  if (const auto* cd = std::get_if<ColdDamping>(&kernel.form)) label = "cold_damping g_f=" + std::to_string(cd->gain);
  return {StationaryRational{params, kernel, false}, label};
}

inline FilterSpec inverse_filter(const FilterSpec& filter) {
  const auto* sr = std::get_if<StationaryRational>(&filter.form);
  if (!sr) throw ValidationError("inverse of a plain FIR filter is not provided");
  FilterSpec out = filter;
  std::get<StationaryRational>(out.form).inverse = !sr->inverse;
  out.label = (sr->inverse ? "" : "inverse ") + filter.label;
  return out;
}

/// Causal time-domain application. For the rational form this runs the same
/// exact propagator and discrete derivative as the loop: with z the state
/// driven only by the actuation,
///   y[k] = x0[k] + z_x[k],  u[k] = actuation(y[0..k]),  z <- phi z + input u[k].
/// Output k depends only on input samples 0..k.
inline MeasurementRecord apply_filter(const MeasurementRecord& record0, const FilterSpec& filter) {
  record0.validate();
  const std::size_t n = record0.samples.size();
  const double dt = record0.grid.dt;
  MeasurementRecord out;
  out.grid = record0.grid;
  out.seed = record0.seed;
  out.scenario_id = record0.scenario_id + "|" + filter.label;
  out.samples.assign(n, 0.0);
  const auto& x0 = record0.samples;

  if (const auto* fir = std::get_if<ImpulseTaps>(&filter.form)) {
    if (fir->dt != dt) throw GridMismatchError("filter dt differs from record dt");
    for (std::size_t k = 0; k < n; ++k) {
      double acc = 0.0;
      const std::size_t m = std::min(fir->taps.size(), k + 1);
      for (std::size_t j = 0; j < m; ++j) acc += fir->taps[j] * x0[k - j];
      out.samples[k] = acc;
    }
    return out;
  }

  const auto& sr = std::get<StationaryRational>(filter.form);
  validate_kernel(sr.kernel, record0.grid);
  const Propagator prop = Propagator::exact(sr.params, dt);
  double zx = 0.0, zv = 0.0;
  if (!sr.inverse) {
    for (std::size_t k = 0; k < n; ++k) {
      out.samples[k] = x0[k] + zx;
      const double u = actuation(sr.kernel, k, std::span<const double>(out.samples.data(), k + 1), dt);
      prop.step(zx, zv, u);
    }
  } else {
    // Input is the with-feedback record; recover the feedback-free one.
    for (std::size_t k = 0; k < n; ++k) {
      out.samples[k] = x0[k] - zx;
      const double u = actuation(sr.kernel, k, std::span<const double>(x0.data(), k + 1), dt);
      prop.step(zx, zv, u);
    }
  }
  return out;
}

/// Frequency-domain cross-check: zero-padded FFT multiplication by the exact
/// discrete response. Agrees with apply_filter away from the record edges.
inline MeasurementRecord apply_filter_fft(const MeasurementRecord& record0, const FilterSpec& filter) {
  record0.validate();
  const std::size_t n = record0.samples.size();
  std::size_t m = 1;
  while (m < 2 * n) m <<= 1;
  const double dt = record0.grid.dt;
  detail::ComplexFft fwd(m, FFTW_FORWARD), bwd(m, FFTW_BACKWARD);
  auto* a = fwd.data();
  for (std::size_t k = 0; k < m; ++k) a[k] = k < n ? record0.samples[k] : 0.0;
  fwd.execute();
  auto* b = bwd.data();
  for (std::size_t k = 0; k < m; ++k) {
    const double idx = k <= m / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(m);
    const double omega = 2.0 * std::numbers::pi * idx / (static_cast<double>(m) * dt);
    b[k] = a[k] * filter.discrete_response(omega, dt);
  }
  bwd.execute();
  MeasurementRecord out = record0;
  out.scenario_id = record0.scenario_id + "|fft " + filter.label;
  for (std::size_t k = 0; k < n; ++k) out.samples[k] = b[k].real() / static_cast<double>(m);
  return out;
}

/// Discretised combined transfer operators of the Fredholm form
///   [I - (H_m + H_act)] x~ = [I - H_m] x~0.
struct KernelMatrix {
  CausalMatrix h_m;
  CausalMatrix h_act;
  SimGrid grid;
};

namespace detail {

inline CausalMatrix discretize_one(const TwoTimeKernel* g, std::span<const double> chi, std::size_t n) {
  if (!g || g->is_zero()) return CausalMatrix::zero(n);
  if (g->size() != n) throw ValidationError("two-time kernel size differs from grid.n_samples");
  if (!g->is_bounded()) throw ValidationError("two-time kernel has non-finite entries");
  if (g->is_stationary()) {
    const auto taps = g->taps();
    std::vector<double> col(n, 0.0);
    for (std::size_t d = 1; d < n; ++d) {
      double acc = 0.0;
      const std::size_t lmax = std::min(d - 1, taps.size() - 1);
      for (std::size_t l = 0; l <= lmax; ++l) acc += chi[d - l] * taps[l];
      col[d] = acc;
    }
    return CausalMatrix::toeplitz(std::move(col));
  }
  // H[k][j] = sum_{i=j}^{min(k-1, j+bw)} chi[k-i] G(i, j); diagonal is zero
  // because chi[0] = 0 under zero-order hold.
  const std::size_t bw = g->bandwidth();
  CausalMatrix h = CausalMatrix::dense(n);
  for (std::size_t k = 1; k < n; ++k) {
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t imax = std::min(k - 1, j + bw);
      double acc = 0.0;
      for (std::size_t i = j; i <= imax; ++i) acc += chi[k - i] * (*g)(i, j);
      h.ref(k, j) = acc;
    }
  }
  return h;
}

}  // namespace detail

/// Builds H_m, H_act by convolving each two-time kernel with the exact
/// sampled impulse response of chi. A null pointer means a zero kernel.
inline KernelMatrix discretize_kernels(const TwoTimeKernel* g_m_prime, const TwoTimeKernel* g_act_prime,
                                       const OscillatorParams& params, const SimGrid& grid) {
  params.validate();
  grid.validate();
  const Propagator prop = Propagator::exact(params, grid.dt);
  const std::vector<double> chi = discrete_impulse_response(prop, grid.n_samples);
  KernelMatrix out;
  out.grid = grid;
  out.h_m = detail::discretize_one(g_m_prime, chi, grid.n_samples);
  out.h_act = detail::discretize_one(g_act_prime, chi, grid.n_samples);
  return out;
}

/// Dense-input overload; rejects kernels with weight at tau > t.
inline KernelMatrix discretize_kernels(const Eigen::MatrixXd& g_m_prime, const Eigen::MatrixXd& g_act_prime,
                                       const OscillatorParams& params, const SimGrid& grid) {
  const TwoTimeKernel gm = TwoTimeKernel::from_dense(g_m_prime);
  const TwoTimeKernel ga = TwoTimeKernel::from_dense(g_act_prime);
  return discretize_kernels(&gm, &ga, params, grid);
}

/// x~ = [I - (H_m + H_act)]^{-1} [I - H_m] x~0 by forward substitution.
inline MeasurementRecord fredholm_solve(const KernelMatrix& kmat, const MeasurementRecord& record0) {
  record0.validate();
  if (!(kmat.grid == record0.grid)) throw GridMismatchError("kernel matrix and record grids differ");
  const auto& x0 = record0.samples;
  const std::size_t n = x0.size();
  std::vector<double> rhs(n);
  for (std::size_t k = 0; k < n; ++k)
    rhs[k] = x0[k] - (kmat.h_m.dot_strict(k, x0) + kmat.h_m.diagonal(k) * x0[k]);
  MeasurementRecord out;
  out.grid = record0.grid;
  out.seed = record0.seed;
  out.scenario_id = record0.scenario_id + "|fredholm";
  out.samples = solve_unit_lower(kmat.h_m, kmat.h_act, rhs);
  return out;
}

/// Inverse map x~ -> x~0: [I - H_m] x~0 = [I - (H_m + H_act)] x~.
inline MeasurementRecord fredholm_inverse(const KernelMatrix& kmat, const MeasurementRecord& record) {
  record.validate();
  if (!(kmat.grid == record.grid)) throw GridMismatchError("kernel matrix and record grids differ");
  const auto& x = record.samples;
  const std::size_t n = x.size();
  std::vector<double> rhs(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double hx = kmat.h_m.dot_strict(k, x) + kmat.h_m.diagonal(k) * x[k] + kmat.h_act.dot_strict(k, x) +
                      kmat.h_act.diagonal(k) * x[k];
    rhs[k] = x[k] - hx;
  }
  MeasurementRecord out = record;
  out.scenario_id = record.scenario_id + "|fredholm_inverse";
  out.samples = solve_unit_lower(kmat.h_m, rhs);
  return out;
}

struct EquivalenceReport {
  double relative_l2_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t n_samples = 0;
  std::string scenario_a;
  std::string scenario_b;
  // Fractional PSD difference (b - a) / a per Welch bin.
  std::vector<double> psd_freqs;
  std::vector<double> psd_fractional_difference;
  double psd_fraction_mean = 0.0;
  double psd_fraction_stderr = 0.0;

  bool equivalent(double tolerance = 1e-8) const { return relative_l2_error <= tolerance; }
};

/// Sample-level and spectral comparison of two records on the same grid.
/// relative_l2 = ||b - a|| / ||a|| (absolute when ||a|| = 0). The spectral
/// summary covers bins whose centre lies in [band_lo, band_hi] (whole axis
/// when band_hi <= band_lo).
inline EquivalenceReport verify_equivalence(const MeasurementRecord& record_fb, const MeasurementRecord& record_filtered,
                                            std::size_t segment_len = 0, double band_lo = 0.0, double band_hi = 0.0) {
  record_fb.validate();
  record_filtered.validate();
  require_same_grid(record_fb, record_filtered);
  EquivalenceReport rep;
  rep.n_samples = record_fb.samples.size();
  rep.scenario_a = record_fb.scenario_id;
  rep.scenario_b = record_filtered.scenario_id;
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < rep.n_samples; ++k) {
    const double d = record_filtered.samples[k] - record_fb.samples[k];
    num += d * d;
    den += record_fb.samples[k] * record_fb.samples[k];
    rep.max_abs_error = std::max(rep.max_abs_error, std::abs(d));
  }
  rep.relative_l2_error = den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);

  if (segment_len == 0) segment_len = std::min<std::size_t>(rep.n_samples, 4096);
  if (segment_len >= 8) {
    const Spectrum a = psd_welch(record_fb, segment_len, 0.5);
    const Spectrum b = psd_welch(record_filtered, segment_len, 0.5);
    rep.psd_freqs = a.freqs;
    rep.psd_fractional_difference.resize(a.psd.size(), 0.0);
    double s = 0.0, s2 = 0.0;
    std::size_t cnt = 0;
    for (std::size_t k = 0; k < a.psd.size(); ++k) {
      const double f = a.psd[k] > 0.0 ? (b.psd[k] - a.psd[k]) / a.psd[k] : (b.psd[k] > 0.0 ? 1.0 : 0.0);
      rep.psd_fractional_difference[k] = f;
      const bool in_band = band_hi <= band_lo || (a.freqs[k] >= band_lo && a.freqs[k] <= band_hi);
      if (k > 0 && in_band) {
        s += f;
        s2 += f * f;
        ++cnt;
      }
    }
    if (cnt > 1) {
      rep.psd_fraction_mean = s / static_cast<double>(cnt);
      const double var = std::max(0.0, s2 / static_cast<double>(cnt) - rep.psd_fraction_mean * rep.psd_fraction_mean);
      rep.psd_fraction_stderr = std::sqrt(var / static_cast<double>(cnt - 1));
    }
  }
  return rep;
}

}  // namespace fbsense
