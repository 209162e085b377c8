#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <mutex>
#include <numbers>
#include <span>
#include <vector>

#include <fftw3.h>

#include <Eigen/Dense>

#include "fbsense/error.hpp"
#include "fbsense/record.hpp"

namespace fbsense {

/// Power spectral density on non-negative angular frequencies.
///
/// two_sided: psd[k] is the two-sided density S(omega) with
///   variance = integral over (-inf, inf) of S d(omega)/2pi,
/// so only half the axis is stored. one_sided: freqs in Hz, psd in units/Hz,
///   variance = integral over [0, inf) of psd df.
struct Spectrum {
  enum class Sides { one_sided, two_sided };
  std::vector<double> freqs;
  std::vector<double> psd;
  Sides sides = Sides::two_sided;

  /// Integral of the density (Parseval check against the sample variance).
  double integrated_power() const {
    if (freqs.size() < 2) return 0.0;
    const double df = freqs[1] - freqs[0];
    double acc = 0.0;
    for (std::size_t k = 0; k < psd.size(); ++k) {
      const bool edge = (k == 0 || k + 1 == psd.size());
      acc += (edge ? 0.5 : 1.0) * psd[k];
    }
    acc *= df;
    return sides == Sides::two_sided ? 2.0 * acc / (2.0 * std::numbers::pi) : acc;
  }

  /// Display view in Hz, one-sided.
  Spectrum one_sided_hz() const {
    if (sides == Sides::one_sided) return *this;
    Spectrum out;
    out.sides = Sides::one_sided;
    out.freqs.resize(freqs.size());
    out.psd.resize(psd.size());
    for (std::size_t k = 0; k < freqs.size(); ++k) {
      out.freqs[k] = freqs[k] / (2.0 * std::numbers::pi);
      out.psd[k] = 2.0 * psd[k];
    }
    return out;
  }

  /// Mean density over bins with |omega - center| <= halfwidth.
  double band_mean(double center, double halfwidth) const {
    double acc = 0.0;
    std::size_t cnt = 0;
    for (std::size_t k = 0; k < freqs.size(); ++k)
      if (std::abs(freqs[k] - center) <= halfwidth) {
        acc += psd[k];
        ++cnt;
      }
    if (cnt == 0) throw ValidationError("no spectral bins inside the requested band");
    return acc / static_cast<double>(cnt);
  }
};

namespace detail {

// FFTW's planner is not thread-safe; plans are built with FFTW_ESTIMATE so
// the chosen algorithm (and therefore every output bit) is reproducible.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    in_ = static_cast<double*>(fftw_malloc(sizeof(double) * n));
    out_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)));
    std::lock_guard lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  ~RealFft() {
    {
      std::lock_guard lock(fftw_planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }

  std::span<double> input() { return {in_, n_}; }
  void execute() { fftw_execute(plan_); }
  std::complex<double> bin(std::size_t k) const { return {out_[k][0], out_[k][1]}; }
  std::size_t bins() const { return n_ / 2 + 1; }

 private:
  std::size_t n_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

class ComplexFft {
 public:
  ComplexFft(std::size_t n, int sign) : n_(n) {
    buf_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
    std::lock_guard lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_1d(static_cast<int>(n), buf_, buf_, sign, FFTW_ESTIMATE);
  }
  ComplexFft(const ComplexFft&) = delete;
  ComplexFft& operator=(const ComplexFft&) = delete;
  ~ComplexFft() {
    {
      std::lock_guard lock(fftw_planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(buf_);
  }

  std::complex<double>* data() { return reinterpret_cast<std::complex<double>*>(buf_); }
  void execute() { fftw_execute(plan_); }

 private:
  std::size_t n_;
  fftw_complex* buf_ = nullptr;
  fftw_plan plan_ = nullptr;
};

inline std::vector<double> hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t k = 0; k < n; ++k)
    w[k] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n)));
  return w;
}

inline std::vector<std::size_t> segment_starts(std::size_t n, std::size_t len, double overlap) {
  if (len < 2 || len > n) throw ValidationError("segment length must lie in [2, n_samples]");
  if (!(overlap >= 0.0 && overlap < 1.0)) throw ValidationError("overlap must lie in [0, 1)");
  const auto step = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(static_cast<double>(len) * (1.0 - overlap))));
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + len <= n; s += step) starts.push_back(s);
  return starts;
}

}  // namespace detail

/// Hann-windowed, overlapped, averaged periodogram (two-sided density).
inline Spectrum psd_welch(std::span<const double> x, double dt, std::size_t segment_len, double overlap) {
  const auto starts = detail::segment_starts(x.size(), segment_len, overlap);
  const std::vector<double> w = detail::hann(segment_len);
  double wss = 0.0;
  for (double v : w) wss += v * v;

  detail::RealFft fft(segment_len);
  std::vector<double> acc(fft.bins(), 0.0);
  for (std::size_t s : starts) {
    auto in = fft.input();
    for (std::size_t k = 0; k < segment_len; ++k) in[k] = w[k] * x[s + k];
    fft.execute();
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += std::norm(fft.bin(k));
  }
  Spectrum out;
  out.sides = Spectrum::Sides::two_sided;
  out.freqs.resize(acc.size());
  out.psd.resize(acc.size());
  const double scale = dt / (wss * static_cast<double>(starts.size()));
  const double domega = 2.0 * std::numbers::pi / (static_cast<double>(segment_len) * dt);
  for (std::size_t k = 0; k < acc.size(); ++k) {
    out.freqs[k] = domega * static_cast<double>(k);
    out.psd[k] = acc[k] * scale;
  }
  return out;
}

inline Spectrum psd_welch(const MeasurementRecord& record, std::size_t segment_len, double overlap) {
  record.validate();
  return psd_welch(record.samples, record.grid.dt, segment_len, overlap);
}

struct TransferEstimate {
  std::vector<double> freqs;
  std::vector<std::complex<double>> response;
  std::vector<double> coherence;
};

/// H(omega) = S_yx / S_xx from Welch cross spectra; the DFT uses the
/// exp(-i omega t) kernel so the result follows the exp(+i omega t) convention
/// of the susceptibility.
inline TransferEstimate transfer_function_welch(std::span<const double> input, std::span<const double> output, double dt,
                                                std::size_t segment_len, double overlap) {
  if (input.size() != output.size()) throw GridMismatchError("input and output lengths differ");
  const auto starts = detail::segment_starts(input.size(), segment_len, overlap);
  const std::vector<double> w = detail::hann(segment_len);
  detail::RealFft fx(segment_len), fy(segment_len);
  const std::size_t nb = fx.bins();
  std::vector<std::complex<double>> sxy(nb, 0.0);
  std::vector<double> sxx(nb, 0.0), syy(nb, 0.0);
  for (std::size_t s : starts) {
    auto ix = fx.input();
    auto iy = fy.input();
    for (std::size_t k = 0; k < segment_len; ++k) {
      ix[k] = w[k] * input[s + k];
      iy[k] = w[k] * output[s + k];
    }
    fx.execute();
    fy.execute();
    for (std::size_t k = 0; k < nb; ++k) {
      const auto X = fx.bin(k), Y = fy.bin(k);
      sxy[k] += Y * std::conj(X);
      sxx[k] += std::norm(X);
      syy[k] += std::norm(Y);
    }
  }
  TransferEstimate out;
  const double domega = 2.0 * std::numbers::pi / (static_cast<double>(segment_len) * dt);
  out.freqs.resize(nb);
  out.response.resize(nb);
  out.coherence.resize(nb);
  for (std::size_t k = 0; k < nb; ++k) {
    out.freqs[k] = domega * static_cast<double>(k);
    out.response[k] = sxx[k] > 0.0 ? sxy[k] / sxx[k] : std::complex<double>(0.0);
    out.coherence[k] = (sxx[k] > 0.0 && syy[k] > 0.0) ? std::norm(sxy[k]) / (sxx[k] * syy[k]) : 0.0;
  }
  return out;
}

struct LorentzianFit {
  double omega0 = 0.0;
  double fwhm = 0.0;
  double peak = 0.0;
  std::size_t bins_used = 0;
};

/// Fits S(omega) = A / ((omega0^2 - omega^2)^2 + Gamma^2 omega^2) by weighted
/// least squares on 1/S, which is a quadratic in u = omega^2. Bins are taken
/// from the peak outwards until S drops below peak / floor_ratio.
inline LorentzianFit fit_lorentzian(const Spectrum& spec, double floor_ratio = 20.0, std::size_t skip_dc = 1) {
  if (spec.psd.size() < 8) throw ValidationError("spectrum too short to fit");
  std::size_t ip = skip_dc;
  for (std::size_t k = skip_dc; k < spec.psd.size(); ++k)
    if (spec.psd[k] > spec.psd[ip]) ip = k;
  const double peak = spec.psd[ip];
  std::size_t lo = ip, hi = ip;
  while (lo > skip_dc && spec.psd[lo - 1] > peak / floor_ratio) --lo;
  while (hi + 1 < spec.psd.size() && spec.psd[hi + 1] > peak / floor_ratio) ++hi;
  const std::size_t m = hi - lo + 1;
  if (m < 5) throw ValidationError("too few bins above the floor to fit a Lorentzian (resolution too coarse)");

  // Normalise u around the peak for conditioning.
  const double u0 = spec.freqs[ip] * spec.freqs[ip];
  Eigen::MatrixXd a(static_cast<Eigen::Index>(m), 3);
  Eigen::VectorXd b(static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) {
    const double om = spec.freqs[lo + i];
    const double s = spec.psd[lo + i];
    const double du = om * om - u0;
    const double wgt = s / peak;  // error of 1/S scales as 1/S
    const auto r = static_cast<Eigen::Index>(i);
    a(r, 0) = wgt * du * du;
    a(r, 1) = wgt * du;
    a(r, 2) = wgt;
    b(r) = wgt * (peak / s);
  }
  const Eigen::Vector3d c = a.colPivHouseholderQr().solve(b);
  // peak/S = c0 du^2 + c1 du + c2 = c0 (u - u*)^2 + ..., with
  // 1/S proportional to (u - omega0^2)^2 + Gamma^2 u.
  const double qa = c(0), qb = c(1), qc = c(2);
  // (u - w0^2)^2 + G^2 u = u^2 + (G^2 - 2 w0^2) u + w0^4, in du = u - u0:
  // du^2 + (2u0 + G^2 - 2w0^2) du + (u0^2 + (G^2 - 2w0^2) u0 + w0^4)
  const double p1 = qb / qa;                 // 2u0 + G^2 - 2w0^2
  const double p0 = qc / qa;                 // u0^2 + (G^2 - 2w0^2) u0 + w0^4
  const double beta = p1 - 2.0 * u0;          // G^2 - 2w0^2
  const double w04 = p0 - u0 * u0 - beta * u0;  // w0^4
  if (!(w04 > 0.0)) throw ValidationError("Lorentzian fit failed (non-positive omega0^4)");
  const double w02 = std::sqrt(w04);
  const double g2 = beta + 2.0 * w02;
  if (!(g2 > 0.0)) throw ValidationError("Lorentzian fit failed (non-positive linewidth)");
  LorentzianFit fit;
  fit.omega0 = std::sqrt(w02);
  fit.fwhm = std::sqrt(g2);
  fit.peak = peak;
  fit.bins_used = m;
  return fit;
}

}  // namespace fbsense
