#pragma once

#include <array>
#include <cmath>
#include <numbers>

#include "fbsense/error.hpp"

namespace fbsense::dsp {

/// Second-order IIR section, transposed direct form II.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;
  double s1 = 0.0, s2 = 0.0;

  double operator()(double x) {
    const double y = b0 * x + s1;
    s1 = b1 * x - a1 * y + s2;
    s2 = b2 * x - a2 * y;
    return y;
  }

  void reset() { s1 = s2 = 0.0; }
};

// Bilinear-transform bandpass with unit gain at the (prewarped) centre:
// H(s) = (w0/Q) s / (s^2 + (w0/Q) s + w0^2), Q = w0 / (2 halfwidth).
inline Biquad bandpass(double center, double halfwidth, double dt) {
  if (!(center > 0.0) || !(halfwidth > 0.0)) throw ValidationError("bandpass needs center, halfwidth > 0");
  if (center * dt >= std::numbers::pi) throw ValidationError("bandpass center above Nyquist");
  const double k = std::tan(0.5 * center * dt);
  const double q = center / (2.0 * halfwidth);
  const double norm = 1.0 / (1.0 + k / q + k * k);
  Biquad bq;
  bq.b0 = (k / q) * norm;
  bq.b1 = 0.0;
  bq.b2 = -bq.b0;
  bq.a1 = 2.0 * (k * k - 1.0) * norm;
  bq.a2 = (1.0 - k / q + k * k) * norm;
  return bq;
}

inline Biquad lowpass(double cutoff, double q, double dt) {
  const double k = std::tan(0.5 * cutoff * dt);
  const double norm = 1.0 / (1.0 + k / q + k * k);
  Biquad bq;
  bq.b0 = k * k * norm;
  bq.b1 = 2.0 * bq.b0;
  bq.b2 = bq.b0;
  bq.a1 = 2.0 * (k * k - 1.0) * norm;
  bq.a2 = (1.0 - k / q + k * k) * norm;
  return bq;
}

/// 4th-order Butterworth low-pass as two cascaded sections.
struct Butterworth4 {
  std::array<Biquad, 2> sections;

  Butterworth4() = default;
  Butterworth4(double cutoff, double dt) {
    if (!(cutoff > 0.0)) throw ValidationError("low-pass cutoff must be > 0");
    if (cutoff * dt >= std::numbers::pi) throw ValidationError("low-pass cutoff above Nyquist");
    sections[0] = lowpass(cutoff, 1.0 / (2.0 * std::cos(std::numbers::pi / 8.0)), dt);
    sections[1] = lowpass(cutoff, 1.0 / (2.0 * std::cos(3.0 * std::numbers::pi / 8.0)), dt);
  }

  double operator()(double x) { return sections[1](sections[0](x)); }
};

}  // namespace fbsense::dsp
