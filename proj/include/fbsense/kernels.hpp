#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <sstream>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "fbsense/error.hpp"
#include "fbsense/oscillator.hpp"

namespace fbsense {

/// Causal two-time kernel G(t_k, t_j), j <= k, with finite memory: only lags
/// k - j <= bandwidth are stored. A force F[k] = sum_j G(k, j) y[j] already
/// includes the dt of the time integral.
class TwoTimeKernel {
 public:
  TwoTimeKernel() = default;
  TwoTimeKernel(std::size_t n, std::size_t bandwidth)
      : n_(n), bw_(bandwidth), data_(n * (bandwidth + 1), 0.0) {}

  /// Rejects any weight above the diagonal.
  static TwoTimeKernel from_dense(const Eigen::MatrixXd& dense) {
    if (dense.rows() != dense.cols()) throw ValidationError("two-time kernel must be square");
    const auto n = static_cast<std::size_t>(dense.rows());
    for (Eigen::Index k = 0; k < dense.rows(); ++k)
      for (Eigen::Index j = k + 1; j < dense.cols(); ++j)
        if (dense(k, j) != 0.0) {
          std::ostringstream os;
          os << "kernel is non-causal: entry (" << k << ", " << j << ") couples to a future sample";
          throw NonCausalError(os.str());
        }
    TwoTimeKernel out(n, n == 0 ? 0 : n - 1);
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t j = 0; j <= k; ++j) out.at(k, k - j) = dense(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j));
    return out;
  }

  /// Time-invariant kernel G(k, j) = taps[k - j].
  static TwoTimeKernel stationary(std::span<const double> taps, std::size_t n) {
    if (taps.empty()) throw ValidationError("stationary kernel needs at least one tap");
    TwoTimeKernel out(n, taps.size() - 1);
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t lag = 0; lag < taps.size(); ++lag) out.at(k, lag) = taps[lag];
    out.taps_.assign(taps.begin(), taps.end());
    return out;
  }

  std::size_t size() const { return n_; }
  std::size_t bandwidth() const { return bw_; }
  bool is_stationary() const { return !taps_.empty(); }
  std::span<const double> taps() const { return taps_; }

  double operator()(std::size_t k, std::size_t j) const {
    if (j > k || k - j > bw_) return 0.0;
    return data_[k * (bw_ + 1) + (k - j)];
  }

  void set(std::size_t k, std::size_t j, double value) {
    if (j > k) throw NonCausalError("kernel entry with tau > t is not allowed");
    if (k - j > bw_) throw ValidationError("kernel entry outside the declared memory");
    data_[k * (bw_ + 1) + (k - j)] = value;
    taps_.clear();
  }

  // Weighted history sum at row k over y[0..k].
  double apply(std::size_t k, std::span<const double> y) const {
    const std::size_t lo = k > bw_ ? k - bw_ : 0;
    const double* row = &data_[k * (bw_ + 1)];
    double acc = 0.0;
    for (std::size_t j = k + 1; j-- > lo;) acc += row[k - j] * y[j];
    return acc;
  }

  bool is_zero() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return v == 0.0; });
  }

  bool is_bounded() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  Eigen::MatrixXd dense() const {
    const auto n = static_cast<Eigen::Index>(n_);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t k = 0; k < n_; ++k)
      for (std::size_t lag = 0; lag <= std::min(bw_, k); ++lag)
        out(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k - lag)) = data_[k * (bw_ + 1) + lag];
    return out;
  }

 private:
  double& at(std::size_t k, std::size_t lag) { return data_[k * (bw_ + 1) + lag]; }

  std::size_t n_ = 0;
  std::size_t bw_ = 0;
  std::vector<double> data_;  // row-major, lag-indexed
  std::vector<double> taps_;
};

/// Velocity feedback F = -m gamma g (dy/dt), derivative by backward difference.
struct ColdDamping {
  double gain = 0.0;
  double mass = 1.0;
  double gamma = 1.0;
};

/// Time-invariant FIR feedback F[k] = sum_j taps[j] y[k - j].
struct StationaryTaps {
  std::vector<double> taps;
  double dt = 0.0;
};

/// Cold damping with a per-sample gain g(t_k).
struct GainSchedule {
  std::vector<double> gain;
  double mass = 1.0;
  double gamma = 1.0;
};

struct FeedbackKernel {
  std::variant<ColdDamping, StationaryTaps, GainSchedule, TwoTimeKernel> form;
  std::size_t delay_steps = 0;

  bool is_stationary() const {
    return std::holds_alternative<ColdDamping>(form) || std::holds_alternative<StationaryTaps>(form);
  }

  static FeedbackKernel zero() { return {ColdDamping{0.0, 1.0, 1.0}, 0}; }
};

inline double cold_damping_force(double mass, double gamma, double gain, double current, double previous, double dt) {
  return -(mass * gamma * gain) * (current - previous) / dt;
}

/// Actuation force applied over step k -> k+1, from measured samples y[0..k].
/// Samples before index 0 count as zero.
inline double actuation(const FeedbackKernel& kernel, std::size_t k, std::span<const double> y, double dt) {
  if (k < kernel.delay_steps) return 0.0;
  const std::size_t at = k - kernel.delay_steps;
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, ColdDamping>) {
          return cold_damping_force(f.mass, f.gamma, f.gain, y[at], at > 0 ? y[at - 1] : 0.0, dt);
        } else if constexpr (std::is_same_v<T, GainSchedule>) {
          return cold_damping_force(f.mass, f.gamma, f.gain[at], y[at], at > 0 ? y[at - 1] : 0.0, dt);
        } else if constexpr (std::is_same_v<T, StationaryTaps>) {
          double acc = 0.0;
          const std::size_t m = std::min(f.taps.size(), at + 1);
          for (std::size_t j = 0; j < m; ++j) acc += f.taps[j] * y[at - j];
          return acc;
        } else {
          return f.apply(at, y);
        }
      },
      kernel.form);
}

/// Structural checks against a grid: schedule length, tap dt, matrix size.
inline void validate_kernel(const FeedbackKernel& kernel, const SimGrid& grid) {
  std::visit(
      [&](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, ColdDamping>) {
          if (!(f.gain > -1.0)) throw ValidationError("cold-damping gain must exceed -1");
        } else if constexpr (std::is_same_v<T, GainSchedule>) {
          if (f.gain.size() != grid.n_samples) throw ValidationError("gain schedule length differs from grid.n_samples");
        } else if constexpr (std::is_same_v<T, StationaryTaps>) {
          if (f.taps.empty()) throw ValidationError("tap kernel is empty");
          if (f.dt != grid.dt) throw GridMismatchError("tap kernel dt differs from grid dt");
        } else {
          if (f.size() != grid.n_samples) throw ValidationError("two-time kernel size differs from grid.n_samples");
          if (!f.is_bounded()) throw ValidationError("two-time kernel has non-finite entries");
        }
      },
      kernel.form);
}

/// Discrete-time frequency response of a stationary kernel, z = exp(i omega dt).
inline std::complex<double> kernel_response(const FeedbackKernel& kernel, double omega, double dt) {
  using C = std::complex<double>;
  const C zinv = std::polar(1.0, -omega * dt);
  const C delay = std::pow(zinv, static_cast<double>(kernel.delay_steps));
  if (const auto* cd = std::get_if<ColdDamping>(&kernel.form))
    return delay * (-(cd->mass * cd->gamma * cd->gain) * (1.0 - zinv) / dt);
  if (const auto* taps = std::get_if<StationaryTaps>(&kernel.form)) {
    C acc = 0.0, zk = 1.0;
    for (double t : taps->taps) {
      acc += t * zk;
      zk *= zinv;
    }
    return delay * acc;
  }
  throw ValidationError("frequency response is only defined for stationary kernels");
}

/// Continuous-time response of the cold-damping kernel, g(omega) = -i m gamma omega g_f.
inline std::complex<double> cold_damping_response(double omega, double gain, const OscillatorParams& p) {
  return {0.0, -p.mass * p.gamma * omega * gain};
}

/// Explicit two-time form of any kernel on an n-sample grid (delay folded in).
inline TwoTimeKernel to_two_time(const FeedbackKernel& kernel, std::size_t n, double dt) {
  const std::size_t d = kernel.delay_steps;
  return std::visit(
      [&](const auto& f) -> TwoTimeKernel {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, ColdDamping> || std::is_same_v<T, GainSchedule>) {
          TwoTimeKernel out(n, d + 1);
          for (std::size_t k = d; k < n; ++k) {
            const std::size_t at = k - d;
            double g;
            if constexpr (std::is_same_v<T, ColdDamping>) g = f.gain;
            else g = f.gain[at];
            const double c = (f.mass * f.gamma * g) / dt;
            out.set(k, at, -c);
            if (at > 0) out.set(k, at - 1, c);
          }
          if constexpr (std::is_same_v<T, ColdDamping>) {
            if (d == 0) {
              const double c = (f.mass * f.gamma * f.gain) / dt;
              const std::vector<double> taps{-c, c};
              return TwoTimeKernel::stationary(taps, n);
            }
          }
          return out;
        } else if constexpr (std::is_same_v<T, StationaryTaps>) {
          std::vector<double> taps(d, 0.0);
          taps.insert(taps.end(), f.taps.begin(), f.taps.end());
          return TwoTimeKernel::stationary(taps, n);
        } else {
          if (d == 0) return f;
          TwoTimeKernel out(n, f.bandwidth() + d);
          for (std::size_t k = d; k < n; ++k)
            for (std::size_t j = (k - d > f.bandwidth() ? k - d - f.bandwidth() : 0); j <= k - d; ++j) {
              const double v = f(k - d, j);
              if (v != 0.0) out.set(k, j, v);
            }
          return out;
        }
      },
      kernel.form);
}

}  // namespace fbsense
