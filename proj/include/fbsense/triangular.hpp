#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <vector>

#include <Eigen/Core>

#include "fbsense/error.hpp"

namespace fbsense {

/// Lower-triangular N x N operator (diagonal included). Stored as zero,
/// Toeplitz (first column only) or packed dense rows.
class CausalMatrix {
 public:
  enum class Storage { zero, toeplitz, dense };

  CausalMatrix() = default;

  static CausalMatrix zero(std::size_t n) {
    CausalMatrix m;
    m.n_ = n;
    return m;
  }

  static CausalMatrix toeplitz(std::vector<double> first_column) {
    CausalMatrix m;
    m.n_ = first_column.size();
    m.storage_ = Storage::toeplitz;
    m.data_ = std::move(first_column);
    return m;
  }

  static CausalMatrix dense(std::size_t n) {
    CausalMatrix m;
    m.n_ = n;
    m.storage_ = Storage::dense;
    m.data_.assign(n * (n + 1) / 2, 0.0);
    return m;
  }

  /// Rejects weight above the diagonal.
  static CausalMatrix from_eigen(const Eigen::MatrixXd& a) {
    if (a.rows() != a.cols()) throw ValidationError("matrix must be square");
    const auto n = static_cast<std::size_t>(a.rows());
    CausalMatrix m = dense(n);
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t j = 0; j < n; ++j) {
        const double v = a(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j));
        if (j > k) {
          if (v != 0.0) throw NonCausalError("matrix has an entry above the diagonal");
        } else {
          m.ref(k, j) = v;
        }
      }
    return m;
  }

  std::size_t size() const { return n_; }
  Storage storage() const { return storage_; }
  bool is_zero() const { return storage_ == Storage::zero; }

  double operator()(std::size_t k, std::size_t j) const {
    if (j > k) return 0.0;
    switch (storage_) {
      case Storage::zero:
        return 0.0;
      case Storage::toeplitz:
        return data_[k - j];
      case Storage::dense:
        return data_[row_offset(k) + j];
    }
    return 0.0;
  }

  double& ref(std::size_t k, std::size_t j) {
    if (storage_ != Storage::dense) throw ValidationError("only dense storage is writable");
    return data_[row_offset(k) + j];
  }

  // Row k restricted to columns [0, k) (strictly lower part).
  double dot_strict(std::size_t k, std::span<const double> x) const {
    double acc = 0.0;
    switch (storage_) {
      case Storage::zero:
        break;
      case Storage::toeplitz:
        for (std::size_t j = 0; j < k; ++j) acc += data_[k - j] * x[j];
        break;
      case Storage::dense: {
        const double* row = &data_[row_offset(k)];
        for (std::size_t j = 0; j < k; ++j) acc += row[j] * x[j];
        break;
      }
    }
    return acc;
  }

  double diagonal(std::size_t k) const { return (*this)(k, k); }

  std::vector<double> multiply(std::span<const double> x) const {
    std::vector<double> y(n_, 0.0);
    for (std::size_t k = 0; k < n_; ++k) y[k] = dot_strict(k, x) + diagonal(k) * x[k];
    return y;
  }

  // Largest |entry|; boundedness check for kernel matrices.
  double max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  bool is_strictly_lower() const {
    for (std::size_t k = 0; k < n_; ++k)
      if (diagonal(k) != 0.0) return false;
    return true;
  }

  Eigen::MatrixXd to_eigen() const {
    const auto n = static_cast<Eigen::Index>(n_);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t k = 0; k < n_; ++k)
      for (std::size_t j = 0; j <= k; ++j)
        a(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = (*this)(k, j);
    return a;
  }

 private:
  static std::size_t row_offset(std::size_t k) { return k * (k + 1) / 2; }

  std::size_t n_ = 0;
  Storage storage_ = Storage::zero;
  std::vector<double> data_;
};

/// Solves [I - (a + b)] x = rhs by forward substitution, O(N^2).
/// A vanishing pivot is reported, never regularised.
inline std::vector<double> solve_unit_lower(const CausalMatrix& a, const CausalMatrix& b, std::span<const double> rhs) {
  const std::size_t n = rhs.size();
  if (a.size() != n || b.size() != n) throw ValidationError("triangular system size mismatch");
  std::vector<double> x(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double pivot = 1.0 - a.diagonal(k) - b.diagonal(k);
    if (!(std::abs(pivot) > 1e-300) || !std::isfinite(pivot)) {
      std::ostringstream os;
      os << "singular triangular system: pivot " << pivot << " at row " << k;
      throw SingularSystemError(os.str());
    }
    const double acc = rhs[k] + a.dot_strict(k, x) + b.dot_strict(k, x);
    x[k] = acc / pivot;
  }
  return x;
}

inline std::vector<double> solve_unit_lower(const CausalMatrix& a, std::span<const double> rhs) {
  return solve_unit_lower(a, CausalMatrix::zero(a.size()), rhs);
}

}  // namespace fbsense
