#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fbsense/error.hpp"
#include "fbsense/oscillator.hpp"

namespace fbsense {

struct StateTrajectory {
  std::vector<double> x;
  std::vector<double> v;
  SimGrid grid;
};

/// Sampled measurement x~(t) = x(t) + N(t) with provenance.
struct MeasurementRecord {
  std::vector<double> samples;
  SimGrid grid;
  std::uint64_t seed = 0;
  std::string scenario_id;

  void validate() const {
    grid.validate();
    if (samples.size() != grid.n_samples) throw GridMismatchError("record length differs from grid.n_samples");
  }

  // First n samples as a record of its own.
  MeasurementRecord head(std::size_t n) const {
    MeasurementRecord out = *this;
    out.samples.resize(n);
    out.grid.n_samples = n;
    return out;
  }

  // Samples from index `from` on.
  MeasurementRecord tail(std::size_t from) const {
    MeasurementRecord out = *this;
    out.samples.assign(samples.begin() + static_cast<std::ptrdiff_t>(from), samples.end());
    out.grid.n_samples = out.samples.size();
    return out;
  }
};

inline void require_same_grid(const MeasurementRecord& a, const MeasurementRecord& b) {
  if (!(a.grid == b.grid) || a.samples.size() != b.samples.size())
    throw GridMismatchError("records are sampled on different grids");
}

}  // namespace fbsense
