#pragma once

#include <vector>

#include "forgenet/mesh.hpp"

namespace forgenet {

// Wall thickness over tube length, piecewise linear between samples.
// Positions and thickness in mm; positions strictly increasing.
struct ThicknessProfile {
  std::vector<double> position;
  std::vector<double> thickness;

  std::size_t size() const { return position.size(); }
  bool empty() const { return position.empty(); }
  double front() const { return position.front(); }
  double back() const { return position.back(); }

  // Linear interpolation; clamps outside the sampled range.
  double at(double l) const;

  void validate() const;
};

// Per tube row: (arc length of the mid-surface measured from the bottom row,
// outer x - inner x). Throws NumericalError for an inverted row.
ThicknessProfile thickness_profile(const MeshState& state, const Topology& topology);

// Restriction of `p` to [lo, hi] with interpolated end samples.
ThicknessProfile clip(const ThicknessProfile& p, double lo, double hi);

// Area between two thickness curves: both curves are split at every
// breakpoint and every crossing, each piece integrated exactly, and the
// absolute per-piece differences summed. Domain is the overlap of the two
// ranges; throws ConfigError if it is empty.
double abtc(const ThicknessProfile& f, const ThicknessProfile& g);

// Exact trapezoid integral of a piecewise-linear profile.
double integral(const ThicknessProfile& p);

}  // namespace forgenet
