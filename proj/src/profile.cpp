#include "forgenet/profile.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "forgenet/errors.hpp"

namespace forgenet {

double ThicknessProfile::at(double l) const {
  if (l <= position.front()) return thickness.front();
  if (l >= position.back()) return thickness.back();
  const auto it = std::upper_bound(position.begin(), position.end(), l);
  const auto i = static_cast<std::size_t>(it - position.begin());
  const double t = (l - position[i - 1]) / (position[i] - position[i - 1]);
  return thickness[i - 1] + t * (thickness[i] - thickness[i - 1]);
}

void ThicknessProfile::validate() const {
  if (position.size() != thickness.size() || position.size() < 2) {
    throw ConfigError("thickness profile needs at least two aligned samples");
  }
  for (std::size_t i = 1; i < position.size(); ++i) {
    if (!(position[i] > position[i - 1])) {
      throw ConfigError("thickness profile positions must be strictly increasing");
    }
  }
}

ThicknessProfile thickness_profile(const MeshState& state, const Topology& topology) {
  if (topology.tube_rows < 2 || topology.tube_cols < 2 ||
      topology.tube.end > state.size()) {
    throw ConfigError("thickness_profile needs an intact tube grid");
  }
  constexpr double kToMm = 1e3;
  ThicknessProfile profile;
  double arc = 0.0;
  Vec2 prev_mid{};
  const std::size_t outer_col = topology.tube_cols - 1;
  for (std::size_t row = 0; row < topology.tube_rows; ++row) {
    const Vec2 inner = state.positions[topology.tube_node(row, 0)];
    const Vec2 outer = state.positions[topology.tube_node(row, outer_col)];
    const double s = outer.x - inner.x;
    if (!(s > 0.0)) {
      throw NumericalError("inverted tube row " + std::to_string(row) +
                           ": outer x below inner x");
    }
    const Vec2 mid{0.5 * (inner.x + outer.x), 0.5 * (inner.z + outer.z)};
    if (row > 0) arc += std::hypot(mid.x - prev_mid.x, mid.z - prev_mid.z);
    prev_mid = mid;
    profile.position.push_back(arc * kToMm);
    profile.thickness.push_back(s * kToMm);
  }
  return profile;
}

ThicknessProfile clip(const ThicknessProfile& p, double lo, double hi) {
  ThicknessProfile out;
  lo = std::max(lo, p.front());
  hi = std::min(hi, p.back());
  if (!(hi > lo)) return out;
  out.position.push_back(lo);
  out.thickness.push_back(p.at(lo));
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.position[i] > lo && p.position[i] < hi) {
      out.position.push_back(p.position[i]);
      out.thickness.push_back(p.thickness[i]);
    }
  }
  out.position.push_back(hi);
  out.thickness.push_back(p.at(hi));
  return out;
}

double integral(const ThicknessProfile& p) {
  double sum = 0.0;
  for (std::size_t i = 1; i < p.size(); ++i) {
    sum += 0.5 * (p.thickness[i] + p.thickness[i - 1]) * (p.position[i] - p.position[i - 1]);
  }
  return sum;
}

double abtc(const ThicknessProfile& f, const ThicknessProfile& g) {
  f.validate();
  g.validate();
  const double lo = std::max(f.front(), g.front());
  const double hi = std::min(f.back(), g.back());
  if (!(hi > lo)) throw ConfigError("thickness profiles do not overlap");

  std::vector<double> breaks{lo, hi};
  for (const auto* p : {&f, &g}) {
    for (double x : p->position) {
      if (x > lo && x < hi) breaks.push_back(x);
    }
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

  // Between consecutive breakpoints f - g is linear; split at its root if it
  // changes sign, then every piece has one sign and |int(f) - int(g)| is the
  // absolute trapezoid of the difference.
  double area = 0.0;
  for (std::size_t i = 1; i < breaks.size(); ++i) {
    const double a = breaks[i - 1];
    const double b = breaks[i];
    const double ha = f.at(a) - g.at(a);
    const double hb = f.at(b) - g.at(b);
    if ((ha < 0.0 && hb > 0.0) || (ha > 0.0 && hb < 0.0)) {
      const double c = a + (b - a) * ha / (ha - hb);
      area += 0.5 * std::abs(ha) * (c - a) + 0.5 * std::abs(hb) * (b - c);
    } else {
      area += 0.5 * std::abs(ha + hb) * (b - a);
    }
  }
  return area;
}

}  // namespace forgenet
