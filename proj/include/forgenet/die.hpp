#pragma once

#include <vector>

#include "forgenet/mesh.hpp"

namespace forgenet {

// Die inner contour parameters, all lengths in mm and the half-angle in
// degrees. The cone starts at z = 0 and the die extends toward negative z:
// an entry cylinder of `entry_length` above z = 0, the cone, a tangent
// rounding of `rounding_radius` and the calibration cylinder at the
// reduction radius.
struct DieGeometry {
  double entry_radius = 15.0;
  double reduction_radius = 13.5;
  double half_angle = 10.0;
  double rounding_radius = 1.0;
  double calibration_length = 3.0;
  double entry_length = 2.0;

  void validate() const;
};

// Piecewise contour x = R(z) of the die's working surface, in meters.
class DieContour {
 public:
  explicit DieContour(const DieGeometry& geometry);

  // Radial bound at height z, or +infinity where the die does not constrain
  // the tube (above the entry or below the calibration section).
  double radius_at(double z) const;

  // Axial extent of the nominal cone (corner to corner, ignoring rounding).
  double cone_axial_extent() const { return cone_extent_; }

  double top_z() const { return top_z_; }
  double bottom_z() const { return bottom_z_; }
  double length() const;

  // Evenly spaced samples by arc length with spacing close to `spacing` (m),
  // first and last contour points included.
  std::vector<Vec2> sample(double spacing) const;

 private:
  Vec2 point_at_arc(double s) const;

  double entry_radius_;
  double reduction_radius_;
  double half_angle_;  // radians
  double rounding_radius_;
  double cone_extent_;
  double top_z_;
  double bottom_z_;
  // Tangent points of the rounding arc and its center.
  Vec2 arc_start_;
  Vec2 arc_end_;
  Vec2 arc_center_;
  double len_entry_;
  double len_cone_;
  double len_arc_;
  double len_calibration_;
};

// Die nodes: the sampled contour, restricted to x <= 17 mm.
MeshState build_die_mesh(const DieGeometry& geometry, double element_size);

inline constexpr double kDieRadialCutoff = 0.017;

}  // namespace forgenet
