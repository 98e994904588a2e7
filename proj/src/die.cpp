#include "forgenet/die.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "forgenet/errors.hpp"

namespace forgenet {

namespace {
constexpr double kMm = 1e-3;
}

void DieGeometry::validate() const {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(entry_radius) || !finite(reduction_radius) || !finite(half_angle) ||
      !finite(rounding_radius) || !finite(calibration_length) || !finite(entry_length)) {
    throw ConfigError("die geometry has non-finite values");
  }
  if (!(reduction_radius > 0.0)) throw ConfigError("die reduction_radius must be positive");
  if (!(entry_radius > reduction_radius)) {
    throw ConfigError("die reduction_radius must be below entry_radius");
  }
  if (!(half_angle > 0.0 && half_angle < 90.0)) {
    throw ConfigError("die half_angle must lie in (0, 90) degrees");
  }
  if (rounding_radius < 0.0 || calibration_length < 0.0 || entry_length < 0.0) {
    throw ConfigError("die rounding_radius, calibration_length and entry_length must be >= 0");
  }
  const double alpha = half_angle * std::numbers::pi / 180.0;
  const double slant = (entry_radius - reduction_radius) / std::sin(alpha);
  if (rounding_radius * std::tan(0.5 * alpha) > slant) {
    throw ConfigError("die rounding_radius too large for the cone");
  }
}

DieContour::DieContour(const DieGeometry& g) {
  g.validate();
  entry_radius_ = g.entry_radius * kMm;
  reduction_radius_ = g.reduction_radius * kMm;
  half_angle_ = g.half_angle * std::numbers::pi / 180.0;
  rounding_radius_ = g.rounding_radius * kMm;
  cone_extent_ = (entry_radius_ - reduction_radius_) / std::tan(half_angle_);

  // Cone runs from (R_e, 0) along (-sin a, -cos a) to the corner (r_red, -l_F);
  // the calibration wall continues straight down. The rounding arc is tangent
  // to both, with its center on the die side (+x).
  const double t = rounding_radius_ * std::tan(0.5 * half_angle_);
  const Vec2 corner{reduction_radius_, -cone_extent_};
  arc_start_ = {corner.x + t * std::sin(half_angle_), corner.z + t * std::cos(half_angle_)};
  arc_end_ = {corner.x, corner.z - t};
  arc_center_ = {arc_end_.x + rounding_radius_, arc_end_.z};

  top_z_ = g.entry_length * kMm;
  bottom_z_ = arc_end_.z - g.calibration_length * kMm;
  len_entry_ = top_z_;
  len_cone_ = std::hypot(entry_radius_ - arc_start_.x, arc_start_.z);
  len_arc_ = rounding_radius_ * half_angle_;
  len_calibration_ = g.calibration_length * kMm;
}

double DieContour::length() const { return len_entry_ + len_cone_ + len_arc_ + len_calibration_; }

double DieContour::radius_at(double z) const {
  constexpr double kFree = std::numeric_limits<double>::infinity();
  if (z > top_z_ || z < bottom_z_) return kFree;
  if (z >= 0.0) return entry_radius_;
  if (z >= arc_start_.z) return entry_radius_ + z * std::tan(half_angle_);
  if (z > arc_end_.z) {
    const double dz = z - arc_center_.z;
    return arc_center_.x - std::sqrt(std::max(0.0, rounding_radius_ * rounding_radius_ - dz * dz));
  }
  return reduction_radius_;
}

Vec2 DieContour::point_at_arc(double s) const {
  if (s <= len_entry_) return {entry_radius_, top_z_ - s};
  s -= len_entry_;
  if (s <= len_cone_) {
    return {entry_radius_ - s * std::sin(half_angle_), -s * std::cos(half_angle_)};
  }
  s -= len_cone_;
  if (s <= len_arc_ && len_arc_ > 0.0) {
    // Angle measured from the center: at arc_start the radius vector points
    // along -(cos a, -sin a); it sweeps to -(1, 0) at arc_end.
    const double theta = half_angle_ - s / rounding_radius_;
    return {arc_center_.x - rounding_radius_ * std::cos(theta),
            arc_center_.z + rounding_radius_ * std::sin(theta)};
  }
  s -= len_arc_;
  return {reduction_radius_, arc_end_.z - std::min(s, len_calibration_)};
}

std::vector<Vec2> DieContour::sample(double spacing) const {
  const double total = length();
  const auto segments = static_cast<std::size_t>(std::max(1.0, std::ceil(total / spacing)));
  std::vector<Vec2> points;
  points.reserve(segments + 1);
  for (std::size_t i = 0; i <= segments; ++i) {
    points.push_back(point_at_arc(total * static_cast<double>(i) / static_cast<double>(segments)));
  }
  return points;
}

MeshState build_die_mesh(const DieGeometry& geometry, double element_size) {
  if (!(element_size > 0.0) || !std::isfinite(element_size)) {
    throw ConfigError("element_size must be positive and finite");
  }
  const DieContour contour(geometry);
  MeshState die;
  for (const Vec2& p : contour.sample(element_size * kMm)) {
    if (p.x <= kDieRadialCutoff) die.positions.push_back(p);
  }
  die.kinds.assign(die.positions.size(), NodeKind::RigidDie);
  return die;
}

}  // namespace forgenet
