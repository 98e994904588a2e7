#include "forgenet/process_models.hpp"

#include <cmath>
#include <numbers>

#include "forgenet/errors.hpp"

namespace forgenet::process {

namespace {

double radians(double deg) { return deg * std::numbers::pi / 180.0; }

void require(bool ok, const char* what) {
  if (!ok) throw ConfigError(what);
}

bool finite(double v) { return std::isfinite(v); }

}  // namespace

double deformation_degree(double d_a0, double d_a1) {
  require(finite(d_a0) && finite(d_a1) && d_a1 > 0.0, "diameters must be positive");
  require(d_a0 >= d_a1, "d_a1 must not exceed d_a0");
  return 2.0 * std::log(d_a0 / d_a1);
}

double diameter_for_degree(double d_a0, double phi) {
  require(d_a0 > 0.0 && phi >= 0.0, "d_a0 must be positive and phi non-negative");
  return d_a0 * std::exp(-0.5 * phi);
}

double diameter_ratio(double d_i0, double d_a0) {
  require(d_i0 > 0.0 && d_i0 < d_a0, "diameter ratio requires 0 < d_i0 < d_a0");
  return d_i0 / d_a0;
}

WallClass classify_wall(double q) { return q > 0.8 ? WallClass::Thin : WallClass::Thick; }

ThicknessChange thickness_changes(double s0, double s1) {
  require(s0 > 0.0, "s0 must be positive");
  const double ds = s1 - s0;
  return {ds, 100.0 * ds / s0};
}

double forming_zone_length(double r_ex0, double r_red, double alpha_deg) {
  require(alpha_deg > 0.0 && alpha_deg < 90.0, "alpha must lie in (0, 90) degrees");
  require(r_ex0 >= r_red, "r_ex0 must not be below r_red");
  return (r_ex0 - r_red) / std::tan(radians(alpha_deg));
}

double slenderness(double buckling_length, double second_moment, double area) {
  require(buckling_length > 0.0 && second_moment > 0.0 && area > 0.0,
          "slenderness inputs must be positive");
  return buckling_length / std::sqrt(second_moment / area);
}

double euler_buckling_stress(double youngs_modulus, double slenderness) {
  require(youngs_modulus > 0.0 && slenderness > 0.0, "E and slenderness must be positive");
  return std::numbers::pi * std::numbers::pi * youngs_modulus / (slenderness * slenderness);
}

double hollomon_flow_stress(double c, double n, double phi) {
  require(phi >= 0.0, "phi must be non-negative");
  return c * std::pow(phi, n);
}

bool tresca_buckle_check(double sigma_max, double sigma_min, double k_f0) {
  return sigma_max - sigma_min >= k_f0;
}

FoldRisk fold_risk(double d_a0, double s0) {
  require(s0 > 0.0, "s0 must be positive");
  const double ratio = d_a0 / s0;
  if (ratio > 60.0) return FoldRisk::LongitudinalFoldRisk;
  if (ratio > 4.0 && ratio < 10.0) return FoldRisk::ThickWallRegime;
  return FoldRisk::Intermediate;
}

double retraction_ratio(double d_a0, double d_a1) {
  require(d_a1 > 0.0, "d_a1 must be positive");
  return d_a0 / d_a1;
}

double predict_haarscheidt(double d_a0, double d_a1, double s0, double alpha_deg) {
  require(d_a1 > 0.0 && s0 > 0.0, "diameters and s0 must be positive");
  require(d_a0 >= d_a1, "Haarscheidt requires d_a0 >= d_a1");
  require(alpha_deg > 0.0 && alpha_deg < 90.0, "alpha must lie in (0, 90) degrees");
  const double log_arg = (d_a0 / s0) / 0.6;
  require(log_arg > 1.0, "Haarscheidt requires d_a0 / s0 > 0.6");
  return std::sqrt(d_a0 / d_a1 - 1.0) * std::pow(std::log(log_arg), 2.5) * 0.2 *
         std::sqrt(std::sin(2.0 * radians(alpha_deg)));
}

double predict_ebertshauser(double d_a0, double d_a1, double s0) {
  require(s0 > 0.0, "s0 must be positive");
  return 62.0 / (d_a0 / s0) * (retraction_ratio(d_a0, d_a1) - 1.0);
}

double predict_albert(double phi, double s0, double d_a0, double alpha_deg) {
  return -0.741 + 2.734 * phi + 1.216 * s0 - 2.394e-3 * d_a0 + 1.336e-2 * alpha_deg;
}

double predict_storoschew(double s0, double d_a0, double d_a1) {
  require(d_a1 > 0.0, "d_a1 must be positive");
  return s0 * std::sqrt(d_a0 / d_a1);
}

double dimensional_deviation(double d_a1, double d_red) { return d_a1 - d_red; }

const char* to_string(WallClass c) { return c == WallClass::Thin ? "thin" : "thick"; }

const char* to_string(FoldRisk r) {
  switch (r) {
    case FoldRisk::LongitudinalFoldRisk: return "longitudinal_fold_risk";
    case FoldRisk::ThickWallRegime: return "thick_wall_regime";
    case FoldRisk::Intermediate: return "intermediate";
  }
  return "?";
}

}  // namespace forgenet::process
