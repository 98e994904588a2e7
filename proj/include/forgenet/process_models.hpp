#pragma once

// Closed-form nosing process relations: deformation measures, buckling and
// flow-stress checks, and the four literature predictors for wall
// thickening. Lengths in mm, stresses in MPa, angles in degrees.

namespace forgenet::process {

// CuZn39Pb2 (CW612N) material card used by the forging model.
struct MaterialCard {
  double youngs_modulus = 105000.0;        // E [MPa]
  double strength_coefficient = 794.965;   // C [MPa]
  double hardening_exponent = 0.334;       // n [-]
  double tensile_strength = 395.0;         // R_m [MPa]
};

enum class WallClass { Thin, Thick };
enum class FoldRisk { LongitudinalFoldRisk, ThickWallRegime, Intermediate };

struct ThicknessChange {
  double absolute;  // s1 - s0 [mm]
  double relative;  // percent of s0
};

double deformation_degree(double d_a0, double d_a1);
double diameter_ratio(double d_i0, double d_a0);
// Thin-walled strictly above Q = 0.8.
WallClass classify_wall(double q);
ThicknessChange thickness_changes(double s0, double s1);
double forming_zone_length(double r_ex0, double r_red, double alpha_deg);
double slenderness(double buckling_length, double second_moment, double area);
double euler_buckling_stress(double youngs_modulus, double slenderness);
double hollomon_flow_stress(double c, double n, double phi);
// True once the Tresca difference reaches the initial flow stress.
bool tresca_buckle_check(double sigma_max, double sigma_min, double k_f0);
FoldRisk fold_risk(double d_a0, double s0);
double retraction_ratio(double d_a0, double d_a1);

// Wall thickening predictors. Haarscheidt and Ebertshaeuser return delta-s,
// Albert and Storoschew return the final thickness s1.
double predict_haarscheidt(double d_a0, double d_a1, double s0, double alpha_deg);
double predict_ebertshauser(double d_a0, double d_a1, double s0);
// Raw affine fit; not range-checked, may be non-physical outside its data.
double predict_albert(double phi, double s0, double d_a0, double alpha_deg);
double predict_storoschew(double s0, double d_a0, double d_a1);

double dimensional_deviation(double d_a1, double d_red);

// Outer diameter after a reduction of degree phi: d_a0 * exp(-phi / 2).
double diameter_for_degree(double d_a0, double phi);

const char* to_string(WallClass c);
const char* to_string(FoldRisk r);

}  // namespace forgenet::process
