#pragma once

// Kinematic nosing trajectory generator and the persisted dataset format.
//
// The generator is a kinematic idealization, not a mechanical solver. Each
// step the stamp and the tube are fed axially; rings whose outer radius has
// already been reduced by the die move slower by 1 / (1 + mu). Tube nodes
// outside the die contour are projected radially onto it, and every reduced
// ring has its wall scaled by sqrt(r_ring,0 / r_ring,t), realized by moving
// the inner nodes inward.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "forgenet/die.hpp"
#include "forgenet/mesh.hpp"

namespace forgenet {

// Tube section, all lengths in mm.
struct TubeSpec {
  double d_a0 = 30.0;
  double s0 = 1.5;
  double length = 15.6;
  double element_size = 0.4;
};

struct RunConfig {
  TubeSpec tube;
  DieGeometry die;
  double phi_target = 0.2;
  double mu = 0.05;
  double stamp_speed = 1000.0;  // mm/s
  double dt = 1.5e-5;           // s
  int n_steps = 400;
  std::uint64_t seed = 0;

  // Axial stamp feed per step in meters.
  double feed_per_step() const { return stamp_speed * 1e-3 * dt; }
  double alpha() const { return die.half_angle; }

  // Throws ConfigError. Requires r_red == (d_a0 / 2) * exp(-phi / 2) and a
  // die entry wide enough for the tube.
  void validate() const;
};

// Run configuration with the die derived from (phi, alpha): entry radius at
// the tube's outer radius, reduction radius from phi.
RunConfig make_run_config(const TubeSpec& tube, double phi, double alpha_deg, double mu,
                          int n_steps, std::uint64_t seed = 0);

// Positions of every frame, flattened [frame][node].
struct TrajectoryDataset {
  RunConfig config;
  Topology topology;
  std::vector<NodeKind> kinds;
  std::vector<Vec2> frames;
  std::string split;

  std::size_t node_count() const { return kinds.size(); }
  std::size_t frame_count() const { return kinds.empty() ? 0 : frames.size() / kinds.size(); }
  std::span<const Vec2> frame(std::size_t t) const {
    return {frames.data() + t * kinds.size(), kinds.size()};
  }
  MeshState state(std::size_t t) const;
};

// Scene z of the die's cone start, in meters. Every scene coordinate stays
// far from zero, so consecutive-frame differences are exact in float64.
inline constexpr double kSceneAxialOrigin = 0.05;

// Initial assembly (tube bottom at the cone start, die, stamp) before the
// seed perturbation.
TubeMesh initial_scene(const RunConfig& config);

TrajectoryDataset generate(const RunConfig& config);

// 2D area of the tube's wall section (sum of quad areas), m^2.
double tube_section_area(std::span<const Vec2> positions, const Topology& topology);

inline constexpr int kDatasetFormatVersion = 1;

void write_dataset(const TrajectoryDataset& ds, const std::filesystem::path& dir);
// Throws DataError on I/O failure, version or checksum mismatch, truncation
// or inconsistent counts; never returns a partial dataset.
TrajectoryDataset read_dataset(const std::filesystem::path& dir);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Deterministic train/test split over a (phi, alpha) grid. The full nosing
// parameter table reproduces its nine held-out cells; any other grid holds
// out strictly interior points, one per phi row, never corners.
Split make_split(std::span<const RunConfig> grid);

struct GridCell {
  double phi;
  double alpha;
};

// The mu = 0.05 parameter table: cells that produced in-spec parts, and the
// held-out subset.
std::vector<GridCell> nosing_table_cells();
std::vector<GridCell> nosing_table_test_cells();

}  // namespace forgenet
