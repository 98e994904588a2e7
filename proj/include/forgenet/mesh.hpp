#pragma once

// Graph/mesh data model for the axisymmetric nosing scene: a deformable tube
// section, the rigid die contour and the rigid stamp face.
//
// Coordinates are (x, z) in meters: x is the radial coordinate (x >= 0), z the
// axial one. Geometry parameters on public constructors are in millimeters.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace forgenet {

enum class NodeKind : std::uint8_t { DeformableTube = 0, RigidDie = 1, RigidStamp = 2 };

inline constexpr int kNodeKindCount = 3;

struct Vec2 {
  double x = 0.0;
  double z = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.z + b.z}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.z - b.z}; }

struct MeshState {
  std::vector<Vec2> positions;
  std::vector<NodeKind> kinds;

  std::size_t size() const { return positions.size(); }

  // Throws ConfigError unless sizes agree, the state is non-empty, all
  // coordinates are finite and x >= 0.
  void validate() const;
};

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool contains(std::size_t i) const { return i >= begin && i < end; }
  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

struct Edge {
  std::uint32_t src = 0;
  std::uint32_t dst = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

// Static scene topology. Tube nodes form a structured grid stored row-major:
// index = tube.begin + row * tube_cols + col, row 0 at the bottom (lowest z),
// col 0 on the inner surface.
struct Topology {
  std::vector<Edge> tube_edges;
  std::size_t node_count = 0;
  IndexRange tube;
  IndexRange die;
  IndexRange stamp;
  std::size_t tube_rows = 0;
  std::size_t tube_cols = 0;

  std::size_t tube_node(std::size_t row, std::size_t col) const {
    return tube.begin + row * tube_cols + col;
  }
};

// Edge features: (dx, dz, dist) for tube edges, (dx, dz, dist, mu) for
// contact edges, where (dx, dz) = p_src - p_dst.
inline constexpr int kTubeEdgeFeatures = 3;
inline constexpr int kContactEdgeFeatures = 4;

struct EdgeSet {
  std::vector<Edge> edges;
  std::vector<double> features;  // row-major [edges.size(), feature_dim]
  int feature_dim = 0;

  std::size_t size() const { return edges.size(); }
  std::span<const double> feature(std::size_t e) const {
    return {features.data() + e * static_cast<std::size_t>(feature_dim),
            static_cast<std::size_t>(feature_dim)};
  }
};

struct ContactEdges {
  EdgeSet die;
  EdgeSet stamp;
};

struct EdgeSets {
  EdgeSet tube;
  EdgeSet die;
  EdgeSet stamp;
};

struct TubeMesh {
  MeshState state;
  Topology topology;
};

// Structured quad grid over the tube's axisymmetric wall section, spanning
// x in [d_a0/2 - s0, d_a0/2] and z in [0, length]. All arguments in mm.
TubeMesh build_tube_mesh(double d_a0, double s0, double length, double element_size);

// One rigid row of stamp nodes hovering half an element above the tube's top
// face, aligned with the tube columns.
MeshState build_stamp_mesh(const TubeMesh& tube, double element_size);

// Concatenates tube, die and stamp into one scene (in that index order).
TubeMesh assemble_scene(const TubeMesh& tube, const MeshState& die, const MeshState& stamp);

// Features for the given edges; mu < 0 produces 3-wide tube edge features.
EdgeSet make_edge_set(std::span<const Vec2> positions, std::vector<Edge> edges, double mu = -1.0);

// All tube<->die and tube<->stamp pairs with distance strictly below `radius`
// (meters), both directions, sorted by (src, dst). Uses a uniform hash grid.
ContactEdges dynamic_contact_edges(const MeshState& state, double radius, double mu);

// O(N*M) all-pairs reference for dynamic_contact_edges.
ContactEdges dynamic_contact_edges_brute_force(const MeshState& state, double radius, double mu);

EdgeSets build_edge_sets(const MeshState& state, const Topology& topology, double radius, double mu);

}  // namespace forgenet
