#include "forgenet/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

#include "forgenet/errors.hpp"

namespace forgenet {

namespace {

constexpr double kMm = 1e-3;

void require_positive(double v, const char* name) {
  if (!std::isfinite(v) || v <= 0.0) {
    throw ConfigError(std::string(name) + " must be positive and finite");
  }
}

std::size_t grid_count(double extent, double element_size) {
  return static_cast<std::size_t>(std::llround(extent / element_size)) + 1;
}

}  // namespace

void MeshState::validate() const {
  if (positions.empty()) throw ConfigError("mesh state is empty");
  if (positions.size() != kinds.size()) {
    throw ConfigError("mesh state positions/kinds size mismatch");
  }
  for (const Vec2& p : positions) {
    if (!std::isfinite(p.x) || !std::isfinite(p.z)) {
      throw ConfigError("mesh state has non-finite coordinates");
    }
    if (p.x < 0.0) throw ConfigError("mesh state has negative radial coordinate");
  }
}

TubeMesh build_tube_mesh(double d_a0, double s0, double length, double element_size) {
  require_positive(d_a0, "d_a0");
  require_positive(s0, "s0");
  require_positive(length, "length");
  require_positive(element_size, "element_size");
  if (!(d_a0 > 2.0 * s0)) throw ConfigError("wall thickness s0 must be below the outer radius");
  if (!(length > element_size)) throw ConfigError("tube length must exceed element_size");

  const std::size_t cols = grid_count(s0, element_size);
  const std::size_t rows = grid_count(length, element_size);
  if (cols < 2 || rows < 2) throw ConfigError("tube grid needs at least 2 nodes per direction");

  const double r_outer = 0.5 * d_a0 * kMm;
  const double r_inner = r_outer - s0 * kMm;
  const double height = length * kMm;

  TubeMesh mesh;
  auto& topo = mesh.topology;
  topo.tube_rows = rows;
  topo.tube_cols = cols;
  topo.node_count = rows * cols;
  topo.tube = {0, rows * cols};

  mesh.state.positions.reserve(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const double z = height * static_cast<double>(r) / static_cast<double>(rows - 1);
    for (std::size_t c = 0; c < cols; ++c) {
      const double x = r_inner + (r_outer - r_inner) * static_cast<double>(c) /
                                     static_cast<double>(cols - 1);
      mesh.state.positions.push_back({x, z});
    }
  }
  mesh.state.kinds.assign(rows * cols, NodeKind::DeformableTube);

  auto add_pair = [&](std::size_t a, std::size_t b) {
    topo.tube_edges.push_back({static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)});
    topo.tube_edges.push_back({static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(a)});
  };
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (c + 1 < cols) add_pair(topo.tube_node(r, c), topo.tube_node(r, c + 1));
      if (r + 1 < rows) add_pair(topo.tube_node(r, c), topo.tube_node(r + 1, c));
    }
  }
  std::sort(topo.tube_edges.begin(), topo.tube_edges.end());
  return mesh;
}

MeshState build_stamp_mesh(const TubeMesh& tube, double element_size) {
  require_positive(element_size, "element_size");
  const auto& topo = tube.topology;
  MeshState stamp;
  const std::size_t top = topo.tube_rows - 1;
  for (std::size_t c = 0; c < topo.tube_cols; ++c) {
    Vec2 p = tube.state.positions[topo.tube_node(top, c)];
    p.z += 0.5 * element_size * kMm;
    stamp.positions.push_back(p);
  }
  stamp.kinds.assign(stamp.positions.size(), NodeKind::RigidStamp);
  return stamp;
}

TubeMesh assemble_scene(const TubeMesh& tube, const MeshState& die, const MeshState& stamp) {
  TubeMesh scene = tube;
  auto& topo = scene.topology;
  const std::size_t n_tube = tube.state.size();
  topo.tube = {0, n_tube};
  topo.die = {n_tube, n_tube + die.size()};
  topo.stamp = {topo.die.end, topo.die.end + stamp.size()};
  topo.node_count = topo.stamp.end;
  auto& s = scene.state;
  s.positions.insert(s.positions.end(), die.positions.begin(), die.positions.end());
  s.kinds.insert(s.kinds.end(), die.kinds.begin(), die.kinds.end());
  s.positions.insert(s.positions.end(), stamp.positions.begin(), stamp.positions.end());
  s.kinds.insert(s.kinds.end(), stamp.kinds.begin(), stamp.kinds.end());
  return scene;
}

EdgeSet make_edge_set(std::span<const Vec2> positions, std::vector<Edge> edges, double mu) {
  EdgeSet set;
  set.feature_dim = mu < 0.0 ? kTubeEdgeFeatures : kContactEdgeFeatures;
  set.features.reserve(edges.size() * static_cast<std::size_t>(set.feature_dim));
  for (const Edge& e : edges) {
    const Vec2 d = positions[e.src] - positions[e.dst];
    set.features.push_back(d.x);
    set.features.push_back(d.z);
    set.features.push_back(std::sqrt(d.x * d.x + d.z * d.z));
    if (mu >= 0.0) set.features.push_back(mu);
  }
  set.edges = std::move(edges);
  return set;
}

namespace {

bool is_rigid(NodeKind k) { return k != NodeKind::DeformableTube; }

ContactEdges finish_contacts(const MeshState& state, std::vector<Edge> die_edges,
                             std::vector<Edge> stamp_edges, double mu) {
  std::sort(die_edges.begin(), die_edges.end());
  std::sort(stamp_edges.begin(), stamp_edges.end());
  return {make_edge_set(state.positions, std::move(die_edges), mu),
          make_edge_set(state.positions, std::move(stamp_edges), mu)};
}

void emit_pair(std::vector<Edge>& die_edges, std::vector<Edge>& stamp_edges, NodeKind kind,
               std::size_t tube_node, std::size_t rigid_node) {
  auto& out = kind == NodeKind::RigidDie ? die_edges : stamp_edges;
  out.push_back({static_cast<std::uint32_t>(tube_node), static_cast<std::uint32_t>(rigid_node)});
  out.push_back({static_cast<std::uint32_t>(rigid_node), static_cast<std::uint32_t>(tube_node)});
}

double distance(Vec2 a, Vec2 b) {
  const Vec2 d = a - b;
  return std::sqrt(d.x * d.x + d.z * d.z);
}

}  // namespace

ContactEdges dynamic_contact_edges_brute_force(const MeshState& state, double radius, double mu) {
  if (!(radius > 0.0)) throw ConfigError("contact radius must be positive");
  std::vector<Edge> die_edges;
  std::vector<Edge> stamp_edges;
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (state.kinds[i] != NodeKind::DeformableTube) continue;
    for (std::size_t j = 0; j < state.size(); ++j) {
      if (!is_rigid(state.kinds[j])) continue;
      if (distance(state.positions[i], state.positions[j]) < radius) {
        emit_pair(die_edges, stamp_edges, state.kinds[j], i, j);
      }
    }
  }
  return finish_contacts(state, std::move(die_edges), std::move(stamp_edges), mu);
}

ContactEdges dynamic_contact_edges(const MeshState& state, double radius, double mu) {
  if (!(radius > 0.0)) throw ConfigError("contact radius must be positive");

  // Hash rigid nodes into square cells of side `radius`; a query only needs
  // the 3x3 block of cells around the tube node's cell.
  auto cell_of = [radius](Vec2 p) {
    return std::pair<std::int64_t, std::int64_t>{
        static_cast<std::int64_t>(std::floor(p.x / radius)),
        static_cast<std::int64_t>(std::floor(p.z / radius))};
  };
  auto key = [](std::int64_t cx, std::int64_t cz) {
    return (static_cast<std::uint64_t>(cx) * 0x9E3779B97F4A7C15ULL) ^
           static_cast<std::uint64_t>(cz);
  };
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> grid;
  for (std::size_t j = 0; j < state.size(); ++j) {
    if (!is_rigid(state.kinds[j])) continue;
    const auto [cx, cz] = cell_of(state.positions[j]);
    grid[key(cx, cz)].push_back(static_cast<std::uint32_t>(j));
  }

  std::vector<Edge> die_edges;
  std::vector<Edge> stamp_edges;
  if (grid.empty()) return finish_contacts(state, {}, {}, mu);
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (state.kinds[i] != NodeKind::DeformableTube) continue;
    const Vec2 p = state.positions[i];
    const auto [cx, cz] = cell_of(p);
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dz = -1; dz <= 1; ++dz) {
        auto it = grid.find(key(cx + dx, cz + dz));
        if (it == grid.end()) continue;
        for (std::uint32_t j : it->second) {
          // Key collisions are possible; the exact cell check filters them.
          if (cell_of(state.positions[j]) != std::pair{cx + dx, cz + dz}) continue;
          if (distance(p, state.positions[j]) < radius) {
            emit_pair(die_edges, stamp_edges, state.kinds[j], i, j);
          }
        }
      }
    }
  }
  return finish_contacts(state, std::move(die_edges), std::move(stamp_edges), mu);
}

EdgeSets build_edge_sets(const MeshState& state, const Topology& topology, double radius,
                         double mu) {
  EdgeSets sets;
  sets.tube = make_edge_set(state.positions, topology.tube_edges);
  auto contacts = dynamic_contact_edges(state, radius, mu);
  sets.die = std::move(contacts.die);
  sets.stamp = std::move(contacts.stamp);
  return sets;
}

}  // namespace forgenet
