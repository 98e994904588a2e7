#pragma once

#include <cmath>
#include <random>

#include "forgenet/mesh.hpp"
#include "forgenet/nn/network.hpp"
#include "forgenet/synth_forge.hpp"

namespace forgenet::testing {

inline bool rel_close(double a, double b, double rel) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b));
}

// 4 x 3 tube grid, four die nodes beside the outer column and the stamp row
// above: 19 nodes with every edge set populated at a 0.5 mm radius.
struct TinyScene {
  TubeMesh scene;
  EdgeSets sets;
};

inline TinyScene tiny_scene(double mu = 0.05) {
  TubeMesh tube = build_tube_mesh(30.0, 0.8, 1.2, 0.4);
  MeshState die;
  for (int k = 0; k < 4; ++k) {
    die.positions.push_back({0.01505, 0.0001 + 0.0003 * k});
    die.kinds.push_back(NodeKind::RigidDie);
  }
  MeshState stamp = build_stamp_mesh(tube, 0.4);
  TinyScene s{assemble_scene(tube, die, stamp), {}};
  s.sets = build_edge_sets(s.scene.state, s.scene.topology, 0.5e-3, mu);
  return s;
}

// Standardization with non-trivial statistics so tests exercise it.
inline nn::NormalizationStats test_stats() {
  nn::NormalizationStats s = nn::NormalizationStats::identity();
  s.node.mean = {0.5, 0.2, 0.1, 0.0148, 0.0005};
  s.node.std = {0.5, 0.4, 0.3, 0.0003, 0.0004};
  s.edge[0].mean = {0.0, 0.0, 0.0004};
  s.edge[0].std = {0.0003, 0.0003, 0.0001};
  for (int t = 1; t < 3; ++t) {
    s.edge[t].mean = {0.0, 0.0, 0.0003, 0.05};
    s.edge[t].std = {0.0003, 0.0002, 0.0001, 1.0};
  }
  s.target.mean = {-2e-7, -1.5e-5};
  s.target.std = {1e-7, 3e-7};
  return s;
}

inline nn::ModelParameters random_model(const nn::NetSpec& spec, std::uint64_t seed) {
  nn::ModelParameters p = nn::init_parameters(spec, seed, false);
  p.stats = test_stats();
  // Non-trivial LayerNorm gains and offsets, and non-zero biases so no
  // pre-activation sits exactly on a ReLU kink.
  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  const nn::ParameterLayout layout(spec);
  for (const auto& t : layout.tensors()) {
    if (t.name.find(".norm.") == std::string::npos && t.name.find(".bias") == std::string::npos) continue;
    for (std::size_t i = 0; i < t.size; ++i) p.values[t.offset + i] += u(rng);
  }
  return p;
}

inline TrajectoryDataset small_dataset(double phi = 0.2, double alpha = 15.0, int n_steps = 60,
                                       std::uint64_t seed = 0) {
  TubeSpec tube;
  tube.length = 4.0;
  return generate(make_run_config(tube, phi, alpha, 0.05, n_steps, seed));
}

}  // namespace forgenet::testing
