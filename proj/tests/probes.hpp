#pragma once

// Architectural probes shared by the unit tests and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <deque>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "forgenet/mesh.hpp"
#include "forgenet/nn/network.hpp"
#include "forgenet/profile.hpp"
#include "helpers.hpp"

namespace forgenet::testing {

inline nn::NetSpec tiny_spec(int hidden = 8, int blocks = 2) {
  nn::NetSpec s;
  s.hidden_dim = hidden;
  s.n_hidden_layers = 3;
  s.message_passing_steps = blocks;
  return s;
}

inline nn::Matrix random_targets(std::size_t rows, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  nn::Matrix t(static_cast<Eigen::Index>(rows), nn::kOutputDim);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = n(rng);
  return t;
}

struct TensorError {
  std::string name;
  double rel_error = 0.0;
  double max_grad = 0.0;
};

// Central differences on every parameter against loss_and_gradient.
// Per tensor: max |analytic - numeric| / max |numeric|.
inline std::vector<TensorError> finite_difference_check(const nn::ModelParameters& params,
                                                        const nn::GraphBatch& batch,
                                                        const nn::Matrix& targets, double h = 1e-6) {
  std::vector<double> grad;
  nn::loss_and_gradient(params, batch, targets, grad);
  nn::ModelParameters probe = params;
  auto loss = [&] { return nn::masked_mse(nn::forward(probe, batch), targets, batch.tube_mask); };
  std::vector<TensorError> out;
  for (const auto& t : params.layout().tensors()) {
    double worst = 0.0;
    double scale = 0.0;
    for (std::size_t i = t.offset; i < t.offset + t.size; ++i) {
      const double v = probe.values[i];
      probe.values[i] = v + h;
      const double up = loss();
      probe.values[i] = v - h;
      const double down = loss();
      probe.values[i] = v;
      const double numeric = (up - down) / (2.0 * h);
      worst = std::max(worst, std::abs(numeric - grad[i]));
      scale = std::max(scale, std::abs(numeric));
    }
    out.push_back({t.name, scale > 0.0 ? worst / scale : worst, scale});
  }
  return out;
}

// Relabels nodes by a random permutation, shuffles edge storage and returns
// max |out_perm[pi(i)] - out[i]|.
inline double permutation_error(const nn::ModelParameters& params, const MeshState& state,
                                const EdgeSets& sets, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t n = state.size();
  std::vector<std::uint32_t> pi(n);
  std::iota(pi.begin(), pi.end(), 0u);
  std::shuffle(pi.begin(), pi.end(), rng);

  MeshState permuted = state;
  for (std::size_t i = 0; i < n; ++i) {
    permuted.positions[pi[i]] = state.positions[i];
    permuted.kinds[pi[i]] = state.kinds[i];
  }
  auto remap = [&](const EdgeSet& set) {
    std::vector<std::size_t> order(set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    EdgeSet out;
    out.feature_dim = set.feature_dim;
    for (std::size_t e : order) {
      out.edges.push_back({pi[set.edges[e].src], pi[set.edges[e].dst]});
      const auto f = set.feature(e);
      out.features.insert(out.features.end(), f.begin(), f.end());
    }
    return out;
  };
  const EdgeSets psets{remap(sets.tube), remap(sets.die), remap(sets.stamp)};

  const nn::Matrix a = nn::forward(params, nn::make_graph(state, sets));
  const nn::Matrix b = nn::forward(params, nn::make_graph(permuted, psets));
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < nn::kOutputDim; ++c) {
      worst = std::max(worst, std::abs(b(pi[i], c) - a(static_cast<Eigen::Index>(i), c)));
    }
  }
  return worst;
}

// Hop distance from `source` over the union of all edge sets.
inline std::vector<int> hop_distance(std::size_t n, const EdgeSets& sets, std::size_t source) {
  std::vector<std::vector<std::uint32_t>> adj(n);
  for (const EdgeSet* s : {&sets.tube, &sets.die, &sets.stamp}) {
    for (const Edge& e : s->edges) {
      adj[e.src].push_back(e.dst);
      adj[e.dst].push_back(e.src);
    }
  }
  std::vector<int> dist(n, -1);
  std::deque<std::size_t> queue{source};
  dist[source] = 0;
  while (!queue.empty()) {
    const std::size_t v = queue.front();
    queue.pop_front();
    for (std::uint32_t w : adj[v]) {
      if (dist[w] < 0) {
        dist[w] = dist[v] + 1;
        queue.push_back(w);
      }
    }
  }
  return dist;
}

inline bool same_row_bits(const nn::Matrix& a, const nn::Matrix& b, Eigen::Index row) {
  return std::memcmp(&a(row, 0), &b(row, 0), sizeof(double) * nn::kOutputDim) == 0;
}

struct LocalityResult {
  int far_nodes = 0;
  int far_changed = 0;
  int near_changed = 0;
};

// Perturbs node `source`'s input features and compares outputs of nodes
// beyond `blocks` hops bit-wise.
inline LocalityResult locality_probe(const nn::ModelParameters& params, const MeshState& state,
                                     const EdgeSets& sets, std::size_t source) {
  const nn::GraphBatch base = nn::make_graph(state, sets);
  nn::GraphBatch moved = base;
  moved.node_features(static_cast<Eigen::Index>(source), kNodeKindCount) += 3e-5;
  moved.node_features(static_cast<Eigen::Index>(source), kNodeKindCount + 1) -= 2e-5;
  const nn::Matrix a = nn::forward(params, base);
  const nn::Matrix b = nn::forward(params, moved);
  const auto dist = hop_distance(state.size(), sets, source);
  const int k = params.spec.message_passing_steps;
  LocalityResult r;
  for (std::size_t i = 0; i < state.size(); ++i) {
    const bool changed = !same_row_bits(a, b, static_cast<Eigen::Index>(i));
    if (dist[i] < 0 || dist[i] > k) {
      ++r.far_nodes;
      r.far_changed += changed;
    } else {
      r.near_changed += changed;
    }
  }
  return r;
}

// Tube 11 x 3 with die nodes beside the lower outer column and a stamp row
// on top; long enough for nodes more than two hops from the bottom.
inline TinyScene column_scene(double mu = 0.05) {
  TubeMesh tube = build_tube_mesh(30.0, 0.8, 4.0, 0.4);
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

struct IndependenceResult {
  bool contact_empty = false;
  bool tube_bit_equal = false;
};

// With the tools out of reach, moving die and stamp nodes arbitrarily must
// leave every tube output bit-identical.
inline IndependenceResult no_contact_probe(const nn::ModelParameters& params, std::uint64_t seed) {
  TinyScene s = column_scene();
  for (std::size_t i = s.scene.topology.tube.end; i < s.scene.state.size(); ++i) {
    s.scene.state.positions[i].z += 0.02;
  }
  const EdgeSets sets = build_edge_sets(s.scene.state, s.scene.topology, 0.8e-3, 0.05);
  IndependenceResult r;
  r.contact_empty = sets.die.size() == 0 && sets.stamp.size() == 0;
  const nn::Matrix a = nn::forward(params, nn::make_graph(s.scene.state, sets));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 0.05);
  MeshState moved = s.scene.state;
  for (std::size_t i = s.scene.topology.tube.end; i < moved.size(); ++i) {
    moved.positions[i] = {u(rng), 0.03 + u(rng)};
  }
  const EdgeSets msets = build_edge_sets(moved, s.scene.topology, 0.8e-3, 0.05);
  r.contact_empty = r.contact_empty && msets.die.size() == 0 && msets.stamp.size() == 0;
  const nn::Matrix b = nn::forward(params, nn::make_graph(moved, msets));
  r.tube_bit_equal = true;
  for (std::size_t i = s.scene.topology.tube.begin; i < s.scene.topology.tube.end; ++i) {
    r.tube_bit_equal = r.tube_bit_equal && same_row_bits(a, b, static_cast<Eigen::Index>(i));
  }
  return r;
}

inline ThicknessProfile random_profile(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_int_distribution<int> count(2, 25);
  std::uniform_real_distribution<double> gap(0.05, 1.0);
  std::uniform_real_distribution<double> value(1.0, 2.0);
  const int n = count(rng);
  std::vector<double> steps(n - 1);
  double total = 0.0;
  for (double& s : steps) total += (s = gap(rng));
  ThicknessProfile p;
  double l = lo;
  for (int i = 0; i < n; ++i) {
    p.position.push_back(i + 1 == n ? hi : l);
    p.thickness.push_back(value(rng));
    if (i + 1 < n) l += steps[i] / total * (hi - lo);
  }
  return p;
}

// Independent check: uniform trapezoid quadrature of |f - g|.
inline double quadrature(const ThicknessProfile& f, const ThicknessProfile& g, int samples) {
  const double lo = std::max(f.front(), g.front());
  const double hi = std::min(f.back(), g.back());
  const double h = (hi - lo) / samples;
  double sum = 0.0;
  double prev = std::abs(f.at(lo) - g.at(lo));
  for (int i = 1; i <= samples; ++i) {
    const double l = i == samples ? hi : lo + h * i;
    const double cur = std::abs(f.at(l) - g.at(l));
    sum += 0.5 * (prev + cur) * h;
    prev = cur;
  }
  return sum;
}

}  // namespace forgenet::testing
