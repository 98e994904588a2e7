#include "forgenet/nn/network.hpp"

#include <cmath>
#include <random>

#include "forgenet/errors.hpp"

namespace forgenet::nn {

namespace {

constexpr EdgeType kEdgeOrder[kEdgeTypes] = {EdgeType::Tube, EdgeType::Die, EdgeType::Stamp};

// Column slot of each edge set's aggregate in the node-update input
// [n, sum e_die, sum e_tube, sum e_stamp].
int aggregate_slot(EdgeType t) {
  switch (t) {
    case EdgeType::Die: return 1;
    case EdgeType::Tube: return 2;
    case EdgeType::Stamp: return 3;
  }
  return 0;
}

const char* edge_name(EdgeType t) {
  switch (t) {
    case EdgeType::Tube: return "tube";
    case EdgeType::Die: return "die";
    case EdgeType::Stamp: return "stamp";
  }
  return "?";
}

MlpSpec hidden_mlp(const NetSpec& spec, int input_dim) {
  return MlpSpec{input_dim, spec.hidden_dim, spec.n_hidden_layers, spec.hidden_dim, true};
}

void append_tensors(std::vector<ParameterLayout::Tensor>& out, const std::string& name,
                    const MlpLayout& m) {
  for (int l = 0; l < m.layer_count(); ++l) {
    const std::string p = name + ".linear" + std::to_string(l);
    out.push_back({p + ".weight", m.weight_offset[static_cast<std::size_t>(l)],
                   static_cast<std::size_t>(m.layer_in(l)) * m.layer_out(l)});
    out.push_back({p + ".bias", m.bias_offset[static_cast<std::size_t>(l)],
                   static_cast<std::size_t>(m.layer_out(l))});
  }
  if (m.spec.final_layernorm) {
    out.push_back({name + ".norm.gain", m.gamma_offset, static_cast<std::size_t>(m.spec.output_dim)});
    out.push_back({name + ".norm.offset", m.beta_offset, static_cast<std::size_t>(m.spec.output_dim)});
  }
}

}  // namespace

void NetSpec::validate() const {
  if (hidden_dim < 1) throw ConfigError("hidden_dim must be >= 1");
  if (n_hidden_layers < 0) throw ConfigError("n_hidden_layers must be >= 0");
  if (message_passing_steps < 0) throw ConfigError("message_passing_steps must be >= 0");
}

ParameterLayout::ParameterLayout(const NetSpec& spec) {
  spec.validate();
  const int h = spec.hidden_dim;
  std::size_t offset = 0;
  auto next = [&](const MlpSpec& s) {
    MlpLayout m = MlpLayout::at(s, offset);
    offset = m.end;
    return m;
  };
  node_encoder_ = next(hidden_mlp(spec, kNodeFeatures));
  for (EdgeType t : kEdgeOrder) {
    edge_encoders_[static_cast<int>(t)] = next(hidden_mlp(spec, spec.edge_input_dim(t)));
  }
  blocks_.resize(static_cast<std::size_t>(spec.message_passing_steps));
  for (Block& b : blocks_) {
    b.die = next(hidden_mlp(spec, 3 * h));
    b.tube = next(hidden_mlp(spec, 3 * h));
    b.stamp = next(hidden_mlp(spec, 3 * h));
    b.node = next(hidden_mlp(spec, 4 * h));
  }
  decoder_ = next(MlpSpec{h, h, spec.n_hidden_layers, kOutputDim, false});
  size_ = offset;
}

const MlpLayout& ParameterLayout::block_edge(int block, EdgeType t) const {
  const Block& b = blocks_[static_cast<std::size_t>(block)];
  switch (t) {
    case EdgeType::Die: return b.die;
    case EdgeType::Stamp: return b.stamp;
    case EdgeType::Tube: break;
  }
  return b.tube;
}

std::vector<ParameterLayout::Tensor> ParameterLayout::tensors() const {
  std::vector<Tensor> out;
  append_tensors(out, "encoder.node", node_encoder_);
  for (EdgeType t : kEdgeOrder) {
    append_tensors(out, std::string("encoder.edge_") + edge_name(t), edge_encoder(t));
  }
  for (int b = 0; b < blocks(); ++b) {
    const std::string p = "processor." + std::to_string(b) + ".";
    append_tensors(out, p + "edge_die", block_edge(b, EdgeType::Die));
    append_tensors(out, p + "edge_tube", block_edge(b, EdgeType::Tube));
    append_tensors(out, p + "edge_stamp", block_edge(b, EdgeType::Stamp));
    append_tensors(out, p + "node", block_node(b));
  }
  append_tensors(out, "decoder", decoder_);
  return out;
}

Standardizer Standardizer::identity(int dim) {
  return Standardizer{std::vector<double>(static_cast<std::size_t>(dim), 0.0),
                      std::vector<double>(static_cast<std::size_t>(dim), 1.0)};
}

void Standardizer::apply(Matrix& m) const {
  if (m.rows() == 0) return;
  validate(static_cast<int>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      m(i, j) = (m(i, j) - mean[static_cast<std::size_t>(j)]) / std[static_cast<std::size_t>(j)];
    }
  }
}

void Standardizer::validate(int dim) const {
  if (mean.size() != static_cast<std::size_t>(dim) || std.size() != static_cast<std::size_t>(dim)) {
    throw ConfigError("standardizer dimension mismatch");
  }
  for (std::size_t j = 0; j < std.size(); ++j) {
    if (!std::isfinite(mean[j]) || !std::isfinite(std[j]) || !(std[j] > 0.0)) {
      throw ConfigError("standardizer needs finite mean and std > 0");
    }
  }
}

NormalizationStats NormalizationStats::identity() {
  NormalizationStats s;
  s.node = Standardizer::identity(kNodeFeatures);
  s.edge[static_cast<int>(EdgeType::Tube)] = Standardizer::identity(kTubeEdgeFeatures);
  s.edge[static_cast<int>(EdgeType::Die)] = Standardizer::identity(kContactEdgeFeatures);
  s.edge[static_cast<int>(EdgeType::Stamp)] = Standardizer::identity(kContactEdgeFeatures);
  s.target = Standardizer::identity(kOutputDim);
  return s;
}

std::size_t parameter_count(const NetSpec& spec) { return ParameterLayout(spec).size(); }

ModelParameters init_parameters(const NetSpec& spec, std::uint64_t seed, bool zero_decoder_output) {
  ModelParameters p;
  p.spec = spec;
  p.stats = NormalizationStats::identity();
  const ParameterLayout layout(spec);
  p.values.assign(layout.size(), 0.0);
  std::mt19937_64 rng(seed);

  auto init_mlp = [&](const MlpLayout& m, bool zero_last) {
    for (int l = 0; l < m.layer_count(); ++l) {
      const bool last = l + 1 == m.layer_count();
      const std::size_t n = static_cast<std::size_t>(m.layer_in(l)) * m.layer_out(l);
      double* w = p.values.data() + m.weight_offset[static_cast<std::size_t>(l)];
      if (last && zero_last) continue;
      // He-uniform for ReLU layers, Glorot-style fan-in bound for the linear output.
      const double bound = std::sqrt((last ? 3.0 : 6.0) / m.layer_in(l));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (std::size_t i = 0; i < n; ++i) w[i] = dist(rng);
    }
    if (m.spec.final_layernorm) {
      for (int j = 0; j < m.spec.output_dim; ++j) p.values[m.gamma_offset + static_cast<std::size_t>(j)] = 1.0;
    }
  };

  init_mlp(layout.node_encoder(), false);
  for (EdgeType t : kEdgeOrder) init_mlp(layout.edge_encoder(t), false);
  for (int b = 0; b < layout.blocks(); ++b) {
    init_mlp(layout.block_edge(b, EdgeType::Die), false);
    init_mlp(layout.block_edge(b, EdgeType::Tube), false);
    init_mlp(layout.block_edge(b, EdgeType::Stamp), false);
    init_mlp(layout.block_node(b), false);
  }
  init_mlp(layout.decoder(), zero_decoder_output);
  return p;
}

// ---------------------------------------------------------------------------

void GraphBatch::finalize() {
  const std::size_t n = node_count();
  if (static_cast<std::size_t>(node_features.rows()) != n) {
    throw ConfigError("node feature rows must match the node count");
  }
  for (EdgeBlock& b : edges) {
    if (static_cast<std::size_t>(b.features.rows()) != b.edges.size()) {
      throw ConfigError("edge feature rows must match the edge count");
    }
    b.src.resize(b.edges.size());
    b.dst.resize(b.edges.size());
    for (std::size_t e = 0; e < b.edges.size(); ++e) {
      if (b.edges[e].src >= n || b.edges[e].dst >= n) throw ConfigError("edge endpoint out of range");
      b.src[e] = b.edges[e].src;
      b.dst[e] = b.edges[e].dst;
    }
    b.incoming = build_csr(b.edges, n, Endpoint::Dst);
    b.outgoing = build_csr(b.edges, n, Endpoint::Src);
  }
}

namespace {

EdgeBlock to_block(const EdgeSet& set, int expected_dim) {
  EdgeBlock b;
  b.edges = set.edges;
  b.features.resize(static_cast<Eigen::Index>(set.size()), expected_dim);
  if (!set.edges.empty() && set.feature_dim != expected_dim) {
    throw ConfigError("edge feature width mismatch");
  }
  for (std::size_t i = 0; i < set.features.size(); ++i) b.features.data()[i] = set.features[i];
  return b;
}

}  // namespace

GraphBatch make_graph(const MeshState& state, const EdgeSets& sets) {
  state.validate();
  GraphBatch g;
  const std::size_t n = state.size();
  g.node_features = Matrix::Zero(static_cast<Eigen::Index>(n), kNodeFeatures);
  g.tube_mask.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    g.node_features(row, static_cast<int>(state.kinds[i])) = 1.0;
    g.node_features(row, kNodeKindCount) = state.positions[i].x;
    g.node_features(row, kNodeKindCount + 1) = state.positions[i].z;
    g.tube_mask[i] = state.kinds[i] == NodeKind::DeformableTube ? 1 : 0;
  }
  g.block(EdgeType::Tube) = to_block(sets.tube, kTubeEdgeFeatures);
  g.block(EdgeType::Die) = to_block(sets.die, kContactEdgeFeatures);
  g.block(EdgeType::Stamp) = to_block(sets.stamp, kContactEdgeFeatures);
  g.finalize();
  return g;
}

GraphBatch make_graph(const MeshState& state, const Topology& topology, double contact_radius,
                      double mu) {
  return make_graph(state, build_edge_sets(state, topology, contact_radius, mu));
}

GraphBatch concat(std::span<const GraphBatch> graphs) {
  GraphBatch out;
  Eigen::Index nodes = 0;
  Eigen::Index counts[kEdgeTypes] = {0, 0, 0};
  for (const GraphBatch& g : graphs) {
    nodes += static_cast<Eigen::Index>(g.node_count());
    for (int t = 0; t < kEdgeTypes; ++t) counts[t] += static_cast<Eigen::Index>(g.edges[t].size());
  }
  out.node_features.resize(nodes, kNodeFeatures);
  out.tube_mask.reserve(static_cast<std::size_t>(nodes));
  for (int t = 0; t < kEdgeTypes; ++t) {
    const int dim = t == static_cast<int>(EdgeType::Tube) ? kTubeEdgeFeatures : kContactEdgeFeatures;
    out.edges[t].features.resize(counts[t], dim);
    out.edges[t].edges.reserve(static_cast<std::size_t>(counts[t]));
  }
  Eigen::Index node_off = 0;
  Eigen::Index edge_off[kEdgeTypes] = {0, 0, 0};
  for (const GraphBatch& g : graphs) {
    const auto n = static_cast<Eigen::Index>(g.node_count());
    out.node_features.middleRows(node_off, n) = g.node_features;
    out.tube_mask.insert(out.tube_mask.end(), g.tube_mask.begin(), g.tube_mask.end());
    for (int t = 0; t < kEdgeTypes; ++t) {
      const EdgeBlock& b = g.edges[t];
      const auto m = static_cast<Eigen::Index>(b.size());
      if (m > 0) out.edges[t].features.middleRows(edge_off[t], m) = b.features;
      for (const Edge& e : b.edges) {
        out.edges[t].edges.push_back({e.src + static_cast<std::uint32_t>(node_off),
                                      e.dst + static_cast<std::uint32_t>(node_off)});
      }
      edge_off[t] += m;
    }
    node_off += n;
  }
  out.finalize();
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct BlockCache {
  MlpCache edge[kEdgeTypes];
  MlpCache node;
};

struct ForwardCache {
  MlpCache node_encoder;
  MlpCache edge_encoder[kEdgeTypes];
  std::vector<BlockCache> blocks;
  MlpCache decoder;
};

Matrix run_forward(const ModelParameters& params, const ParameterLayout& layout,
                   const GraphBatch& batch, ForwardCache* cache) {
  if (params.values.size() != layout.size()) throw ConfigError("parameter vector size mismatch");
  const std::span<const double> w(params.values);
  const int h = params.spec.hidden_dim;
  const auto n = static_cast<Eigen::Index>(batch.node_count());

  Matrix nodes;
  {
    Matrix x = batch.node_features;
    params.stats.node.apply(x);
    mlp_forward(layout.node_encoder(), w, x, nodes, cache ? &cache->node_encoder : nullptr);
  }
  Matrix latent[kEdgeTypes];
  for (EdgeType t : kEdgeOrder) {
    const int ti = static_cast<int>(t);
    const EdgeBlock& b = batch.edges[ti];
    if (b.size() == 0) {
      latent[ti].resize(0, h);
      continue;
    }
    Matrix x = b.features;
    params.stats.edge[ti].apply(x);
    mlp_forward(layout.edge_encoder(t), w, x, latent[ti], cache ? &cache->edge_encoder[ti] : nullptr);
  }

  if (cache) cache->blocks.resize(static_cast<std::size_t>(layout.blocks()));
  for (int k = 0; k < layout.blocks(); ++k) {
    BlockCache* bc = cache ? &cache->blocks[static_cast<std::size_t>(k)] : nullptr;
    Matrix node_in = Matrix::Zero(n, 4 * h);
    node_in.leftCols(h) = nodes;
    Matrix updated[kEdgeTypes];
    for (EdgeType t : kEdgeOrder) {
      const int ti = static_cast<int>(t);
      const EdgeBlock& b = batch.edges[ti];
      if (b.size() == 0) continue;
      Matrix x(static_cast<Eigen::Index>(b.size()), 3 * h);
      x.leftCols(h) = latent[ti];
      parallel::gather_rows(nodes, b.dst, x, h);
      parallel::gather_rows(nodes, b.src, x, 2 * h);
      mlp_forward(layout.block_edge(k, t), w, x, updated[ti], bc ? &bc->edge[ti] : nullptr);
      parallel::scatter_add_rows(updated[ti], 0, h, b.incoming, node_in, aggregate_slot(t) * h);
    }
    Matrix node_update;
    mlp_forward(layout.block_node(k), w, node_in, node_update, bc ? &bc->node : nullptr);
    nodes += node_update;
    for (int ti = 0; ti < kEdgeTypes; ++ti) {
      if (batch.edges[ti].size() > 0) latent[ti] += updated[ti];
    }
  }

  Matrix out;
  mlp_forward(layout.decoder(), w, nodes, out, cache ? &cache->decoder : nullptr);
  return out;
}

void run_backward(const ModelParameters& params, const ParameterLayout& layout,
                  const GraphBatch& batch, const ForwardCache& cache, Matrix& d_out,
                  std::span<double> grad) {
  const std::span<const double> w(params.values);
  const int h = params.spec.hidden_dim;

  Matrix d_nodes;
  mlp_backward(layout.decoder(), w, cache.decoder, d_out, &d_nodes, grad);

  Matrix d_latent[kEdgeTypes];
  for (int ti = 0; ti < kEdgeTypes; ++ti) {
    d_latent[ti] = Matrix::Zero(static_cast<Eigen::Index>(batch.edges[ti].size()), h);
  }

  for (int k = layout.blocks() - 1; k >= 0; --k) {
    const BlockCache& bc = cache.blocks[static_cast<std::size_t>(k)];
    // Residual: the block output gradient flows to both the update and the input.
    Matrix d_update = d_nodes;
    Matrix d_node_in;
    mlp_backward(layout.block_node(k), w, bc.node, d_update, &d_node_in, grad);
    d_nodes += d_node_in.leftCols(h);

    for (EdgeType t : kEdgeOrder) {
      const int ti = static_cast<int>(t);
      const EdgeBlock& b = batch.edges[ti];
      if (b.size() == 0) continue;
      const auto m = static_cast<Eigen::Index>(b.size());
      // d e'_s = d e_out (residual) + aggregate gradient routed back from dst.
      Matrix d_edge_update = d_latent[ti];
      {
        const Matrix slot = d_node_in.middleCols(aggregate_slot(t) * h, h);
        Matrix routed(m, h);
        parallel::gather_rows(slot, b.dst, routed, 0);
        d_edge_update += routed;
      }
      Matrix d_x;
      mlp_backward(layout.block_edge(k, t), w, bc.edge[ti], d_edge_update, &d_x, grad);
      d_latent[ti] += d_x.leftCols(h);
      parallel::scatter_add_rows(d_x, h, h, b.incoming, d_nodes, 0);
      parallel::scatter_add_rows(d_x, 2 * h, h, b.outgoing, d_nodes, 0);
    }
  }

  for (EdgeType t : kEdgeOrder) {
    const int ti = static_cast<int>(t);
    if (batch.edges[ti].size() == 0) continue;
    mlp_backward(layout.edge_encoder(t), w, cache.edge_encoder[ti], d_latent[ti], nullptr, grad);
  }
  mlp_backward(layout.node_encoder(), w, cache.node_encoder, d_nodes, nullptr, grad);
}

}  // namespace

Matrix forward(const ModelParameters& params, const GraphBatch& batch) {
  return run_forward(params, params.layout(), batch, nullptr);
}

Matrix predict_delta(const ModelParameters& params, const GraphBatch& batch) {
  Matrix y = forward(params, batch);
  const Standardizer& s = params.stats.target;
  s.validate(kOutputDim);
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    for (int j = 0; j < kOutputDim; ++j) {
      y(i, j) = y(i, j) * s.std[static_cast<std::size_t>(j)] + s.mean[static_cast<std::size_t>(j)];
    }
  }
  return y;
}

double masked_mse(const Matrix& prediction, const Matrix& targets,
                  std::span<const std::uint8_t> mask) {
  if (prediction.rows() != targets.rows() || prediction.cols() != targets.cols() ||
      static_cast<std::size_t>(prediction.rows()) != mask.size()) {
    throw ConfigError("prediction, targets and mask must be aligned");
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < prediction.rows(); ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    for (Eigen::Index j = 0; j < prediction.cols(); ++j) {
      const double d = prediction(i, j) - targets(i, j);
      sum += d * d;
      ++count;
    }
  }
  if (count == 0) throw DataError("mask selects no nodes");
  return sum / static_cast<double>(count);
}

double loss_and_gradient(const ModelParameters& params, const GraphBatch& batch,
                         const Matrix& normalized_targets, std::vector<double>& grad) {
  const ParameterLayout layout = params.layout();
  ForwardCache cache;
  const Matrix y = run_forward(params, layout, batch, &cache);
  const double loss = masked_mse(y, normalized_targets, batch.tube_mask);

  std::size_t count = 0;
  for (std::uint8_t m : batch.tube_mask) count += m ? 1 : 0;
  const double scale = 2.0 / static_cast<double>(count * kOutputDim);
  Matrix d_out = Matrix::Zero(y.rows(), y.cols());
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    if (!batch.tube_mask[static_cast<std::size_t>(i)]) continue;
    for (Eigen::Index j = 0; j < y.cols(); ++j) d_out(i, j) = scale * (y(i, j) - normalized_targets(i, j));
  }
  grad.assign(layout.size(), 0.0);
  run_backward(params, layout, batch, cache, d_out, grad);
  return loss;
}

}  // namespace forgenet::nn
