#pragma once

// Encode-process-decode graph network over three edge populations:
// tube mesh edges, tube<->die contact edges and tube<->stamp contact edges.
//
//   encode:  n = eps_N(node), e_s = eps_s(edge) for s in {tube, die, stamp}
//   process: k blocks of
//              e'_s = f_s([e_s, n_dst, n_src])
//              n'   = f_n([n, sum e'_die, sum e'_tube, sum e'_stamp])  (sums over incoming edges)
//              e_s += e'_s, n += n'
//   decode:  delta = d(n), two components per node, no LayerNorm
//
// Inputs are standardized with fixed statistics; outputs are normalized
// position deltas.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "forgenet/mesh.hpp"
#include "forgenet/nn/kernels.hpp"
#include "forgenet/nn/mlp.hpp"

namespace forgenet::nn {

enum class EdgeType { Tube = 0, Die = 1, Stamp = 2 };
inline constexpr int kEdgeTypes = 3;

// Node input: one-hot kind (tube, die, stamp) followed by (x, z).
inline constexpr int kNodeFeatures = kNodeKindCount + 2;
inline constexpr int kOutputDim = 2;

struct NetSpec {
  int hidden_dim = 128;
  int n_hidden_layers = 3;
  int message_passing_steps = 15;

  int edge_input_dim(EdgeType t) const {
    return t == EdgeType::Tube ? kTubeEdgeFeatures : kContactEdgeFeatures;
  }
  void validate() const;
};

// Offsets of every MLP in the flat parameter vector. Order: node encoder,
// tube/die/stamp edge encoders, then per block f_die, f_tube, f_stamp, f_node,
// then the decoder.
class ParameterLayout {
 public:
  explicit ParameterLayout(const NetSpec& spec);

  const MlpLayout& node_encoder() const { return node_encoder_; }
  const MlpLayout& edge_encoder(EdgeType t) const { return edge_encoders_[static_cast<int>(t)]; }
  const MlpLayout& block_edge(int block, EdgeType t) const;
  const MlpLayout& block_node(int block) const { return blocks_[static_cast<std::size_t>(block)].node; }
  const MlpLayout& decoder() const { return decoder_; }
  std::size_t size() const { return size_; }
  int blocks() const { return static_cast<int>(blocks_.size()); }

  struct Tensor {
    std::string name;
    std::size_t offset;
    std::size_t size;
  };
  std::vector<Tensor> tensors() const;

 private:
  struct Block {
    MlpLayout die;
    MlpLayout tube;
    MlpLayout stamp;
    MlpLayout node;
  };
  MlpLayout node_encoder_;
  MlpLayout edge_encoders_[kEdgeTypes];
  std::vector<Block> blocks_;
  MlpLayout decoder_;
  std::size_t size_ = 0;
};

// Per-column affine standardization: (x - mean) / std.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> std;

  static Standardizer identity(int dim);
  void apply(Matrix& m) const;
  void validate(int dim) const;
};

struct NormalizationStats {
  Standardizer node;
  Standardizer edge[kEdgeTypes];
  Standardizer target;

  static NormalizationStats identity();
};

struct ModelParameters {
  NetSpec spec;
  NormalizationStats stats;
  std::vector<double> values;

  ParameterLayout layout() const { return ParameterLayout(spec); }
};

// Fan-in scaled uniform initialization; the decoder's last layer starts at
// zero when `zero_decoder_output` is set.
ModelParameters init_parameters(const NetSpec& spec, std::uint64_t seed,
                                bool zero_decoder_output = true);

std::size_t parameter_count(const NetSpec& spec);

struct EdgeBlock {
  std::vector<Edge> edges;
  Matrix features;  // raw features [edges, dim]
  // Derived by GraphBatch::finalize().
  std::vector<std::uint32_t> src;
  std::vector<std::uint32_t> dst;
  Csr incoming;  // by dst
  Csr outgoing;  // by src

  std::size_t size() const { return edges.size(); }
};

struct GraphBatch {
  Matrix node_features;  // raw [nodes, kNodeFeatures]
  EdgeBlock edges[kEdgeTypes];
  std::vector<std::uint8_t> tube_mask;

  std::size_t node_count() const { return tube_mask.size(); }
  EdgeBlock& block(EdgeType t) { return edges[static_cast<int>(t)]; }
  const EdgeBlock& block(EdgeType t) const { return edges[static_cast<int>(t)]; }

  // Builds incidence lists; call after editing edges.
  void finalize();
};

GraphBatch make_graph(const MeshState& state, const EdgeSets& sets);
GraphBatch make_graph(const MeshState& state, const Topology& topology, double contact_radius,
                      double mu);
// Disjoint union; node and edge indices are offset per graph.
GraphBatch concat(std::span<const GraphBatch> graphs);

// Normalized per-node deltas [nodes, 2].
Matrix forward(const ModelParameters& params, const GraphBatch& batch);

// Deltas in meters: forward output mapped through the target statistics.
Matrix predict_delta(const ModelParameters& params, const GraphBatch& batch);

// Masked mean squared error over tube nodes and both components of
// (forward - normalized_targets). Writes the exact gradient w.r.t. every
// parameter into `grad` (resized, overwritten) and returns the loss.
double loss_and_gradient(const ModelParameters& params, const GraphBatch& batch,
                         const Matrix& normalized_targets, std::vector<double>& grad);

double masked_mse(const Matrix& prediction, const Matrix& targets,
                  std::span<const std::uint8_t> mask);

}  // namespace forgenet::nn
