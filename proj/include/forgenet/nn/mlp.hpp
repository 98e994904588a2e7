#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "forgenet/nn/kernels.hpp"

namespace forgenet::nn {

inline constexpr double kLayerNormEps = 1e-5;

// n_hidden_layers Linear+ReLU layers of width hidden_dim, then a final Linear
// to output_dim, optionally followed by LayerNorm.
struct MlpSpec {
  int input_dim = 1;
  int hidden_dim = 128;
  int n_hidden_layers = 3;
  int output_dim = 128;
  bool final_layernorm = true;

  std::size_t parameter_count() const;
  void validate() const;
};

// Location of one MLP's tensors inside a flat parameter vector. Weights are
// stored row-major as [in, out] so a layer computes y = x W + b.
struct MlpLayout {
  MlpSpec spec;
  std::vector<std::size_t> weight_offset;
  std::vector<std::size_t> bias_offset;
  std::size_t gamma_offset = 0;
  std::size_t beta_offset = 0;
  std::size_t begin = 0;
  std::size_t end = 0;

  static MlpLayout at(const MlpSpec& spec, std::size_t offset);
  int layer_count() const { return spec.n_hidden_layers + 1; }
  int layer_in(int l) const;
  int layer_out(int l) const;
};

struct MlpCache {
  std::vector<Matrix> inputs;  // input of each linear layer
  Matrix xhat;
  std::vector<double> rstd;
};

// y = MLP(x); fills `cache` when given, for mlp_backward.
void mlp_forward(const MlpLayout& layout, std::span<const double> params, const Matrix& x,
                 Matrix& y, MlpCache* cache);

// Backpropagates dy through the cached forward pass: accumulates parameter
// gradients into `grad` and writes dL/dx into *dx when non-null. dy is
// consumed as scratch.
void mlp_backward(const MlpLayout& layout, std::span<const double> params, const MlpCache& cache,
                  Matrix& dy, Matrix* dx, std::span<double> grad);

}  // namespace forgenet::nn
