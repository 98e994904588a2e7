#include "forgenet/nn/mlp.hpp"

#include "forgenet/errors.hpp"

namespace forgenet::nn {

namespace {

using ConstMap = Eigen::Map<const Matrix>;

}  // namespace

std::size_t MlpSpec::parameter_count() const {
  std::size_t count = 0;
  int in = input_dim;
  for (int l = 0; l < n_hidden_layers; ++l) {
    count += static_cast<std::size_t>(in) * hidden_dim + hidden_dim;
    in = hidden_dim;
  }
  count += static_cast<std::size_t>(in) * output_dim + output_dim;
  if (final_layernorm) count += 2 * static_cast<std::size_t>(output_dim);
  return count;
}

void MlpSpec::validate() const {
  if (input_dim < 1 || hidden_dim < 1 || output_dim < 1 || n_hidden_layers < 0) {
    throw ConfigError("MLP dimensions must be >= 1");
  }
}

int MlpLayout::layer_in(int l) const { return l == 0 ? spec.input_dim : spec.hidden_dim; }

int MlpLayout::layer_out(int l) const {
  return l == spec.n_hidden_layers ? spec.output_dim : spec.hidden_dim;
}

MlpLayout MlpLayout::at(const MlpSpec& spec, std::size_t offset) {
  spec.validate();
  MlpLayout m;
  m.spec = spec;
  m.begin = offset;
  for (int l = 0; l <= spec.n_hidden_layers; ++l) {
    m.weight_offset.push_back(offset);
    offset += static_cast<std::size_t>(m.layer_in(l)) * m.layer_out(l);
    m.bias_offset.push_back(offset);
    offset += static_cast<std::size_t>(m.layer_out(l));
  }
  if (spec.final_layernorm) {
    m.gamma_offset = offset;
    offset += static_cast<std::size_t>(spec.output_dim);
    m.beta_offset = offset;
    offset += static_cast<std::size_t>(spec.output_dim);
  }
  m.end = offset;
  return m;
}

void mlp_forward(const MlpLayout& layout, std::span<const double> params, const Matrix& x,
                 Matrix& y, MlpCache* cache) {
  if (x.cols() != layout.spec.input_dim) throw ConfigError("MLP input dimension mismatch");
  const int layers = layout.layer_count();
  if (cache) cache->inputs.resize(static_cast<std::size_t>(layers));

  Matrix h = x;
  for (int l = 0; l < layers; ++l) {
    const ConstMap w(params.data() + layout.weight_offset[l], layout.layer_in(l), layout.layer_out(l));
    Matrix z(h.rows(), layout.layer_out(l));
    z.noalias() = h * w;
    parallel::add_bias(z, params.data() + layout.bias_offset[l]);
    if (l + 1 < layers) parallel::relu(z);
    if (cache) {
      cache->inputs[static_cast<std::size_t>(l)] = std::move(h);
    }
    h = std::move(z);
  }
  if (layout.spec.final_layernorm) {
    Matrix xhat;
    std::vector<double> rstd;
    parallel::layer_norm_forward(h, params.data() + layout.gamma_offset,
                                 params.data() + layout.beta_offset, kLayerNormEps, y, xhat, rstd);
    if (cache) {
      cache->xhat = std::move(xhat);
      cache->rstd = std::move(rstd);
    }
  } else {
    y = std::move(h);
  }
}

void mlp_backward(const MlpLayout& layout, std::span<const double> params, const MlpCache& cache,
                  Matrix& dy, Matrix* dx, std::span<double> grad) {
  const int layers = layout.layer_count();
  Matrix dz;
  if (layout.spec.final_layernorm) {
    parallel::layer_norm_backward(dy, cache.xhat, cache.rstd, params.data() + layout.gamma_offset,
                                  dz, grad.data() + layout.gamma_offset,
                                  grad.data() + layout.beta_offset);
  } else {
    dz = std::move(dy);
  }
  for (int l = layers - 1; l >= 0; --l) {
    const Matrix& in = cache.inputs[static_cast<std::size_t>(l)];
    Eigen::Map<Matrix> gw(grad.data() + layout.weight_offset[l], layout.layer_in(l),
                          layout.layer_out(l));
    gw.noalias() += in.transpose() * dz;
    parallel::column_sums(dz, grad.data() + layout.bias_offset[l]);
    if (l == 0 && dx == nullptr) break;
    const ConstMap w(params.data() + layout.weight_offset[l], layout.layer_in(l), layout.layer_out(l));
    Matrix dh(dz.rows(), layout.layer_in(l));
    dh.noalias() = dz * w.transpose();
    if (l > 0) {
      // The cached input of layer l is the ReLU output of layer l - 1.
      parallel::relu_backward(dh, in);
      dz = std::move(dh);
    } else {
      *dx = std::move(dh);
    }
  }
}

}  // namespace forgenet::nn
