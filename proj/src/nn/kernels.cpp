#include "forgenet/nn/kernels.hpp"

#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace forgenet::nn {

Csr build_csr(std::span<const Edge> edges, std::size_t n_nodes, Endpoint by) {
  Csr csr;
  csr.offsets.assign(n_nodes + 1, 0);
  for (const Edge& e : edges) ++csr.offsets[(by == Endpoint::Dst ? e.dst : e.src) + 1];
  for (std::size_t v = 0; v < n_nodes; ++v) csr.offsets[v + 1] += csr.offsets[v];
  csr.items.resize(edges.size());
  std::vector<std::uint32_t> fill(csr.offsets.begin(), csr.offsets.end() - 1);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const std::uint32_t v = by == Endpoint::Dst ? edges[e].dst : edges[e].src;
    csr.items[fill[v]++] = static_cast<std::uint32_t>(e);
  }
  return csr;
}

void set_max_threads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(n > 0 ? n : omp_get_num_procs());
#else
  (void)n;
#endif
}

namespace {
// Small kernels are not worth a parallel region.
constexpr Eigen::Index kMinParallelRows = 256;

inline void layer_norm_row(const double* z, Eigen::Index h, const double* gamma,
                           const double* beta, double eps, double* y, double* xhat,
                           double& rstd) {
  double mean = 0.0;
  for (Eigen::Index j = 0; j < h; ++j) mean += z[j];
  mean /= static_cast<double>(h);
  double var = 0.0;
  for (Eigen::Index j = 0; j < h; ++j) var += (z[j] - mean) * (z[j] - mean);
  var /= static_cast<double>(h);
  rstd = 1.0 / std::sqrt(var + eps);
  for (Eigen::Index j = 0; j < h; ++j) {
    xhat[j] = (z[j] - mean) * rstd;
    y[j] = gamma[j] * xhat[j] + beta[j];
  }
}

inline void layer_norm_row_backward(const double* dy, const double* xhat, double rstd,
                                    const double* gamma, Eigen::Index h, double* dz) {
  double mean_g = 0.0;
  double mean_gx = 0.0;
  for (Eigen::Index j = 0; j < h; ++j) {
    const double g = dy[j] * gamma[j];
    mean_g += g;
    mean_gx += g * xhat[j];
  }
  mean_g /= static_cast<double>(h);
  mean_gx /= static_cast<double>(h);
  for (Eigen::Index j = 0; j < h; ++j) {
    dz[j] = rstd * (dy[j] * gamma[j] - mean_g - xhat[j] * mean_gx);
  }
}

inline void scatter_node(const Matrix& src, Eigen::Index src_col, Eigen::Index width,
                         const Csr& incidence, Matrix& dst, Eigen::Index dst_col,
                         std::size_t v) {
  double* out = dst.data() + static_cast<Eigen::Index>(v) * dst.cols() + dst_col;
  for (std::uint32_t k = incidence.offsets[v]; k < incidence.offsets[v + 1]; ++k) {
    const double* in = src.data() + static_cast<Eigen::Index>(incidence.items[k]) * src.cols() + src_col;
    for (Eigen::Index j = 0; j < width; ++j) out[j] += in[j];
  }
}

}  // namespace

// ---------------------------------------------------------------------------

namespace serial {

void gather_rows(const Matrix& src, std::span<const std::uint32_t> index, Matrix& dst,
                 Eigen::Index dst_col) {
  for (std::size_t i = 0; i < index.size(); ++i) {
    dst.block(static_cast<Eigen::Index>(i), dst_col, 1, src.cols()) = src.row(index[i]);
  }
}

void scatter_add_rows(const Matrix& src, Eigen::Index src_col, Eigen::Index width,
                      const Csr& incidence, Matrix& dst, Eigen::Index dst_col) {
  for (std::size_t v = 0; v < incidence.node_count(); ++v) {
    scatter_node(src, src_col, width, incidence, dst, dst_col, v);
  }
}

void add_bias(Matrix& z, const double* bias) {
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index j = 0; j < z.cols(); ++j) z(i, j) += bias[j];
  }
}

void relu(Matrix& z) {
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    double& v = z.data()[i];
    if (!(v > 0.0)) v = 0.0;
  }
}

void relu_backward(Matrix& dz, const Matrix& activation) {
  for (Eigen::Index i = 0; i < dz.size(); ++i) {
    if (!(activation.data()[i] > 0.0)) dz.data()[i] = 0.0;
  }
}

void layer_norm_forward(const Matrix& z, const double* gamma, const double* beta, double eps,
                        Matrix& y, Matrix& xhat, std::vector<double>& rstd) {
  const Eigen::Index h = z.cols();
  y.resize(z.rows(), h);
  xhat.resize(z.rows(), h);
  rstd.resize(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    layer_norm_row(z.data() + i * h, h, gamma, beta, eps, y.data() + i * h, xhat.data() + i * h,
                   rstd[static_cast<std::size_t>(i)]);
  }
}

void layer_norm_backward(const Matrix& dy, const Matrix& xhat, const std::vector<double>& rstd,
                         const double* gamma, Matrix& dz, double* dgamma, double* dbeta) {
  const Eigen::Index h = dy.cols();
  dz.resize(dy.rows(), h);
  for (Eigen::Index j = 0; j < h; ++j) {
    for (Eigen::Index i = 0; i < dy.rows(); ++i) {
      dgamma[j] += dy(i, j) * xhat(i, j);
      dbeta[j] += dy(i, j);
    }
  }
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    layer_norm_row_backward(dy.data() + i * h, xhat.data() + i * h,
                            rstd[static_cast<std::size_t>(i)], gamma, h, dz.data() + i * h);
  }
}

void column_sums(const Matrix& m, double* out) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) out[j] += m(i, j);
  }
}

}  // namespace serial

// ---------------------------------------------------------------------------

namespace parallel {

void gather_rows(const Matrix& src, std::span<const std::uint32_t> index, Matrix& dst,
                 Eigen::Index dst_col) {
  const auto n = static_cast<Eigen::Index>(index.size());
#pragma omp parallel for schedule(static) if (n >= kMinParallelRows)
  for (Eigen::Index i = 0; i < n; ++i) {
    dst.block(i, dst_col, 1, src.cols()) = src.row(index[static_cast<std::size_t>(i)]);
  }
}

void scatter_add_rows(const Matrix& src, Eigen::Index src_col, Eigen::Index width,
                      const Csr& incidence, Matrix& dst, Eigen::Index dst_col) {
  const auto n = static_cast<Eigen::Index>(incidence.node_count());
#pragma omp parallel for schedule(static) if (n >= kMinParallelRows)
  for (Eigen::Index v = 0; v < n; ++v) {
    scatter_node(src, src_col, width, incidence, dst, dst_col, static_cast<std::size_t>(v));
  }
}

void add_bias(Matrix& z, const double* bias) {
  const Eigen::Index rows = z.rows();
  const Eigen::Index cols = z.cols();
#pragma omp parallel for schedule(static) if (rows >= kMinParallelRows)
  for (Eigen::Index i = 0; i < rows; ++i) {
    double* row = z.data() + i * cols;
    for (Eigen::Index j = 0; j < cols; ++j) row[j] += bias[j];
  }
}

void relu(Matrix& z) {
  const Eigen::Index n = z.size();
  double* data = z.data();
#pragma omp parallel for schedule(static) if (n >= kMinParallelRows * 32)
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(data[i] > 0.0)) data[i] = 0.0;
  }
}

void relu_backward(Matrix& dz, const Matrix& activation) {
  const Eigen::Index n = dz.size();
  double* d = dz.data();
  const double* a = activation.data();
#pragma omp parallel for schedule(static) if (n >= kMinParallelRows * 32)
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(a[i] > 0.0)) d[i] = 0.0;
  }
}

void layer_norm_forward(const Matrix& z, const double* gamma, const double* beta, double eps,
                        Matrix& y, Matrix& xhat, std::vector<double>& rstd) {
  const Eigen::Index h = z.cols();
  const Eigen::Index rows = z.rows();
  y.resize(rows, h);
  xhat.resize(rows, h);
  rstd.resize(static_cast<std::size_t>(rows));
#pragma omp parallel for schedule(static) if (rows >= kMinParallelRows)
  for (Eigen::Index i = 0; i < rows; ++i) {
    layer_norm_row(z.data() + i * h, h, gamma, beta, eps, y.data() + i * h, xhat.data() + i * h,
                   rstd[static_cast<std::size_t>(i)]);
  }
}

void layer_norm_backward(const Matrix& dy, const Matrix& xhat, const std::vector<double>& rstd,
                         const double* gamma, Matrix& dz, double* dgamma, double* dbeta) {
  const Eigen::Index h = dy.cols();
  const Eigen::Index rows = dy.rows();
  dz.resize(rows, h);
  // Column-parallel reduction keeps the serial row order per column.
#pragma omp parallel for schedule(static) if (rows >= kMinParallelRows)
  for (Eigen::Index j = 0; j < h; ++j) {
    double g = dgamma[j];
    double b = dbeta[j];
    for (Eigen::Index i = 0; i < rows; ++i) {
      g += dy(i, j) * xhat(i, j);
      b += dy(i, j);
    }
    dgamma[j] = g;
    dbeta[j] = b;
  }
#pragma omp parallel for schedule(static) if (rows >= kMinParallelRows)
  for (Eigen::Index i = 0; i < rows; ++i) {
    layer_norm_row_backward(dy.data() + i * h, xhat.data() + i * h,
                            rstd[static_cast<std::size_t>(i)], gamma, h, dz.data() + i * h);
  }
}

void column_sums(const Matrix& m, double* out) {
  const Eigen::Index cols = m.cols();
  const Eigen::Index rows = m.rows();
#pragma omp parallel for schedule(static) if (rows >= kMinParallelRows)
  for (Eigen::Index j = 0; j < cols; ++j) {
    double s = out[j];
    for (Eigen::Index i = 0; i < rows; ++i) s += m(i, j);
    out[j] = s;
  }
}

}  // namespace parallel
}  // namespace forgenet::nn
