#pragma once

// Row-wise graph kernels used by the message-passing network. Every kernel
// has a serial reference and an OpenMP version; the parallel versions keep
// the serial summation order, so both produce bit-identical results.

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "forgenet/mesh.hpp"

namespace forgenet::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Edges incident to each node, in ascending edge order.
struct Csr {
  std::vector<std::uint32_t> offsets;  // size n_nodes + 1
  std::vector<std::uint32_t> items;    // edge ids

  std::size_t node_count() const { return offsets.empty() ? 0 : offsets.size() - 1; }
};

enum class Endpoint { Src, Dst };

Csr build_csr(std::span<const Edge> edges, std::size_t n_nodes, Endpoint by);

namespace serial {

// dst.block(i, col, 1, src.cols()) = src.row(index[i])
void gather_rows(const Matrix& src, std::span<const std::uint32_t> index, Matrix& dst,
                 Eigen::Index dst_col);

// dst.row(v).segment(dst_col, width) += sum over e incident to v of
// src.row(e).segment(src_col, width)
void scatter_add_rows(const Matrix& src, Eigen::Index src_col, Eigen::Index width,
                      const Csr& incidence, Matrix& dst, Eigen::Index dst_col);

void add_bias(Matrix& z, const double* bias);
void relu(Matrix& z);
// dz *= (activation > 0)
void relu_backward(Matrix& dz, const Matrix& activation);

// y = gamma * (z - mean) / sqrt(var + eps) + beta per row; stores xhat and
// 1 / sqrt(var + eps) for the backward pass.
void layer_norm_forward(const Matrix& z, const double* gamma, const double* beta, double eps,
                        Matrix& y, Matrix& xhat, std::vector<double>& rstd);
// Writes dz; accumulates dgamma/dbeta.
void layer_norm_backward(const Matrix& dy, const Matrix& xhat, const std::vector<double>& rstd,
                         const double* gamma, Matrix& dz, double* dgamma, double* dbeta);

void column_sums(const Matrix& m, double* out);

}  // namespace serial

namespace parallel {

void gather_rows(const Matrix& src, std::span<const std::uint32_t> index, Matrix& dst,
                 Eigen::Index dst_col);
void scatter_add_rows(const Matrix& src, Eigen::Index src_col, Eigen::Index width,
                      const Csr& incidence, Matrix& dst, Eigen::Index dst_col);
void add_bias(Matrix& z, const double* bias);
void relu(Matrix& z);
void relu_backward(Matrix& dz, const Matrix& activation);
void layer_norm_forward(const Matrix& z, const double* gamma, const double* beta, double eps,
                        Matrix& y, Matrix& xhat, std::vector<double>& rstd);
void layer_norm_backward(const Matrix& dy, const Matrix& xhat, const std::vector<double>& rstd,
                         const double* gamma, Matrix& dz, double* dgamma, double* dbeta);
void column_sums(const Matrix& m, double* out);

}  // namespace parallel

// Worker cap for the parallel kernels; <= 0 restores the OpenMP default.
void set_max_threads(int n);

}  // namespace forgenet::nn
