// Serial reference vs OpenMP kernels, plus one network forward pass.
// Arg: number of rows (edges for gather/scatter, nodes otherwise).

#include <random>

#include <benchmark/benchmark.h>

#include "forgenet/nn/kernels.hpp"
#include "forgenet/nn/network.hpp"
#include "forgenet/synth_forge.hpp"

using namespace forgenet;
using nn::Matrix;

namespace {

constexpr Eigen::Index kWidth = 128;

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

// Ring-like graph: every node talks to its next six neighbours.
std::vector<Edge> ring_edges(std::size_t nodes) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < nodes; ++i) {
    for (std::size_t k = 1; k <= 6; ++k) {
      edges.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>((i + k) % nodes)});
    }
  }
  return edges;
}

template <bool Parallel>
void BM_Gather(benchmark::State& state) {
  const auto nodes = static_cast<std::size_t>(state.range(0));
  const auto edges = ring_edges(nodes);
  std::vector<std::uint32_t> index;
  for (const Edge& e : edges) index.push_back(e.src);
  const Matrix src = random_matrix(static_cast<Eigen::Index>(nodes), kWidth, 1);
  Matrix dst(static_cast<Eigen::Index>(edges.size()), kWidth);
  for (auto _ : state) {
    if constexpr (Parallel) {
      nn::parallel::gather_rows(src, index, dst, 0);
    } else {
      nn::serial::gather_rows(src, index, dst, 0);
    }
    benchmark::DoNotOptimize(dst.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(edges.size()));
}

template <bool Parallel>
void BM_ScatterAdd(benchmark::State& state) {
  const auto nodes = static_cast<std::size_t>(state.range(0));
  const auto edges = ring_edges(nodes);
  const nn::Csr csr = nn::build_csr(edges, nodes, nn::Endpoint::Dst);
  const Matrix src = random_matrix(static_cast<Eigen::Index>(edges.size()), kWidth, 2);
  Matrix dst = Matrix::Zero(static_cast<Eigen::Index>(nodes), kWidth);
  for (auto _ : state) {
    if constexpr (Parallel) {
      nn::parallel::scatter_add_rows(src, 0, kWidth, csr, dst, 0);
    } else {
      nn::serial::scatter_add_rows(src, 0, kWidth, csr, dst, 0);
    }
    benchmark::DoNotOptimize(dst.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(edges.size()));
}

template <bool Parallel>
void BM_LayerNorm(benchmark::State& state) {
  const Eigen::Index rows = state.range(0);
  const Matrix z = random_matrix(rows, kWidth, 3);
  const Matrix dy = random_matrix(rows, kWidth, 4);
  std::vector<double> gamma(kWidth, 1.0), beta(kWidth, 0.0), dgamma(kWidth), dbeta(kWidth);
  Matrix y, xhat, dz;
  std::vector<double> rstd;
  for (auto _ : state) {
    if constexpr (Parallel) {
      nn::parallel::layer_norm_forward(z, gamma.data(), beta.data(), 1e-5, y, xhat, rstd);
      nn::parallel::layer_norm_backward(dy, xhat, rstd, gamma.data(), dz, dgamma.data(), dbeta.data());
    } else {
      nn::serial::layer_norm_forward(z, gamma.data(), beta.data(), 1e-5, y, xhat, rstd);
      nn::serial::layer_norm_backward(dy, xhat, rstd, gamma.data(), dz, dgamma.data(), dbeta.data());
    }
    benchmark::DoNotOptimize(dz.data());
  }
  state.SetItemsProcessed(state.iterations() * rows);
}

template <bool Parallel>
void BM_BiasRelu(benchmark::State& state) {
  const Eigen::Index rows = state.range(0);
  const Matrix base = random_matrix(rows, kWidth, 5);
  std::vector<double> bias(kWidth, 0.1);
  Matrix z = base;
  for (auto _ : state) {
    z = base;
    if constexpr (Parallel) {
      nn::parallel::add_bias(z, bias.data());
      nn::parallel::relu(z);
    } else {
      nn::serial::add_bias(z, bias.data());
      nn::serial::relu(z);
    }
    benchmark::DoNotOptimize(z.data());
  }
  state.SetItemsProcessed(state.iterations() * rows);
}

// Desk-scale forward pass on the default tube (threads follow OMP_NUM_THREADS).
void BM_Forward(benchmark::State& state) {
  nn::NetSpec spec;
  spec.hidden_dim = static_cast<int>(state.range(0));
  spec.message_passing_steps = 5;
  const TrajectoryDataset ds = generate(make_run_config(TubeSpec{}, 0.2, 10.0, 0.05, 60, 0));
  const nn::ModelParameters params = nn::init_parameters(spec, 0);
  const nn::GraphBatch batch = nn::make_graph(ds.state(60), ds.topology, 0.8e-3, 0.05);
  for (auto _ : state) benchmark::DoNotOptimize(nn::forward(params, batch).data());
}

}  // namespace

BENCHMARK(BM_Gather<false>)->Arg(1000)->Arg(20000);
BENCHMARK(BM_Gather<true>)->Arg(1000)->Arg(20000);
BENCHMARK(BM_ScatterAdd<false>)->Arg(1000)->Arg(20000);
BENCHMARK(BM_ScatterAdd<true>)->Arg(1000)->Arg(20000);
BENCHMARK(BM_LayerNorm<false>)->Arg(1000)->Arg(20000);
BENCHMARK(BM_LayerNorm<true>)->Arg(1000)->Arg(20000);
BENCHMARK(BM_BiasRelu<false>)->Arg(1000)->Arg(20000);
BENCHMARK(BM_BiasRelu<true>)->Arg(1000)->Arg(20000);
BENCHMARK(BM_Forward)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
