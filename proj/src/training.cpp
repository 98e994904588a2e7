#include "forgenet/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "forgenet/errors.hpp"
#include "forgenet/nn/checkpoint.hpp"

namespace forgenet::training {

using nn::Matrix;

double TrainConfig::learning_rate(long step, long total_steps) const {
  if (total_steps <= 0) return lr_start;
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  return lr_start * std::pow(lr_end / lr_start, frac);
}

void TrainConfig::validate() const {
  net.validate();
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(lr_start > 0.0) || !(lr_end > 0.0)) throw ConfigError("learning rates must be > 0");
  if (lr_end > lr_start) throw ConfigError("lr_end must not exceed lr_start");
  if (!(noise_factor >= 0.0) || !std::isfinite(noise_factor)) {
    throw ConfigError("noise_factor must be finite and >= 0");
  }
  if (!(contact_radius > 0.0) || !std::isfinite(contact_radius)) {
    throw ConfigError("contact_radius must be > 0");
  }
  if (step_stride < 1) throw ConfigError("step_stride must be >= 1");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
}

NoiseModel compute_noise_model(std::span<const TrajectoryDataset> data, double noise_factor,
                               int stride) {
  if (stride < 1) throw ConfigError("stride must be >= 1");
  double sx = 0.0;
  double sz = 0.0;
  std::size_t count = 0;
  for (const TrajectoryDataset& ds : data) {
    const IndexRange tube = ds.topology.tube;
    for (std::size_t t = 0; t + static_cast<std::size_t>(stride) < ds.frame_count(); ++t) {
      const auto a = ds.frame(t);
      const auto b = ds.frame(t + static_cast<std::size_t>(stride));
      for (std::size_t i = tube.begin; i < tube.end; ++i) {
        sx += b[i].x - a[i].x;
        sz += b[i].z - a[i].z;
        ++count;
      }
    }
  }
  if (count == 0) throw DataError("no training pairs for the noise model");
  return {noise_factor * std::abs(sx / static_cast<double>(count)),
          noise_factor * std::abs(sz / static_cast<double>(count))};
}

namespace {

// Smallest adjustment of b - a such that a + delta == b in floating point.
double exact_delta(double a, double b) {
  double d = b - a;
  for (int i = 0; i < 4 && a + d != b; ++i) d = std::nextafter(d, (a + d < b) ? INFINITY : -INFINITY);
  return d;
}

}  // namespace

TrainingPair make_training_pair(const TrajectoryDataset& ds, std::size_t t, int stride,
                                const NoiseModel& noise, double contact_radius_m,
                                std::mt19937_64& rng) {
  if (stride < 1) throw ConfigError("stride must be >= 1");
  if (t + static_cast<std::size_t>(stride) >= ds.frame_count()) {
    throw ConfigError("training pair index out of range");
  }
  TrainingPair pair;
  pair.input = ds.state(t);
  const auto next = ds.frame(t + static_cast<std::size_t>(stride));
  const IndexRange tube = ds.topology.tube;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = tube.begin; i < tube.end; ++i) {
    Vec2& p = pair.input.positions[i];
    if (noise.sigma_x > 0.0) p.x += noise.sigma_x * normal(rng);
    if (noise.sigma_z > 0.0) p.z += noise.sigma_z * normal(rng);
  }
  const std::size_t n = ds.node_count();
  pair.delta.resize(static_cast<Eigen::Index>(n), 2);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 p = pair.input.positions[i];
    pair.delta(static_cast<Eigen::Index>(i), 0) = exact_delta(p.x, next[i].x);
    pair.delta(static_cast<Eigen::Index>(i), 1) = exact_delta(p.z, next[i].z);
  }
  pair.graph = nn::make_graph(pair.input, ds.topology, contact_radius_m, ds.config.mu);
  return pair;
}

namespace {

// Welford accumulator per column.
class ColumnStats {
 public:
  explicit ColumnStats(int dim) : n_(0), mean_(static_cast<std::size_t>(dim), 0.0), m2_(mean_) {}

  void add(const double* row) {
    ++n_;
    for (std::size_t j = 0; j < mean_.size(); ++j) {
      const double d = row[j] - mean_[j];
      mean_[j] += d / static_cast<double>(n_);
      m2_[j] += d * (row[j] - mean_[j]);
    }
  }

  nn::Standardizer result() const {
    nn::Standardizer s = nn::Standardizer::identity(static_cast<int>(mean_.size()));
    if (n_ == 0) return s;
    for (std::size_t j = 0; j < mean_.size(); ++j) {
      s.mean[j] = mean_[j];
      const double sd = std::sqrt(m2_[j] / static_cast<double>(n_));
      const double scale = std::max(std::abs(mean_[j]), 1e-300);
      s.std[j] = (sd > 1e-12 * scale && std::isfinite(sd)) ? sd : 1.0;
    }
    return s;
  }

 private:
  std::size_t n_;
  std::vector<double> mean_;
  std::vector<double> m2_;
};

}  // namespace

nn::NormalizationStats compute_stats(std::span<const TrajectoryDataset> data, int stride,
                                     double contact_radius_m) {
  if (stride < 1) throw ConfigError("stride must be >= 1");
  ColumnStats node(nn::kNodeFeatures);
  ColumnStats edges[nn::kEdgeTypes] = {ColumnStats(kTubeEdgeFeatures),
                                       ColumnStats(kContactEdgeFeatures),
                                       ColumnStats(kContactEdgeFeatures)};
  ColumnStats target(nn::kOutputDim);
  std::size_t pairs = 0;
  for (const TrajectoryDataset& ds : data) {
    for (std::size_t t = 0; t + static_cast<std::size_t>(stride) < ds.frame_count(); ++t) {
      const MeshState state = ds.state(t);
      const nn::GraphBatch g = nn::make_graph(state, ds.topology, contact_radius_m, ds.config.mu);
      for (Eigen::Index i = 0; i < g.node_features.rows(); ++i) node.add(g.node_features.row(i).data());
      for (int e = 0; e < nn::kEdgeTypes; ++e) {
        const Matrix& f = g.edges[e].features;
        for (Eigen::Index i = 0; i < f.rows(); ++i) edges[e].add(f.row(i).data());
      }
      const auto next = ds.frame(t + static_cast<std::size_t>(stride));
      for (std::size_t i = ds.topology.tube.begin; i < ds.topology.tube.end; ++i) {
        const double d[2] = {next[i].x - state.positions[i].x, next[i].z - state.positions[i].z};
        target.add(d);
      }
      ++pairs;
    }
  }
  if (pairs == 0) throw DataError("no training pairs for normalization statistics");
  nn::NormalizationStats s;
  s.node = node.result();
  for (int e = 0; e < nn::kEdgeTypes; ++e) s.edge[e] = edges[e].result();
  s.target = target.result();
  return s;
}

Matrix normalize_targets(const Matrix& delta, const nn::Standardizer& target) {
  Matrix out = delta;
  target.apply(out);
  return out;
}

Adam::Adam(std::size_t size, double beta1, double beta2, double eps)
    : m_(size, 0.0), v_(size, 0.0), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(std::vector<double>& params, std::span<const double> grad, double lr) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw ConfigError("optimizer state size mismatch");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

void write_loss_history(const std::filesystem::path& path, std::span<const LossRecord> history) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "step,lr,loss\n";
  char buf[96];
  for (const LossRecord& r : history) {
    std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g\n", r.step, r.lr, r.loss);
    out << buf;
  }
  if (!out) throw DataError("write failed: " + path.string());
}

TrainResult train(std::span<const TrajectoryDataset> data, const TrainConfig& config,
                  const TrainOptions& options) {
  config.validate();
  struct PairRef {
    std::size_t dataset;
    std::size_t t;
  };
  std::vector<PairRef> pairs;
  for (std::size_t d = 0; d < data.size(); ++d) {
    for (std::size_t t = 0; t + static_cast<std::size_t>(config.step_stride) < data[d].frame_count(); ++t) {
      pairs.push_back({d, t});
    }
  }
  if (pairs.empty()) throw DataError("training split has no (t, t + stride) pairs");

  TrainResult result;
  if (options.init) {
    result.params = *options.init;
  } else {
    result.params = nn::init_parameters(config.net, config.seed);
    result.params.stats = compute_stats(data, config.step_stride, config.contact_radius_m());
  }
  result.noise = compute_noise_model(data, config.noise_factor, config.step_stride);

  const long per_epoch =
      static_cast<long>((pairs.size() + static_cast<std::size_t>(config.batch_size) - 1) /
                        static_cast<std::size_t>(config.batch_size));
  long total = per_epoch * config.epochs;
  if (options.max_steps > 0) total = std::min(total, options.max_steps);

  if (options.out_dir) std::filesystem::create_directories(*options.out_dir);
  auto save = [&](const std::filesystem::path& dir) {
    nn::write_checkpoint(result.params, dir);
  };

  Adam adam(result.params.values.size());
  std::seed_seq noise_seq{config.seed, std::uint64_t{0x6e6f697365}};
  std::mt19937_64 noise_rng(noise_seq);
  std::vector<double> grad;
  std::vector<nn::GraphBatch> graphs;
  std::vector<Matrix> targets;
  std::vector<std::size_t> order(pairs.size());

  long step = 0;
  for (int epoch = 0; epoch < config.epochs && step < total; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::seed_seq epoch_seq{config.seed, static_cast<std::uint64_t>(epoch)};
    std::mt19937_64 shuffle_rng(epoch_seq);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    for (std::size_t start = 0; start < order.size() && step < total;
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      graphs.clear();
      targets.clear();
      for (std::size_t k = start; k < stop; ++k) {
        const PairRef ref = pairs[order[k]];
        TrainingPair p = make_training_pair(data[ref.dataset], ref.t, config.step_stride, result.noise,
                                            config.contact_radius_m(), noise_rng);
        graphs.push_back(std::move(p.graph));
        targets.push_back(normalize_targets(p.delta, result.params.stats.target));
      }
      const nn::GraphBatch batch = graphs.size() == 1 ? std::move(graphs.front()) : nn::concat(graphs);
      Matrix target(static_cast<Eigen::Index>(batch.node_count()), nn::kOutputDim);
      Eigen::Index row = 0;
      for (const Matrix& m : targets) {
        target.middleRows(row, m.rows()) = m;
        row += m.rows();
      }

      const double lr = config.learning_rate(step, total);
      const double loss = nn::loss_and_gradient(result.params, batch, target, grad);
      if (!std::isfinite(loss)) {
        throw NumericalError("training diverged: non-finite loss at step " + std::to_string(step));
      }
      adam.step(result.params.values, grad, lr);
      const LossRecord rec{step, lr, loss};
      result.history.push_back(rec);
      if (options.on_step) options.on_step(rec);
      ++step;
      if (options.out_dir && config.checkpoint_every > 0 && step % config.checkpoint_every == 0) {
        char name[32];
        std::snprintf(name, sizeof name, "step_%08ld", step);
        save(*options.out_dir / "checkpoints" / name);
      }
    }
  }

  if (options.out_dir) {
    write_loss_history(*options.out_dir / "loss_history.csv", result.history);
    save(*options.out_dir / "model");
  }
  return result;
}

}  // namespace forgenet::training
