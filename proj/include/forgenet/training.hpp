#pragma once

// One-step supervised training of the mesh network on generated
// trajectories: noisy (state, next state) pairs, masked MSE, Adam with an
// exponentially decaying learning rate.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "forgenet/nn/network.hpp"
#include "forgenet/synth_forge.hpp"

namespace forgenet::training {

struct TrainConfig {
  nn::NetSpec net;
  int epochs = 50;
  int batch_size = 28;
  double lr_start = 1e-4;
  double lr_end = 1e-5;
  double noise_factor = 1e-3;
  double contact_radius = 0.8;  // mm
  int step_stride = 1;
  std::uint64_t seed = 0;
  int checkpoint_every = 0;  // optimizer steps; 0 writes only the final model

  double contact_radius_m() const { return contact_radius * 1e-3; }
  // lr_start * (lr_end / lr_start)^(step / total_steps)
  double learning_rate(long step, long total_steps) const;
  void validate() const;
};

// Per-axis noise standard deviation in meters.
struct NoiseModel {
  double sigma_x = 0.0;
  double sigma_z = 0.0;
};

// noise_factor * |signed mean displacement| per axis over all tube nodes and
// all (t, t + stride) frame pairs. Throws DataError when there is no pair.
NoiseModel compute_noise_model(std::span<const TrajectoryDataset> data, double noise_factor,
                               int stride);

struct TrainingPair {
  MeshState input;        // tube nodes perturbed by the noise
  nn::GraphBatch graph;   // built from `input`
  nn::Matrix delta;       // unnormalized target [nodes, 2] in meters
};

// Pair (t, t + stride). Tube nodes get xi ~ N(0, sigma) per axis; the target
// is p(t + stride) - (p(t) + xi), so input + delta reproduces the next frame
// exactly. Contact edges come from the perturbed state.
TrainingPair make_training_pair(const TrajectoryDataset& ds, std::size_t t, int stride,
                                const NoiseModel& noise, double contact_radius_m,
                                std::mt19937_64& rng);

// Standardization statistics for node features, each edge set's features and
// the targets, from one noise-free pass over the training pairs. Columns with
// zero spread keep their mean and get std 1.
nn::NormalizationStats compute_stats(std::span<const TrajectoryDataset> data, int stride,
                                     double contact_radius_m);

nn::Matrix normalize_targets(const nn::Matrix& delta, const nn::Standardizer& target);

struct LossRecord {
  long step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

struct TrainResult {
  nn::ModelParameters params;
  std::vector<LossRecord> history;
  NoiseModel noise;
};

class Adam {
 public:
  explicit Adam(std::size_t size, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(std::vector<double>& params, std::span<const double> grad, double lr);

 private:
  std::vector<double> m_;
  std::vector<double> v_;
  double beta1_;
  double beta2_;
  double eps_;
  long t_ = 0;
};

struct TrainOptions {
  // Receives loss history, checkpoints and the final model when set.
  std::optional<std::filesystem::path> out_dir;
  // Starting point; freshly initialized from the config seed when absent.
  std::optional<nn::ModelParameters> init;
  // Cap on optimizer steps regardless of epochs (0 = none).
  long max_steps = 0;
  // Called after every optimizer step.
  std::function<void(const LossRecord&)> on_step;
};

// Runs epochs * ceil(pairs / batch_size) optimizer steps over every
// (dataset, t) pair in shuffled order. Throws NumericalError as soon as the
// loss stops being finite.
TrainResult train(std::span<const TrajectoryDataset> data, const TrainConfig& config,
                  const TrainOptions& options = {});

void write_loss_history(const std::filesystem::path& path, std::span<const LossRecord> history);

}  // namespace forgenet::training
