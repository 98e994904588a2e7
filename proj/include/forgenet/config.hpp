#pragma once

// Experiment configuration: one TOML-style file with [tube], [run], [net],
// [train], [eval] and [grid] tables. Unknown tables or keys are errors.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "forgenet/synth_forge.hpp"
#include "forgenet/training.hpp"

namespace forgenet {

struct ExperimentConfig {
  TubeSpec tube;
  DieGeometry die;  // entry and reduction radii are derived from the tube and phi
  double phi = 0.2;
  double alpha = 10.0;  // deg
  double mu = 0.05;
  double stamp_speed = 1000.0;  // mm/s
  double dt = 1.5e-5;           // s
  int n_steps = 400;
  std::uint64_t seed = 0;

  training::TrainConfig train;
  long max_steps = 0;

  double cutoff = 0.8;
  std::vector<int> strides = {1, 2, 5, 10, 20};

  // Empty: the mu = 0.05 nosing table. Otherwise the full phi x alpha product.
  std::vector<double> grid_phi;
  std::vector<double> grid_alpha;

  RunConfig run_config() const;
  RunConfig run_config(double phi, double alpha) const;
  std::vector<RunConfig> grid_configs() const;

  // Throws ConfigError naming the offending key.
  void validate() const;
};

// Parses `text` on top of `base`. Throws ConfigError with the line number
// for syntax errors, unknown keys or ill-typed values.
ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path);

// Applies FORGENET_SEED when set.
void apply_environment(ExperimentConfig& config);

// Canonical TOML text of every key; parse_config(to_toml(c)) == c.
std::string to_toml(const ExperimentConfig& config);

// One line per key: name, default, meaning.
std::string config_reference();

}  // namespace forgenet
