#pragma once

// Autoregressive rollout of a trained one-step model and the evaluation
// metrics built on it: per-step RMSE, thickness curves and ABTC, the stride
// ablation table, the whole-grid ABTC report and timing.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "forgenet/nn/network.hpp"
#include "forgenet/profile.hpp"
#include "forgenet/synth_forge.hpp"
#include "forgenet/training.hpp"

namespace forgenet::eval {

// sqrt(mean over nodes in `nodes` of |pred_i - ref_i|^2), meters.
double rmse(std::span<const Vec2> predicted, std::span<const Vec2> reference, IndexRange nodes);
// Same over every DeformableTube node of `predicted`.
double rmse(const MeshState& predicted, const MeshState& reference);

struct RolloutConfig {
  int n_steps = 0;
  int stride = 1;
  double contact_radius_m = 0.8e-3;
  double mu = 0.05;
  double feed_per_step = 1.5e-5;  // stamp feed per generator step, m
};

struct Rollout {
  std::size_t node_count = 0;
  std::vector<Vec2> frames;  // n_steps + 1 frames, flattened
  std::vector<NodeKind> kinds;
  double seconds = 0.0;

  std::size_t frame_count() const { return node_count == 0 ? 0 : frames.size() / node_count; }
  std::span<const Vec2> frame(std::size_t k) const {
    return {frames.data() + k * node_count, node_count};
  }
};

// Each step rebuilds contact edges, adds the predicted delta to the tube
// nodes, lowers the stamp by feed * stride and leaves the die in place.
// Throws NumericalError naming the step and node of the first non-finite
// prediction.
Rollout rollout(const nn::ModelParameters& params, const MeshState& initial,
                const Topology& topology, const RolloutConfig& config);

// Rollout configuration that covers the whole reference trajectory at
// `stride` using the reference's run parameters.
RolloutConfig rollout_config_for(const TrajectoryDataset& reference, int stride,
                                 double contact_radius_m);

// Thickness change over relative length (0 at the leading bottom row, 1 at the stamp end).
struct DiffCurve {
  std::vector<double> rel_length;
  std::vector<double> ds;  // mm
};

// final(l) - initial(l) at the final profile's samples, with l taken
// relative to each profile's own length, for l <= cutoff.
DiffCurve thickness_difference_curve(const ThicknessProfile& final_profile,
                                     const ThicknessProfile& initial_profile, double cutoff);

struct Evaluation {
  std::vector<double> rmse_per_step;  // rollout step k = 1..n at index k - 1
  ThicknessProfile initial;
  ThicknessProfile final_predicted;
  ThicknessProfile final_reference;
  double window_mm = 0.0;          // cutoff * reference length
  double abtc = 0.0;               // mm^2, prediction vs reference over the window
  double reference_change = 0.0;   // mm^2, area between reference final and initial
  DiffCurve ds_predicted;
  DiffCurve ds_reference;
};

// Compares rollout frame k with reference frame k * stride.
Evaluation evaluate(const Rollout& predicted, const TrajectoryDataset& reference, int stride,
                    double cutoff = 0.8);

// ABTC of the final rollout frame against the reference over the window.
double rollout_abtc(const nn::ModelParameters& params, const TrajectoryDataset& reference,
                    int stride, double contact_radius_m, double cutoff = 0.8);

struct AblationTable {
  std::vector<std::string> configs;
  std::vector<int> strides;
  // abtc[config][stride]; empty when the cell failed.
  std::vector<std::vector<std::optional<double>>> abtc;
  std::vector<std::string> failures;

  // Column totals; empty when any cell of the column failed.
  std::vector<std::optional<double>> totals() const;
};

// Trains one model per stride with otherwise identical settings and scores
// every test dataset.
AblationTable ablate_stride(std::span<const TrajectoryDataset> train_data,
                            std::span<const TrajectoryDataset> test_data,
                            const training::TrainConfig& base, std::span<const int> strides,
                            const training::TrainOptions& options = {}, double cutoff = 0.8);

struct GridEntry {
  double phi = 0.0;
  double alpha = 0.0;
  std::string split;           // "train" or "test"
  std::optional<double> abtc;  // absent when the run is missing or failed
};

// ABTC for every expected cell; cells without a matching dataset (same phi
// and alpha) stay absent.
std::vector<GridEntry> grid_report(const nn::ModelParameters& params,
                                   std::span<const TrajectoryDataset> data,
                                   std::span<const GridEntry> expected, int stride,
                                   double contact_radius_m, double cutoff = 0.8);

struct TimingReport {
  int steps = 0;
  std::size_t node_count = 0;
  double surrogate_seconds = 0.0;
  double generator_seconds = 0.0;

  double surrogate_ms_per_step() const { return 1e3 * surrogate_seconds / steps; }
  double generator_ms_per_step() const { return 1e3 * generator_seconds / steps; }
};

// Times a surrogate rollout and the generator over the same number of steps
// on the same scene.
TimingReport time_report(const nn::ModelParameters& params, const RunConfig& config,
                         double contact_radius_m);

// Reference execution times reported for the full-scale finite element
// model and the original network; documentation only, not reproducible here.
struct PublishedTiming {
  const char* label;
  double minutes;
};
inline constexpr PublishedTiming kPublishedTimings[] = {
    {"fem_reference", 301.0}, {"network_cpu_reference", 23.0}, {"network_gpu_reference", 3.5}};
inline constexpr int kPublishedSteps = 4500;

// CSV writers; column order is fixed and documented in the README.
void write_rmse_curve(const std::filesystem::path& path, std::span<const double> rmse_per_step);
void write_thickness_diff(const std::filesystem::path& path, const Evaluation& e);
void write_abtc_grid(const std::filesystem::path& path, std::span<const GridEntry> grid);
void write_ablation(const std::filesystem::path& path, const AblationTable& table);
void write_timing(const std::filesystem::path& path, const TimingReport& report);

}  // namespace forgenet::eval
