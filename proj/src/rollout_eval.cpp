#include "forgenet/rollout_eval.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "forgenet/errors.hpp"

namespace forgenet::eval {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_optional(const std::optional<double>& v, const char* missing) {
  return v ? fmt(*v) : std::string(missing);
}

}  // namespace

double rmse(std::span<const Vec2> predicted, std::span<const Vec2> reference, IndexRange nodes) {
  if (predicted.size() != reference.size() || nodes.end > predicted.size()) {
    throw ConfigError("rmse needs aligned node sets");
  }
  if (nodes.size() == 0) throw ConfigError("rmse over an empty node set");
  double sum = 0.0;
  for (std::size_t i = nodes.begin; i < nodes.end; ++i) {
    const double dx = predicted[i].x - reference[i].x;
    const double dz = predicted[i].z - reference[i].z;
    sum += dx * dx + dz * dz;
  }
  return std::sqrt(sum / static_cast<double>(nodes.size()));
}

double rmse(const MeshState& predicted, const MeshState& reference) {
  if (predicted.size() != reference.size()) throw ConfigError("rmse needs aligned node sets");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted.kinds[i] != NodeKind::DeformableTube) continue;
    const double dx = predicted.positions[i].x - reference.positions[i].x;
    const double dz = predicted.positions[i].z - reference.positions[i].z;
    sum += dx * dx + dz * dz;
    ++n;
  }
  if (n == 0) throw ConfigError("rmse over an empty node set");
  return std::sqrt(sum / static_cast<double>(n));
}

Rollout rollout(const nn::ModelParameters& params, const MeshState& initial,
                const Topology& topology, const RolloutConfig& config) {
  initial.validate();
  if (config.n_steps < 0) throw ConfigError("n_steps must be >= 0");
  if (config.stride < 1) throw ConfigError("stride must be >= 1");
  const auto start = Clock::now();

  Rollout out;
  out.node_count = initial.size();
  out.kinds = initial.kinds;
  out.frames.reserve(out.node_count * static_cast<std::size_t>(config.n_steps + 1));
  out.frames.insert(out.frames.end(), initial.positions.begin(), initial.positions.end());

  MeshState state = initial;
  const double stamp_dz = config.feed_per_step * config.stride;
  for (int step = 0; step < config.n_steps; ++step) {
    const nn::GraphBatch graph = nn::make_graph(state, topology, config.contact_radius_m, config.mu);
    const nn::Matrix delta = nn::predict_delta(params, graph);
    for (std::size_t i = topology.tube.begin; i < topology.tube.end; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      const Vec2 next{state.positions[i].x + delta(r, 0), state.positions[i].z + delta(r, 1)};
      if (!std::isfinite(next.x) || !std::isfinite(next.z)) {
        throw NumericalError("rollout produced a non-finite position at step " +
                             std::to_string(step + 1) + ", node " + std::to_string(i));
      }
      // Radial coordinates stay on the non-negative half plane.
      state.positions[i] = {std::max(next.x, 0.0), next.z};
    }
    for (std::size_t i = topology.stamp.begin; i < topology.stamp.end; ++i) {
      state.positions[i].z -= stamp_dz;
    }
    out.frames.insert(out.frames.end(), state.positions.begin(), state.positions.end());
  }
  out.seconds = seconds_since(start);
  return out;
}

RolloutConfig rollout_config_for(const TrajectoryDataset& reference, int stride,
                                 double contact_radius_m) {
  if (stride < 1) throw ConfigError("stride must be >= 1");
  RolloutConfig c;
  c.n_steps = static_cast<int>((reference.frame_count() - 1) / static_cast<std::size_t>(stride));
  c.stride = stride;
  c.contact_radius_m = contact_radius_m;
  c.mu = reference.config.mu;
  c.feed_per_step = reference.config.feed_per_step();
  return c;
}

DiffCurve thickness_difference_curve(const ThicknessProfile& final_profile,
                                     const ThicknessProfile& initial_profile, double cutoff) {
  final_profile.validate();
  initial_profile.validate();
  const double lf = final_profile.back() - final_profile.front();
  const double li = initial_profile.back() - initial_profile.front();
  DiffCurve c;
  for (std::size_t i = 0; i < final_profile.size(); ++i) {
    const double rel = (final_profile.position[i] - final_profile.front()) / lf;
    if (rel > cutoff) break;
    c.rel_length.push_back(rel);
    c.ds.push_back(final_profile.thickness[i] - initial_profile.at(initial_profile.front() + rel * li));
  }
  return c;
}

namespace {

double curve_at(const DiffCurve& c, double rel) {
  if (c.rel_length.empty()) return NAN;
  ThicknessProfile p{c.rel_length, c.ds};
  if (p.size() == 1) return p.thickness.front();
  return p.at(rel);
}

}  // namespace

Evaluation evaluate(const Rollout& predicted, const TrajectoryDataset& reference, int stride,
                    double cutoff) {
  if (stride < 1) throw ConfigError("stride must be >= 1");
  if (!(cutoff > 0.0 && cutoff <= 1.0)) throw ConfigError("cutoff must be in (0, 1]");
  if (predicted.node_count != reference.node_count()) {
    throw ConfigError("rollout and reference node counts differ");
  }
  const std::size_t steps = predicted.frame_count() - 1;
  if (steps * static_cast<std::size_t>(stride) >= reference.frame_count()) {
    throw ConfigError("rollout is longer than the reference trajectory");
  }
  const Topology& topo = reference.topology;
  Evaluation e;
  e.rmse_per_step.reserve(steps);
  for (std::size_t k = 1; k <= steps; ++k) {
    e.rmse_per_step.push_back(
        rmse(predicted.frame(k), reference.frame(k * static_cast<std::size_t>(stride)), topo.tube));
  }

  const MeshState initial = reference.state(0);
  const MeshState final_ref = reference.state(steps * static_cast<std::size_t>(stride));
  MeshState final_pred{std::vector<Vec2>(predicted.frame(steps).begin(), predicted.frame(steps).end()),
                       predicted.kinds};
  e.initial = thickness_profile(initial, topo);
  e.final_reference = thickness_profile(final_ref, topo);
  e.final_predicted = thickness_profile(final_pred, topo);

  e.window_mm = cutoff * (e.final_reference.back() - e.final_reference.front());
  const double lo = e.final_reference.front();
  const double hi = lo + e.window_mm;
  e.abtc = abtc(clip(e.final_predicted, lo, hi), clip(e.final_reference, lo, hi));
  e.reference_change = abtc(clip(e.final_reference, lo, hi), clip(e.initial, lo, hi));
  e.ds_predicted = thickness_difference_curve(e.final_predicted, e.initial, cutoff);
  e.ds_reference = thickness_difference_curve(e.final_reference, e.initial, cutoff);
  return e;
}

double rollout_abtc(const nn::ModelParameters& params, const TrajectoryDataset& reference,
                    int stride, double contact_radius_m, double cutoff) {
  const Rollout r = rollout(params, reference.state(0), reference.topology,
                            rollout_config_for(reference, stride, contact_radius_m));
  return evaluate(r, reference, stride, cutoff).abtc;
}

// ---------------------------------------------------------------------------

std::vector<std::optional<double>> AblationTable::totals() const {
  std::vector<std::optional<double>> out(strides.size(), 0.0);
  for (const auto& row : abtc) {
    for (std::size_t s = 0; s < strides.size(); ++s) {
      if (!out[s]) continue;
      if (row[s]) {
        *out[s] += *row[s];
      } else {
        out[s].reset();
      }
    }
  }
  return out;
}

namespace {

std::string config_label(const RunConfig& c) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "phi=%.4g alpha=%.4g mu=%.4g", c.phi_target, c.alpha(), c.mu);
  return buf;
}

}  // namespace

AblationTable ablate_stride(std::span<const TrajectoryDataset> train_data,
                            std::span<const TrajectoryDataset> test_data,
                            const training::TrainConfig& base, std::span<const int> strides,
                            const training::TrainOptions& options, double cutoff) {
  AblationTable table;
  table.strides.assign(strides.begin(), strides.end());
  for (const TrajectoryDataset& ds : test_data) table.configs.push_back(config_label(ds.config));
  table.abtc.assign(test_data.size(), std::vector<std::optional<double>>(strides.size()));

  for (std::size_t s = 0; s < strides.size(); ++s) {
    training::TrainConfig cfg = base;
    cfg.step_stride = strides[s];
    training::TrainOptions opts = options;
    if (options.out_dir) opts.out_dir = *options.out_dir / ("stride_" + std::to_string(strides[s]));
    nn::ModelParameters model;
    try {
      model = training::train(train_data, cfg, opts).params;
    } catch (const std::exception& ex) {
      table.failures.push_back("stride " + std::to_string(strides[s]) + ": training failed: " + ex.what());
      continue;
    }
    for (std::size_t c = 0; c < test_data.size(); ++c) {
      try {
        table.abtc[c][s] = rollout_abtc(model, test_data[c], strides[s], cfg.contact_radius_m(), cutoff);
      } catch (const std::exception& ex) {
        table.failures.push_back("stride " + std::to_string(strides[s]) + ", " + table.configs[c] +
                                 ": " + ex.what());
      }
    }
  }
  return table;
}

std::vector<GridEntry> grid_report(const nn::ModelParameters& params,
                                   std::span<const TrajectoryDataset> data,
                                   std::span<const GridEntry> expected, int stride,
                                   double contact_radius_m, double cutoff) {
  std::vector<GridEntry> out(expected.begin(), expected.end());
  const auto n = static_cast<long>(out.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    GridEntry& cell = out[static_cast<std::size_t>(i)];
    cell.abtc.reset();
    for (const TrajectoryDataset& ds : data) {
      if (std::abs(ds.config.phi_target - cell.phi) > 1e-9 ||
          std::abs(ds.config.alpha() - cell.alpha) > 1e-9) {
        continue;
      }
      try {
        cell.abtc = rollout_abtc(params, ds, stride, contact_radius_m, cutoff);
      } catch (const std::exception&) {
        cell.abtc.reset();
      }
      break;
    }
  }
  return out;
}

TimingReport time_report(const nn::ModelParameters& params, const RunConfig& config,
                         double contact_radius_m) {
  TimingReport t;
  t.steps = config.n_steps;
  auto start = Clock::now();
  const TrajectoryDataset ds = generate(config);
  t.generator_seconds = seconds_since(start);
  t.node_count = ds.node_count();
  const Rollout r = rollout(params, ds.state(0), ds.topology, rollout_config_for(ds, 1, contact_radius_m));
  t.surrogate_seconds = r.seconds;
  return t;
}

// ---------------------------------------------------------------------------

void write_rmse_curve(const std::filesystem::path& path, std::span<const double> rmse_per_step) {
  auto out = open_csv(path);
  out << "step,rmse_m\n";
  for (std::size_t k = 0; k < rmse_per_step.size(); ++k) {
    out << (k + 1) << ',' << fmt(rmse_per_step[k]) << '\n';
  }
}

void write_thickness_diff(const std::filesystem::path& path, const Evaluation& e) {
  auto out = open_csv(path);
  out << "rel_length,ds_mm_pred,ds_mm_ref\n";
  const DiffCurve& ref = e.ds_reference;
  for (std::size_t i = 0; i < ref.rel_length.size(); ++i) {
    out << fmt(ref.rel_length[i]) << ',' << fmt(curve_at(e.ds_predicted, ref.rel_length[i])) << ','
        << fmt(ref.ds[i]) << '\n';
  }
}

void write_abtc_grid(const std::filesystem::path& path, std::span<const GridEntry> grid) {
  auto out = open_csv(path);
  out << "phi,alpha,split,abtc_mm2\n";
  for (const GridEntry& g : grid) {
    out << fmt(g.phi) << ',' << fmt(g.alpha) << ',' << g.split << ','
        << fmt_optional(g.abtc, "absent") << '\n';
  }
}

void write_ablation(const std::filesystem::path& path, const AblationTable& table) {
  auto out = open_csv(path);
  out << "config";
  for (int s : table.strides) out << ",stride_" << s;
  out << '\n';
  for (std::size_t c = 0; c < table.configs.size(); ++c) {
    out << '"' << table.configs[c] << '"';
    for (const auto& v : table.abtc[c]) out << ',' << fmt_optional(v, "failed");
    out << '\n';
  }
  out << "total";
  for (const auto& v : table.totals()) out << ',' << fmt_optional(v, "failed");
  out << '\n';
}

void write_timing(const std::filesystem::path& path, const TimingReport& report) {
  auto out = open_csv(path);
  out << "label,steps,nodes,total_s,ms_per_step,reproducible\n";
  out << "surrogate," << report.steps << ',' << report.node_count << ','
      << fmt(report.surrogate_seconds) << ',' << fmt(report.surrogate_ms_per_step()) << ",yes\n";
  out << "generator," << report.steps << ',' << report.node_count << ','
      << fmt(report.generator_seconds) << ',' << fmt(report.generator_ms_per_step()) << ",yes\n";
  for (const PublishedTiming& p : kPublishedTimings) {
    out << p.label << ',' << kPublishedSteps << ",," << fmt(60.0 * p.minutes) << ','
        << fmt(60e3 * p.minutes / kPublishedSteps) << ",no\n";
  }
}

}  // namespace forgenet::eval
