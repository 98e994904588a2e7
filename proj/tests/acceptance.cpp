// Acceptance runner. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.
//
//   acceptance [--out DIR] [criterion ...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "forgenet/nn/checkpoint.hpp"
#include "forgenet/process_models.hpp"
#include "forgenet/profile.hpp"
#include "forgenet/rollout_eval.hpp"
#include "forgenet/synth_forge.hpp"
#include "forgenet/training.hpp"
#include "helpers.hpp"
#include "probes.hpp"

using namespace forgenet;
using namespace forgenet::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

fs::path g_out;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("forgenet_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void keep(const fs::path& file) {
  if (g_out.empty()) return;
  fs::create_directories(g_out);
  fs::copy_file(file, g_out / file.filename(), fs::copy_options::overwrite_existing);
}

// Desk-scale network and training schedule shared by criteria 5 to 7.
nn::NetSpec desk_spec() {
  nn::NetSpec s;
  s.hidden_dim = 32;
  s.message_passing_steps = 5;
  return s;
}

// ---------------------------------------------------------------------------

Outcome analytic_formulas() {
  using namespace process;
  struct Case {
    const char* name;
    double got;
    double want;
  };
  const ThicknessChange change = thickness_changes(1.5, 1.56);
  // Reference values computed independently at 30 significant digits.
  const Case cases[] = {
      {"deformation_degree(30, 27)", deformation_degree(30, 27), 0.210721031315652602455},
      {"diameter_for_degree(30, 0.3)", diameter_for_degree(30, 0.3), 25.8212392927517342169},
      {"Q(27, 30)", diameter_ratio(27, 30), 0.9},
      {"ds(1.5, 1.56)", change.absolute, 0.06},
      {"ds_rel(1.5, 1.56)", change.relative, 4.0},
      {"l_F(15, 13.5, 10)", forming_zone_length(15, 13.5, 10), 8.50692272942656429649},
      {"l_F(15, 13.5, 45)", forming_zone_length(15, 13.5, 45), 1.5},
      {"euler(105000, 100)", euler_buckling_stress(105000, 100), 103.630846211438265498},
      {"euler(105000, 200)", euler_buckling_stress(105000, 200), 25.9077115528595663744},
      {"hollomon(794.965, 0.334, 0.3)", hollomon_flow_stress(794.965, 0.334, 0.3), 531.748786442999400246},
      {"haarscheidt(30, 27, 1.5, 10)", predict_haarscheidt(30, 27, 1.5, 10), 0.897712181253555431745},
      {"haarscheidt(30, 27, 1.5, 20)", predict_haarscheidt(30, 27, 1.5, 20), 1.23067966407733739853},
      {"ebertshauser(30, 27, 1.5)", predict_ebertshauser(30, 27, 1.5), 0.344444444444444444444},
      {"ebertshauser(30, 27, 3)", predict_ebertshauser(30, 27, 3), 0.688888888888888888889},
      {"albert(0.3, 1.5, 30, 10)", predict_albert(0.3, 1.5, 30, 10), 1.96498},
      {"albert(phi(30, 27), 1.5, 30, 10)", predict_albert(deformation_degree(30, 27), 1.5, 30, 10),
       1.72089129961699421511},
      {"storoschew(1.5, 30, 27)", predict_storoschew(1.5, 30, 27), 1.58113883008418966600},
      {"storoschew(3, 30, 25.8212)", predict_storoschew(3, 30, 25.8212), 3.23365491301698152155},
      {"dR(27.3, 27)", dimensional_deviation(27.3, 27.0), 0.3},
  };
  double worst = 0.0;
  std::string worst_name;
  for (const Case& c : cases) {
    const double rel = std::abs(c.got - c.want) / std::abs(c.want);
    if (!(rel <= worst)) {
      worst = rel;
      worst_name = c.name;
    }
  }
  return {worst <= 1e-9,
          fmt("%zu values, max rel error %.2e (%s), tol 1e-9", std::size(cases), worst, worst_name.c_str())};
}

Outcome abtc_quadrature() {
  const ThicknessProfile up{{0, 10}, {0, 10}};
  const ThicknessProfile down{{0, 10}, {10, 0}};
  const double crossing = abtc(up, down);
  const double unsegmented = std::abs(integral(up) - integral(down));

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> shift(-1.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const ThicknessProfile f = random_profile(rng, shift(rng), 10.0 + shift(rng));
    const ThicknessProfile g = random_profile(rng, shift(rng), 10.0 + shift(rng));
    const double exact = abtc(f, g);
    const double dense = quadrature(f, g, 100000);
    worst = std::max(worst, std::abs(exact - dense) / dense);
  }
  return {crossing == 50.0 && unsegmented == 0.0 && worst < 1e-6,
          fmt("crossing %.17g (unsegmented %.17g), 200 random pairs max rel error %.2e, tol 1e-6", crossing,
              unsegmented, worst)};
}

Outcome gradient_check() {
  const TinyScene s = tiny_scene();
  const bool populated = s.sets.tube.size() > 0 && s.sets.die.size() > 0 && s.sets.stamp.size() > 0;
  const nn::ModelParameters p = random_model(tiny_spec(8, 2), 42);
  const nn::GraphBatch batch = nn::make_graph(s.scene.state, s.sets);
  const nn::Matrix targets = random_targets(batch.node_count(), 7);
  double worst = 0.0;
  std::string worst_name;
  std::size_t tensors = 0;
  for (const TensorError& e : finite_difference_check(p, batch, targets, 1e-6)) {
    ++tensors;
    if (!(e.rel_error <= worst)) {
      worst = e.rel_error;
      worst_name = e.name;
    }
  }
  return {populated && s.scene.state.size() <= 20 && worst < 1e-4,
          fmt("%zu nodes, %zu tensors, max rel error %.2e (%s), tol 1e-4", s.scene.state.size(), tensors,
              worst, worst_name.c_str())};
}

Outcome invariants() {
  const TinyScene s = tiny_scene();
  const nn::ModelParameters p = random_model(tiny_spec(8, 2), 21);
  double perm = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    perm = std::max(perm, permutation_error(p, s.scene.state, s.sets, seed));
  }

  const TinyScene column = column_scene();
  int far_changed = 0;
  int far_nodes = 0;
  for (int k : {1, 2, 3}) {
    const nn::ModelParameters pk = random_model(tiny_spec(8, k), 30 + static_cast<std::uint64_t>(k));
    for (std::size_t source : {column.scene.topology.tube_node(0, 0), column.scene.topology.tube_node(5, 1)}) {
      const LocalityResult r = locality_probe(pk, column.scene.state, column.sets, source);
      far_nodes += r.far_nodes;
      far_changed += r.far_changed;
    }
  }

  const IndependenceResult ind = no_contact_probe(random_model(tiny_spec(8, 2), 4), 8);

  // Every noisy pair of a generated trajectory reconstructs the next frame.
  const TrajectoryDataset ds = generate(make_run_config(TubeSpec{}, 0.25, 10.0, 0.05, 200, 1));
  const std::vector<TrajectoryDataset> one{ds};
  std::mt19937_64 rng(12);
  std::size_t pairs = 0;
  std::size_t mismatches = 0;
  for (int stride : {1, 2, 5}) {
    const training::NoiseModel noise = training::compute_noise_model(one, 1e-3, stride);
    for (std::size_t t = 0; t + static_cast<std::size_t>(stride) < ds.frame_count(); ++t) {
      const training::TrainingPair pair = training::make_training_pair(ds, t, stride, noise, 0.8e-3, rng);
      const auto next = ds.frame(t + static_cast<std::size_t>(stride));
      for (std::size_t i = 0; i < ds.node_count(); ++i) {
        const Vec2 in = pair.input.positions[i];
        const auto row = static_cast<Eigen::Index>(i);
        if (in.x + pair.delta(row, 0) != next[i].x || in.z + pair.delta(row, 1) != next[i].z) ++mismatches;
      }
      ++pairs;
    }
  }

  const bool pass = perm <= 1e-12 && far_nodes > 0 && far_changed == 0 && ind.contact_empty &&
                    ind.tube_bit_equal && mismatches == 0;
  return {pass, fmt("permutation %.2e (tol 1e-12); k-hop %d of %d far outputs changed; no-contact %s; "
                    "reconstruction %zu mismatches over %zu pairs",
                    perm, far_changed, far_nodes, ind.tube_bit_equal && ind.contact_empty ? "bit-equal" : "differs",
                    mismatches, pairs)};
}

// ---------------------------------------------------------------------------

constexpr long kOverfitSteps = 5000;

// Masked normalized MSE over every pair of `ds` at once.
double full_mse(const nn::ModelParameters& p, const TrajectoryDataset& ds, double contact_radius_m) {
  std::mt19937_64 rng(0);
  std::vector<nn::GraphBatch> graphs;
  std::vector<nn::Matrix> targets;
  for (std::size_t t = 0; t + 1 < ds.frame_count(); ++t) {
    const auto pair = training::make_training_pair(ds, t, 1, {}, contact_radius_m, rng);
    graphs.push_back(pair.graph);
    targets.push_back(training::normalize_targets(pair.delta, p.stats.target));
  }
  const nn::GraphBatch all = nn::concat(graphs);
  nn::Matrix stacked(all.node_features.rows(), nn::kOutputDim);
  Eigen::Index row = 0;
  for (const nn::Matrix& m : targets) {
    stacked.middleRows(row, m.rows()) = m;
    row += m.rows();
  }
  return nn::masked_mse(nn::forward(p, all), stacked, all.tube_mask);
}

Outcome overfit_probe() {
  const std::vector<TrajectoryDataset> data{generate(make_run_config(TubeSpec{}, 0.2, 10.0, 0.05, 50, 0))};
  training::TrainConfig cfg;
  cfg.net = desk_spec();
  cfg.noise_factor = 0.0;
  cfg.batch_size = 5;
  cfg.lr_start = 1e-3;
  cfg.lr_end = 1e-6;
  cfg.epochs = static_cast<int>(kOverfitSteps * cfg.batch_size / 50);
  training::TrainOptions opts;
  opts.max_steps = kOverfitSteps;
  const auto start = std::chrono::steady_clock::now();
  const training::TrainResult r = training::train(data, cfg, opts);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const double mse = full_mse(r.params, data[0], cfg.contact_radius_m());
  const double first = r.history.front().loss;
  const double at500 = r.history.size() > 500 ? r.history[500].loss : r.history.back().loss;
  return {mse < 1e-6 && r.history.size() <= static_cast<std::size_t>(kOverfitSteps),
          fmt("%zu tube nodes, 50 pairs, %zu steps in %.0f s: final MSE %.3e (tol 1e-6); loss step 0 %.3e, "
              "step 500 %.3e",
              data[0].topology.tube.size(), r.history.size(), seconds, mse, first, at500)};
}

// ---------------------------------------------------------------------------

constexpr int kDeskSteps = 400;

std::vector<TrajectoryDataset> generate_all(const std::vector<RunConfig>& configs) {
  std::vector<TrajectoryDataset> out(configs.size());
  const auto n = static_cast<long>(configs.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = generate(configs[static_cast<std::size_t>(i)]);
  return out;
}

training::TrainConfig desk_training(int epochs) {
  training::TrainConfig cfg;
  cfg.net = desk_spec();
  cfg.epochs = epochs;
  cfg.batch_size = 5;
  cfg.lr_start = 1e-3;
  cfg.lr_end = 1e-5;
  return cfg;
}

Outcome generalization_probe() {
  std::vector<RunConfig> grid;
  for (double phi : {0.15, 0.20, 0.25}) {
    for (double alpha : {7.5, 10.0, 12.5}) grid.push_back(make_run_config(TubeSpec{}, phi, alpha, 0.05, kDeskSteps, 0));
  }
  const Split split = make_split(grid);
  std::vector<RunConfig> train_configs;
  for (std::size_t i : split.train) train_configs.push_back(grid[i]);
  const RunConfig& held = grid[split.test.at(0)];
  const std::vector<TrajectoryDataset> train_data = generate_all(train_configs);
  const TrajectoryDataset test_data = generate(held);

  const training::TrainConfig cfg = desk_training(20);
  const training::TrainResult r = training::train(train_data, cfg);
  const eval::Rollout roll = eval::rollout(r.params, test_data.state(0), test_data.topology,
                                           eval::rollout_config_for(test_data, 1, cfg.contact_radius_m()));
  const eval::Evaluation e = eval::evaluate(roll, test_data, 1);

  const std::size_t n = e.rmse_per_step.size();
  bool finite = n > 0;
  for (double v : e.rmse_per_step) finite = finite && std::isfinite(v);
  const double early = e.rmse_per_step.at(n / 10 - 1);
  const double last = e.rmse_per_step.back();
  const double bound = 0.15 * e.reference_change;

  if (!g_out.empty()) {
    const fs::path dir = scratch("generalization");
    eval::write_rmse_curve(dir / "generalization_rmse_curve.csv", e.rmse_per_step);
    eval::write_thickness_diff(dir / "generalization_thickness_diff.csv", e);
    keep(dir / "generalization_rmse_curve.csv");
    keep(dir / "generalization_thickness_diff.csv");
    fs::remove_all(dir);
  }
  return {e.abtc < bound && finite && last < 10.0 * early,
          fmt("held out phi %.2f alpha %.1f, %zu train runs, %zu steps: ABTC %.4e mm^2 vs bound %.4e "
              "(15%% of %.4e); RMSE at 10%% %.3e m, final %.3e m",
              held.phi_target, held.alpha(), train_data.size(), n, e.abtc, bound, e.reference_change, early,
              last)};
}

Outcome stride_ablation() {
  std::vector<RunConfig> train_configs;
  std::vector<RunConfig> test_configs;
  const auto test_cells = nosing_table_test_cells();
  for (const GridCell& c : nosing_table_cells()) {
    const bool test = std::any_of(test_cells.begin(), test_cells.end(), [&](const GridCell& t) {
      return std::abs(t.phi - c.phi) < 1e-9 && std::abs(t.alpha - c.alpha) < 1e-9;
    });
    (test ? test_configs : train_configs).push_back(make_run_config(TubeSpec{}, c.phi, c.alpha, 0.05, kDeskSteps, 0));
  }
  const auto train_data = generate_all(train_configs);
  const auto test_data = generate_all(test_configs);
  const int strides[] = {1, 2, 5, 10, 20};
  const eval::AblationTable t = eval::ablate_stride(train_data, test_data, desk_training(3), strides);

  const fs::path dir = scratch("ablation");
  eval::write_ablation(dir / "ablation.csv", t);
  keep(dir / "ablation.csv");
  fs::remove_all(dir);

  const auto totals = t.totals();
  bool complete = t.configs.size() == 9 && t.strides.size() == 5 && t.failures.empty();
  for (const auto& total : totals) complete = complete && total.has_value();
  std::string row;
  for (std::size_t s = 0; s < totals.size(); ++s) {
    row += fmt("%s%d:%s", s ? " " : "", t.strides[s], totals[s] ? fmt("%.3g", *totals[s]).c_str() : "failed");
  }
  const bool ratio_ok = complete && *totals[1] <= 3.0 * *totals[0];
  return {complete && ratio_ok,
          fmt("%zu configs x %zu strides, %zu train runs, %zu failed cells; totals mm^2 {%s}; stride 2 / stride 1 "
              "= %.3f (tol 3)",
              t.configs.size(), t.strides.size(), train_data.size(), t.failures.size(), row.c_str(),
              complete ? *totals[1] / *totals[0] : NAN)};
}

// ---------------------------------------------------------------------------

std::vector<std::pair<fs::path, std::vector<unsigned char>>> snapshot(const fs::path& root,
                                                                       const std::string& skip = {}) {
  std::vector<std::pair<fs::path, std::vector<unsigned char>>> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file() || entry.path().filename() == skip) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    files.emplace_back(fs::relative(entry.path(), root),
                       std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {}));
  }
  std::sort(files.begin(), files.end());
  return files;
}

// Generate, train, roll out and write every CSV into `dir`.
void pipeline(const fs::path& dir) {
  const std::vector<RunConfig> configs = {make_run_config(TubeSpec{}, 0.2, 10.0, 0.05, 40, 5),
                                          make_run_config(TubeSpec{}, 0.25, 12.5, 0.05, 40, 5)};
  const auto data = generate_all(configs);
  write_dataset(data[0], dir / "data_train");
  write_dataset(data[1], dir / "data_test");
  const std::vector<TrajectoryDataset> train_data{read_dataset(dir / "data_train")};
  const std::vector<TrajectoryDataset> test_data{read_dataset(dir / "data_test")};

  training::TrainConfig cfg;
  cfg.net = tiny_spec(8, 2);
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.seed = 9;
  cfg.checkpoint_every = 5;
  training::TrainOptions opts;
  opts.out_dir = dir / "train";
  const nn::ModelParameters model = training::train(train_data, cfg, opts).params;

  const TrajectoryDataset& test = test_data[0];
  const eval::Rollout roll =
      eval::rollout(model, test.state(0), test.topology, eval::rollout_config_for(test, 1, 0.8e-3));
  const eval::Evaluation e = eval::evaluate(roll, test, 1);
  eval::write_rmse_curve(dir / "rmse_curve.csv", e.rmse_per_step);
  eval::write_thickness_diff(dir / "thickness_diff.csv", e);
  const eval::GridEntry expected[] = {{0.2, 10.0, "train", {}}, {0.25, 12.5, "test", {}}, {0.3, 10.0, "test", {}}};
  std::vector<TrajectoryDataset> both = train_data;
  both.push_back(test);
  eval::write_abtc_grid(dir / "abtc_grid.csv", eval::grid_report(model, both, expected, 1, 0.8e-3));
  const int strides[] = {1, 2};
  eval::write_ablation(dir / "ablation.csv", eval::ablate_stride(train_data, test_data, cfg, strides));
  eval::TimingReport timing = eval::time_report(model, configs[1], 0.8e-3);
  eval::write_timing(dir / "timing.csv", timing);
}

Outcome round_trips() {
  const fs::path root = scratch("round_trip");
  // Dataset: write, read, write again.
  const TrajectoryDataset ds = generate(make_run_config(TubeSpec{}, 0.3, 12.5, 0.05, 60, 3));
  write_dataset(ds, root / "ds_a");
  const TrajectoryDataset back = read_dataset(root / "ds_a");
  write_dataset(back, root / "ds_b");
  const bool frames_equal = back.frames.size() == ds.frames.size() &&
                            std::equal(ds.frames.begin(), ds.frames.end(), back.frames.begin(),
                                       [](Vec2 a, Vec2 b) { return a == b; });
  const bool ds_bytes = snapshot(root / "ds_a") == snapshot(root / "ds_b");

  // Checkpoint: write, read, write again.
  const nn::ModelParameters p = random_model(desk_spec(), 11);
  nn::write_checkpoint(p, root / "ck_a");
  const nn::ModelParameters q = nn::read_checkpoint(root / "ck_a");
  nn::write_checkpoint(q, root / "ck_b");
  const bool params_equal = p.values == q.values;
  const bool ck_bytes = snapshot(root / "ck_a") == snapshot(root / "ck_b");

  // Same seed and config twice. timing.csv holds wall-clock times.
  pipeline(root / "run_a");
  pipeline(root / "run_b");
  const auto a = snapshot(root / "run_a", "timing.csv");
  const auto b = snapshot(root / "run_b", "timing.csv");
  std::size_t csvs = 0;
  for (const auto& [path, bytes] : a) csvs += path.extension() == ".csv" ? 1 : 0;
  const bool reruns = a == b && !a.empty();
  fs::remove_all(root);
  return {frames_equal && ds_bytes && params_equal && ck_bytes && reruns,
          fmt("dataset %s, checkpoint %s, rerun %zu files (%zu CSVs) %s", frames_equal && ds_bytes ? "byte-exact" : "differs",
              params_equal && ck_bytes ? "byte-exact" : "differs", a.size(), csvs,
              reruns ? "byte-identical" : "differ")};
}

Outcome parameter_count() {
  const nn::NetSpec full;  // hidden 128, 3 hidden layers, 15 blocks
  const double count = static_cast<double>(nn::parameter_count(full));
  const double rel = count / 2.88e6 - 1.0;
  return {std::abs(rel) <= 0.02,
          fmt("hidden %d, k %d: %.0f parameters vs 2.88e6 (%+.1f%%, tol 2%%)", full.hidden_dim,
              full.message_passing_steps, count, 100.0 * rel)};
}

Outcome surrogate_speed() {
  const RunConfig config = make_run_config(TubeSpec{}, 0.2, 10.0, 0.05, kDeskSteps, 0);
  const nn::ModelParameters p = random_model(desk_spec(), 1);
  const eval::TimingReport t = eval::time_report(p, config, 0.8e-3);
  const double speedup = t.generator_ms_per_step() / t.surrogate_ms_per_step();
  return {speedup >= 3.0, fmt("%zu nodes, %d steps: surrogate %.4f ms/step, generator %.4f ms/step, speedup "
                              "%.4g (need >= 3)",
                              t.node_count, t.steps, t.surrogate_ms_per_step(), t.generator_ms_per_step(), speedup)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  std::string out;
  app.add_option("--out", out, "Directory for the CSVs produced by the probes");
  app.add_option("criteria", only, "Criteria to run (default: all)");
  CLI11_PARSE(app, argc, argv);
  g_out = out;

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"analytic formulas", analytic_formulas},
      {"ABTC vs quadrature", abtc_quadrature},
      {"gradient check", gradient_check},
      {"architectural invariants", invariants},
      {"overfit probe", overfit_probe},
      {"generalization probe", generalization_probe},
      {"stride ablation", stride_ablation},
      {"round trips and reruns", round_trips},
      {"parameter count", parameter_count},
      {"surrogate speed", surrogate_speed},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %2d %s  %s: %s [%.1f s]\n", id, o.pass ? "PASS" : "FAIL", criteria[i].first,
                o.detail.c_str(), s);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
