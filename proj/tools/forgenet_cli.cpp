// forgenet: generate nosing trajectories, train the mesh network, roll it out
// and evaluate it. Exit codes: 0 ok, 1 runtime failure, 2 configuration error.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "forgenet/config.hpp"
#include "forgenet/errors.hpp"
#include "forgenet/nn/checkpoint.hpp"
#include "forgenet/nn/kernels.hpp"
#include "forgenet/process_models.hpp"
#include "forgenet/rollout_eval.hpp"
#include "forgenet/synth_forge.hpp"
#include "forgenet/training.hpp"

namespace fs = std::filesystem;
using namespace forgenet;

namespace {

struct Common {
  std::string config_path;
  int jobs = 0;
};

ExperimentConfig load(const Common& common) {
  ExperimentConfig c = common.config_path.empty() ? ExperimentConfig{} : load_config(common.config_path);
  apply_environment(c);
  return c;
}

void require_dir(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string(what) + " is required");
  if (!fs::is_directory(path)) throw ConfigError(std::string(what) + " does not exist: " + path);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

std::string run_name(const RunConfig& c) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "run_phi%.3f_alpha%.1f_mu%.3f", c.phi_target, c.alpha(), c.mu);
  return buf;
}

// Datasets in `dir`: the directory itself when it holds a manifest,
// otherwise every immediate subdirectory that does, in name order.
std::vector<TrajectoryDataset> load_datasets(const fs::path& dir) {
  std::vector<TrajectoryDataset> out;
  if (fs::exists(dir / "manifest.json")) {
    out.push_back(read_dataset(dir));
    return out;
  }
  std::vector<fs::path> subdirs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / "manifest.json")) subdirs.push_back(entry.path());
  }
  std::sort(subdirs.begin(), subdirs.end());
  for (const auto& p : subdirs) out.push_back(read_dataset(p));
  if (out.empty()) throw DataError("no datasets found in " + dir.string());
  return out;
}

std::vector<TrajectoryDataset> select_split(std::vector<TrajectoryDataset> all, const std::string& split) {
  std::vector<TrajectoryDataset> out;
  for (auto& ds : all) {
    if (ds.split == split || ds.split.empty()) out.push_back(std::move(ds));
  }
  return out;
}

class Log {
 public:
  explicit Log(const fs::path& path) : out_(path, std::ios::app), start_(std::chrono::steady_clock::now()) {}
  void operator()(const std::string& msg) {
    const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    char buf[32];
    std::snprintf(buf, sizeof buf, "[%9.2fs] ", t);
    out_ << buf << msg << '\n';
    out_.flush();
    std::cerr << buf << msg << '\n';
  }

 private:
  std::ofstream out_;
  std::chrono::steady_clock::time_point start_;
};

// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::string out;
  std::optional<double> phi;
  std::optional<double> alpha;
  std::optional<double> mu;
  std::optional<int> n_steps;
};

int cmd_generate(const Common& common, const GenerateArgs& a) {
  ExperimentConfig c = load(common);
  if (a.mu) c.mu = *a.mu;
  if (a.n_steps) c.n_steps = *a.n_steps;
  const bool single = a.phi || a.alpha;
  if (a.phi) c.phi = *a.phi;
  if (a.alpha) c.alpha = *a.alpha;
  c.validate();
  if (a.out.empty()) throw ConfigError("--out is required");
  fs::create_directories(a.out);
  write_text(fs::path(a.out) / "config.toml", to_toml(c));

  if (single) {
    TrajectoryDataset ds = generate(c.run_config());
    write_dataset(ds, a.out);
    std::cout << a.out << '\n';
    return 0;
  }

  const std::vector<RunConfig> grid = c.grid_configs();
  const Split split = make_split(grid);
  std::vector<std::string> labels(grid.size(), "train");
  for (std::size_t i : split.test) labels[i] = "test";

  std::vector<std::string> errors(grid.size());
  const auto n = static_cast<long>(grid.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      TrajectoryDataset ds = generate(grid[k]);
      ds.split = labels[k];
      write_dataset(ds, fs::path(a.out) / run_name(grid[k]));
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  }
  std::string index = "phi,alpha,mu,split,directory\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!errors[i].empty()) throw DataError(run_name(grid[i]) + ": " + errors[i]);
    char buf[160];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%s,%s\n", grid[i].phi_target, grid[i].alpha(),
                  grid[i].mu, labels[i].c_str(), run_name(grid[i]).c_str());
    index += buf;
  }
  write_text(fs::path(a.out) / "grid.csv", index);
  std::cout << grid.size() << " runs (" << split.train.size() << " train, " << split.test.size()
            << " test) in " << a.out << '\n';
  return 0;
}

struct TrainArgs {
  std::string data;
  std::string out;
};

int cmd_train(const Common& common, const TrainArgs& a) {
  ExperimentConfig c = load(common);
  c.validate();
  require_dir(a.data, "--data");
  if (a.out.empty()) throw ConfigError("--out is required");
  const auto data = select_split(load_datasets(a.data), "train");
  if (data.empty()) throw DataError("no training datasets in " + a.data);

  fs::create_directories(a.out);
  write_text(fs::path(a.out) / "config.toml", to_toml(c));
  Log log(fs::path(a.out) / "train.log");
  log("training on " + std::to_string(data.size()) + " trajectories");

  training::TrainOptions opts;
  opts.out_dir = a.out;
  opts.max_steps = c.max_steps;
  opts.on_step = [&](const training::LossRecord& r) {
    if (r.step % 100 == 0) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "step %ld lr %.3e loss %.6e", r.step, r.lr, r.loss);
      log(buf);
    }
  };
  const auto result = training::train(data, c.train, opts);
  log("done after " + std::to_string(result.history.size()) + " steps");
  return 0;
}

struct RolloutArgs {
  std::string checkpoint;
  std::string dataset;
  std::string out;
  int stride = 1;
  double contact_radius = 0.8;
  double cutoff = 0.8;
};

int cmd_rollout(const Common&, const RolloutArgs& a) {
  require_dir(a.checkpoint, "--checkpoint");
  require_dir(a.dataset, "--dataset");
  if (a.out.empty()) throw ConfigError("--out is required");
  if (a.stride < 1) throw ConfigError("--stride must be >= 1");
  if (!(a.contact_radius > 0.0)) throw ConfigError("--contact-radius must be > 0");
  const nn::ModelParameters params = nn::read_checkpoint(a.checkpoint);
  const TrajectoryDataset ds = read_dataset(a.dataset);
  const double r = a.contact_radius * 1e-3;

  fs::create_directories(a.out);
  const fs::path out(a.out);
  const eval::Rollout roll =
      eval::rollout(params, ds.state(0), ds.topology, eval::rollout_config_for(ds, a.stride, r));
  const eval::Evaluation e = eval::evaluate(roll, ds, a.stride, a.cutoff);
  eval::write_rmse_curve(out / "rmse_curve.csv", e.rmse_per_step);
  eval::write_thickness_diff(out / "thickness_diff.csv", e);

  const std::vector<eval::GridEntry> grid = {
      {ds.config.phi_target, ds.config.alpha(), ds.split.empty() ? "test" : ds.split, e.abtc}};
  eval::write_abtc_grid(out / "abtc_grid.csv", grid);

  eval::AblationTable table;
  table.configs = {run_name(ds.config)};
  table.strides = {a.stride};
  table.abtc = {{e.abtc}};
  eval::write_ablation(out / "ablation.csv", table);

  eval::TimingReport timing;
  timing.steps = static_cast<int>(roll.frame_count() - 1);
  timing.node_count = roll.node_count;
  timing.surrogate_seconds = roll.seconds;
  {
    RunConfig gen = ds.config;
    gen.n_steps = timing.steps * a.stride;
    const auto start = std::chrono::steady_clock::now();
    (void)generate(gen);
    timing.generator_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / a.stride;
  }
  eval::write_timing(out / "timing.csv", timing);

  std::printf("abtc_mm2 %.6g\nfinal_rmse_m %.6g\n", e.abtc,
              e.rmse_per_step.empty() ? 0.0 : e.rmse_per_step.back());
  return 0;
}

struct EvaluateArgs {
  std::string checkpoint;
  std::string data;
  std::string out;
  int stride = 1;
  double contact_radius = 0.8;
};

int cmd_evaluate(const Common& common, const EvaluateArgs& a) {
  require_dir(a.checkpoint, "--checkpoint");
  require_dir(a.data, "--data");
  if (a.out.empty()) throw ConfigError("--out is required");
  if (a.stride < 1) throw ConfigError("--stride must be >= 1");
  ExperimentConfig c = load(common);
  c.validate();
  const nn::ModelParameters params = nn::read_checkpoint(a.checkpoint);
  const auto data = load_datasets(a.data);

  // Expected cells: the configured grid, so missing runs show up as absent.
  std::vector<eval::GridEntry> expected;
  const auto configs = c.grid_configs();
  const Split split = make_split(configs);
  std::vector<std::string> labels(configs.size(), "train");
  for (std::size_t i : split.test) labels[i] = "test";
  for (std::size_t i = 0; i < configs.size(); ++i) {
    expected.push_back({configs[i].phi_target, configs[i].alpha(), labels[i], std::nullopt});
  }
  const auto grid = eval::grid_report(params, data, expected, a.stride, a.contact_radius * 1e-3, c.cutoff);
  fs::create_directories(a.out);
  eval::write_abtc_grid(fs::path(a.out) / "abtc_grid.csv", grid);
  std::size_t present = 0;
  for (const auto& g : grid) present += g.abtc ? 1 : 0;
  std::cout << present << " of " << grid.size() << " cells evaluated\n";
  return 0;
}

struct AblateArgs {
  std::string data;
  std::string out;
};

int cmd_ablate(const Common& common, const AblateArgs& a) {
  ExperimentConfig c = load(common);
  c.validate();
  require_dir(a.data, "--data");
  if (a.out.empty()) throw ConfigError("--out is required");
  auto all = load_datasets(a.data);
  std::vector<TrajectoryDataset> train_data;
  std::vector<TrajectoryDataset> test_data;
  for (auto& ds : all) (ds.split == "test" ? test_data : train_data).push_back(std::move(ds));
  if (train_data.empty() || test_data.empty()) {
    throw DataError("ablation needs both train and test datasets in " + a.data);
  }
  fs::create_directories(a.out);
  write_text(fs::path(a.out) / "config.toml", to_toml(c));
  Log log(fs::path(a.out) / "ablate.log");
  training::TrainOptions opts;
  opts.out_dir = a.out;
  opts.max_steps = c.max_steps;
  const auto table = eval::ablate_stride(train_data, test_data, c.train, c.strides, opts, c.cutoff);
  eval::write_ablation(fs::path(a.out) / "ablation.csv", table);
  for (const auto& f : table.failures) log("failed cell: " + f);
  return table.failures.empty() ? 0 : 1;
}

struct AnalyticArgs {
  double da0 = 30.0;
  std::vector<double> da1 = {27.0};
  double s0 = 1.5;
  std::vector<double> alpha = {10.0};
  double mu = 0.05;
  std::string out;
};

int cmd_analytic(const Common&, const AnalyticArgs& a) {
  std::string csv =
      "d_a0,d_a1,s0,alpha,mu,phi,Q,ds_haarscheidt,ds_ebertshauser,ds_albert,ds_storoschew\n";
  for (double d1 : a.da1) {
    for (double al : a.alpha) {
      if (!(al > 0.0 && al < 90.0)) throw ConfigError("alpha must be in (0, 90) degrees");
      if (!(d1 > 0.0 && d1 <= a.da0)) throw ConfigError("da1 must be in (0, da0]");
      const double phi = process::deformation_degree(a.da0, d1);
      const double q = process::diameter_ratio(a.da0 - 2.0 * a.s0, a.da0);
      char buf[512];
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                    a.da0, d1, a.s0, al, a.mu, phi, q,
                    process::predict_haarscheidt(a.da0, d1, a.s0, al),
                    process::predict_ebertshauser(a.da0, d1, a.s0),
                    process::predict_albert(phi, a.s0, a.da0, al) - a.s0,
                    process::predict_storoschew(a.s0, a.da0, d1) - a.s0);
      csv += buf;
    }
  }
  if (a.out.empty()) {
    std::cout << csv;
  } else {
    write_text(a.out, csv);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mesh graph network surrogate for tube nosing"};
  app.require_subcommand(1);
  app.footer("Config keys (file passed with --config; FORGENET_SEED overrides run.seed):\n" +
             config_reference());
  Common common;
  auto add_common = [&](CLI::App* sub, bool with_config) {
    if (with_config) sub->add_option("--config", common.config_path, "Experiment config file");
    sub->add_option("--jobs", common.jobs, "Worker thread cap (0: all cores)");
    sub->footer("Config keys:\n" + config_reference());
  };

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Generate trajectories (grid, or one run with --phi/--alpha)");
  add_common(g, true);
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--phi", gen.phi, "Degree of deformation of a single run");
  g->add_option("--alpha", gen.alpha, "Die half-angle of a single run [deg]");
  g->add_option("--mu", gen.mu, "Friction coefficient");
  g->add_option("--n-steps", gen.n_steps, "Generator steps");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train on the train split of a dataset directory");
  add_common(t, true);
  t->add_option("--data", tr.data, "Dataset directory")->required();
  t->add_option("--out", tr.out, "Output directory")->required();

  RolloutArgs ro;
  auto* r = app.add_subcommand("rollout", "Roll a checkpoint out on one dataset and write all CSVs");
  add_common(r, false);
  r->add_option("--checkpoint", ro.checkpoint, "Checkpoint directory")->required();
  r->add_option("--dataset", ro.dataset, "Reference dataset directory")->required();
  r->add_option("--out", ro.out, "Output directory")->required();
  r->add_option("--stride", ro.stride, "Generator frames per predicted step")->capture_default_str();
  r->add_option("--contact-radius", ro.contact_radius, "Contact radius [mm]")->capture_default_str();
  r->add_option("--cutoff", ro.cutoff, "Relative length window")->capture_default_str();

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "ABTC grid of a checkpoint over a dataset directory");
  add_common(e, true);
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint directory")->required();
  e->add_option("--data", ev.data, "Dataset directory")->required();
  e->add_option("--out", ev.out, "Output directory")->required();
  e->add_option("--stride", ev.stride, "Generator frames per predicted step")->capture_default_str();
  e->add_option("--contact-radius", ev.contact_radius, "Contact radius [mm]")->capture_default_str();

  AblateArgs ab;
  auto* b = app.add_subcommand("ablate", "Train one model per stride and tabulate test ABTC");
  add_common(b, true);
  b->add_option("--data", ab.data, "Dataset directory")->required();
  b->add_option("--out", ab.out, "Output directory")->required();

  AnalyticArgs an;
  auto* n = app.add_subcommand("analytic", "Closed-form thickening predictors as CSV");
  n->add_option("--da0", an.da0, "Initial outer diameter [mm]")->capture_default_str();
  n->add_option("--da1", an.da1, "Final outer diameter(s) [mm]")->delimiter(',')->capture_default_str();
  n->add_option("--s0", an.s0, "Initial wall thickness [mm]")->capture_default_str();
  n->add_option("--alpha", an.alpha, "Die half-angle(s) [deg]")->delimiter(',')->capture_default_str();
  n->add_option("--mu", an.mu, "Friction coefficient (recorded only)")->capture_default_str();
  n->add_option("--out", an.out, "CSV file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  try {
    nn::set_max_threads(common.jobs);
    if (*g) return cmd_generate(common, gen);
    if (*t) return cmd_train(common, tr);
    if (*r) return cmd_rollout(common, ro);
    if (*e) return cmd_evaluate(common, ev);
    if (*b) return cmd_ablate(common, ab);
    if (*n) return cmd_analytic(common, an);
  } catch (const ConfigError& err) {
    std::cerr << "config error: " << err.what() << '\n';
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 0;
}
