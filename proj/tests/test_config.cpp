#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "forgenet/config.hpp"
#include "forgenet/errors.hpp"

using namespace forgenet;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

std::string validate_error(const ExperimentConfig& c) {
  try {
    c.validate();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

}  // namespace

TEST_CASE("defaults validate") {
  const ExperimentConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.grid_configs().size() == 49);
  const RunConfig r = c.run_config();
  CHECK(r.n_steps == 400);
  CHECK(r.feed_per_step() == doctest::Approx(1.5e-5).epsilon(1e-12));
}

TEST_CASE("parse tables, lists and comments") {
  const ExperimentConfig c = parse_config(R"(
# experiment
[tube]
d_a0 = 40    # mm
s0 = 2

[run]
alpha = 12.5
seed = 17

[train]
epochs = 3
noise_factor = 0.0

[eval]
strides = [1, 3]

[grid]
phi = [0.2, 0.3]
alpha = [10]
)");
  CHECK(c.tube.d_a0 == 40.0);
  CHECK(c.tube.s0 == 2.0);
  CHECK(c.tube.length == 15.6);
  CHECK(c.alpha == 12.5);
  CHECK(c.seed == 17);
  CHECK(c.train.epochs == 3);
  CHECK(c.train.noise_factor == 0.0);
  CHECK(c.strides == std::vector<int>{1, 3});
  CHECK(c.grid_configs().size() == 2);
  CHECK(c.grid_configs()[1].phi_target == 0.3);
}

TEST_CASE("errors carry line numbers and key names") {
  CHECK(contains(error_of("[tube]\nd_a0 = 30\n[solver]\n"), "line 3: unknown table [solver]"));
  CHECK(contains(error_of("[run]\nphi = 0.2\nbeta = 1\n"), "line 3: unknown key run.beta"));
  CHECK(contains(error_of("[run]\nalpha = ten\n"), "line 2: run.alpha: expected a number"));
  CHECK(contains(error_of("[train]\nepochs = 2.5\n"), "train.epochs"));
  CHECK(contains(error_of("phi = 0.2\n"), "line 1: key 'phi' outside a table"));
  CHECK(contains(error_of("[run]\nphi\n"), "line 2: expected 'key = value'"));
  CHECK(contains(error_of("[eval]\nstrides = 1, 2\n"), "eval.strides: expected a list"));
  CHECK(contains(error_of("[run]\nphi = inf\n"), "run.phi"));
}

TEST_CASE("to_toml round trips every key") {
  ExperimentConfig c;
  c.tube.d_a0 = 31.7;
  c.phi = 0.1 + 0.2;
  c.mu = 0.0;
  c.seed = 123456789012345ull;
  c.train.lr_start = 3e-4;
  c.max_steps = 99;
  c.strides = {1, 7};
  c.grid_phi = {0.15, 1.0 / 3.0};
  c.grid_alpha = {10.0};
  const std::string text = to_toml(c);
  const ExperimentConfig back = parse_config(text);
  CHECK(back.tube.d_a0 == c.tube.d_a0);
  CHECK(back.phi == c.phi);
  CHECK(back.mu == 0.0);
  CHECK(back.seed == c.seed);
  CHECK(back.train.lr_start == c.train.lr_start);
  CHECK(back.max_steps == 99);
  CHECK(back.strides == c.strides);
  CHECK(back.grid_phi == c.grid_phi);
  CHECK(to_toml(back) == text);
  CHECK(contains(config_reference(), "train.noise_factor"));
}

TEST_CASE("validate names the offending key") {
  ExperimentConfig c;
  c.alpha = 95.0;
  CHECK(contains(validate_error(c), "run.alpha"));
  c = {};
  c.cutoff = 1.5;
  CHECK(contains(validate_error(c), "eval.cutoff"));
  c = {};
  c.strides = {1, 0};
  CHECK(contains(validate_error(c), "eval.strides"));
  c = {};
  c.grid_phi = {0.2};
  CHECK(contains(validate_error(c), "grid.phi"));
  c = {};
  c.train.batch_size = 0;
  CHECK(contains(validate_error(c), "train"));
  c = {};
  c.tube.s0 = 20.0;
  CHECK(contains(validate_error(c), "run"));
}

TEST_CASE("FORGENET_SEED overrides the file seed") {
  ExperimentConfig c = parse_config("[run]\nseed = 5\n");
  ::unsetenv("FORGENET_SEED");
  apply_environment(c);
  CHECK(c.seed == 5);
  CHECK(c.train.seed == 5);
  ::setenv("FORGENET_SEED", "42", 1);
  apply_environment(c);
  CHECK(c.seed == 42);
  CHECK(c.train.seed == 42);
  ::setenv("FORGENET_SEED", "abc", 1);
  CHECK_THROWS_AS(apply_environment(c), ConfigError);
  ::unsetenv("FORGENET_SEED");
}

TEST_CASE("load_config reads files") {
  const auto path = std::filesystem::temp_directory_path() / "forgenet_test_config.toml";
  {
    std::ofstream out(path);
    out << "[run]\nn_steps = 12\n";
  }
  CHECK(load_config(path).n_steps == 12);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_config(path), ConfigError);
}
