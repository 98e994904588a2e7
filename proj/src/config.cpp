#include "forgenet/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <sstream>

#include "forgenet/errors.hpp"
#include "io_util.hpp"

namespace forgenet {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& raw, const std::string& key) {
  T value{};
  const char* first = raw.data();
  const char* last = raw.data() + raw.size();
  if (!raw.empty() && raw.front() == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || raw.empty()) {
    throw ConfigError(key + ": expected a number, got '" + raw + "'");
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(value)) throw ConfigError(key + ": value must be finite");
  }
  return value;
}

template <typename T>
std::vector<T> parse_list(const std::string& raw, const std::string& key) {
  if (raw.size() < 2 || raw.front() != '[' || raw.back() != ']') {
    throw ConfigError(key + ": expected a list like [1, 2], got '" + raw + "'");
  }
  std::vector<T> out;
  const std::string body = trim(std::string_view(raw).substr(1, raw.size() - 2));
  if (body.empty()) return out;
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<T>(trim(item), key));
  return out;
}

// Shortest text that parses back to the same double.
std::string fmt(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

template <typename T>
std::string fmt_list(const std::vector<T>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    if constexpr (std::is_floating_point_v<T>) {
      s += fmt(v[i]);
    } else {
      s += std::to_string(v[i]);
    }
  }
  return s + "]";
}

struct Key {
  std::string table;
  std::string name;
  std::string help;
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;

  std::string full() const { return table + "." + name; }
};

Key real(const char* table, const char* name, double& field, const char* help) {
  const std::string full = std::string(table) + "." + name;
  return {table, name, help, [&field, full](const std::string& raw) { field = parse_number<double>(raw, full); },
          [&field] { return fmt(field); }};
}

Key integer(const char* table, const char* name, int& field, const char* help) {
  const std::string full = std::string(table) + "." + name;
  return {table, name, help, [&field, full](const std::string& raw) { field = parse_number<int>(raw, full); },
          [&field] { return std::to_string(field); }};
}

Key long_integer(const char* table, const char* name, long& field, const char* help) {
  const std::string full = std::string(table) + "." + name;
  return {table, name, help, [&field, full](const std::string& raw) { field = parse_number<long>(raw, full); },
          [&field] { return std::to_string(field); }};
}

Key unsigned64(const char* table, const char* name, std::uint64_t& field, const char* help) {
  const std::string full = std::string(table) + "." + name;
  return {table, name, help,
          [&field, full](const std::string& raw) { field = parse_number<std::uint64_t>(raw, full); },
          [&field] { return std::to_string(field); }};
}

template <typename T>
Key list(const char* table, const char* name, std::vector<T>& field, const char* help) {
  const std::string full = std::string(table) + "." + name;
  return {table, name, help, [&field, full](const std::string& raw) { field = parse_list<T>(raw, full); },
          [&field] { return fmt_list(field); }};
}

std::vector<Key> registry(ExperimentConfig& c) {
  training::TrainConfig& t = c.train;
  return {
      real("tube", "d_a0", c.tube.d_a0, "initial outer diameter [mm]"),
      real("tube", "s0", c.tube.s0, "initial wall thickness [mm]"),
      real("tube", "length", c.tube.length, "tube section length [mm]"),
      real("tube", "element_size", c.tube.element_size, "mesh element size [mm]"),
      real("run", "phi", c.phi, "degree of deformation for single runs"),
      real("run", "alpha", c.alpha, "die half-angle for single runs [deg]"),
      real("run", "mu", c.mu, "Coulomb friction coefficient"),
      real("run", "stamp_speed", c.stamp_speed, "stamp speed [mm/s]"),
      real("run", "dt", c.dt, "time step [s]"),
      integer("run", "n_steps", c.n_steps, "generator steps per trajectory"),
      unsigned64("run", "seed", c.seed, "seed for generation and training (FORGENET_SEED overrides)"),
      real("run", "rounding_radius", c.die.rounding_radius, "die rounding radius [mm]"),
      real("run", "calibration_length", c.die.calibration_length, "die calibration length [mm]"),
      real("run", "entry_length", c.die.entry_length, "die entry cylinder length [mm]"),
      integer("net", "hidden_dim", t.net.hidden_dim, "latent width of every MLP"),
      integer("net", "n_hidden_layers", t.net.n_hidden_layers, "hidden Linear+ReLU layers per MLP"),
      integer("net", "message_passing_steps", t.net.message_passing_steps, "processor blocks k"),
      integer("train", "epochs", t.epochs, "training epochs"),
      integer("train", "batch_size", t.batch_size, "graphs per optimizer step"),
      real("train", "lr_start", t.lr_start, "initial learning rate"),
      real("train", "lr_end", t.lr_end, "final learning rate (exponential decay)"),
      real("train", "noise_factor", t.noise_factor, "noise std as a multiple of |mean displacement|"),
      real("train", "contact_radius", t.contact_radius, "contact edge radius [mm]"),
      integer("train", "step_stride", t.step_stride, "frames skipped per predicted step"),
      integer("train", "checkpoint_every", t.checkpoint_every, "checkpoint interval in steps (0: final only)"),
      long_integer("train", "max_steps", c.max_steps, "cap on optimizer steps (0: none)"),
      real("eval", "cutoff", c.cutoff, "relative tube length evaluated"),
      list("eval", "strides", c.strides, "strides compared by the ablation"),
      list("grid", "phi", c.grid_phi, "phi axis of a custom grid (empty: nosing table)"),
      list("grid", "alpha", c.grid_alpha, "alpha axis of a custom grid [deg]"),
  };
}

}  // namespace

RunConfig ExperimentConfig::run_config() const { return run_config(phi, alpha); }

RunConfig ExperimentConfig::run_config(double phi_value, double alpha_value) const {
  RunConfig r = make_run_config(tube, phi_value, alpha_value, mu, n_steps, seed);
  r.die.rounding_radius = die.rounding_radius;
  r.die.calibration_length = die.calibration_length;
  r.die.entry_length = die.entry_length;
  r.stamp_speed = stamp_speed;
  r.dt = dt;
  return r;
}

std::vector<RunConfig> ExperimentConfig::grid_configs() const {
  std::vector<RunConfig> out;
  if (grid_phi.empty() && grid_alpha.empty()) {
    for (const GridCell& cell : nosing_table_cells()) out.push_back(run_config(cell.phi, cell.alpha));
  } else {
    for (double p : grid_phi) {
      for (double a : grid_alpha) out.push_back(run_config(p, a));
    }
  }
  return out;
}

void ExperimentConfig::validate() const {
  auto wrap = [](const std::string& key, auto&& fn) {
    try {
      fn();
    } catch (const ConfigError& e) {
      throw ConfigError(key + ": " + e.what());
    }
  };
  if (!(alpha > 0.0 && alpha < 90.0)) throw ConfigError("run.alpha: must be in (0, 90) degrees");
  if (!(phi > 0.0)) throw ConfigError("run.phi: must be > 0");
  wrap("run", [&] { run_config().validate(); });
  wrap("train", [&] { train.validate(); });
  if (max_steps < 0) throw ConfigError("train.max_steps: must be >= 0");
  if (!(cutoff > 0.0 && cutoff <= 1.0)) throw ConfigError("eval.cutoff: must be in (0, 1]");
  if (strides.empty()) throw ConfigError("eval.strides: must not be empty");
  for (int s : strides) {
    if (s < 1) throw ConfigError("eval.strides: every stride must be >= 1");
  }
  if (grid_phi.empty() != grid_alpha.empty()) {
    throw ConfigError("grid.phi / grid.alpha: give both axes or neither");
  }
  for (double a : grid_alpha) {
    if (!(a > 0.0 && a < 90.0)) throw ConfigError("grid.alpha: must be in (0, 90) degrees");
  }
  for (double p : grid_phi) {
    if (!(p > 0.0)) throw ConfigError("grid.phi: must be > 0");
  }
  wrap("grid", [&] {
    for (const RunConfig& r : grid_configs()) r.validate();
  });
}

ExperimentConfig parse_config(const std::string& text, ExperimentConfig base) {
  ExperimentConfig c = base;
  const auto keys = registry(c);
  std::istringstream in(text);
  std::string line;
  std::string table;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string where = "line " + std::to_string(number) + ": ";
    const auto hash = line.find('#');
    const std::string content = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (content.empty()) continue;
    if (content.front() == '[' && content.back() == ']' && content.find('=') == std::string::npos) {
      table = trim(std::string_view(content).substr(1, content.size() - 2));
      bool known = false;
      for (const Key& k : keys) known = known || k.table == table;
      if (!known) throw ConfigError(where + "unknown table [" + table + "]");
      continue;
    }
    const auto eq = content.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string name = trim(std::string_view(content).substr(0, eq));
    const std::string value = trim(std::string_view(content).substr(eq + 1));
    if (table.empty()) throw ConfigError(where + "key '" + name + "' outside a table");
    const Key* match = nullptr;
    for (const Key& k : keys) {
      if (k.table == table && k.name == name) match = &k;
    }
    if (!match) throw ConfigError(where + "unknown key " + table + "." + name);
    try {
      match->set(value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::vector<unsigned char> bytes;
  try {
    bytes = io::read_bytes(path);
  } catch (const DataError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return parse_config(std::string(bytes.begin(), bytes.end()));
}

void apply_environment(ExperimentConfig& config) {
  if (const char* env = std::getenv("FORGENET_SEED"); env && *env) {
    config.seed = parse_number<std::uint64_t>(trim(env), "FORGENET_SEED");
  }
  config.train.seed = config.seed;
}

std::string to_toml(const ExperimentConfig& config) {
  ExperimentConfig copy = config;
  const auto keys = registry(copy);
  std::string out;
  std::string table;
  for (const Key& k : keys) {
    if (k.table != table) {
      if (!table.empty()) out += "\n";
      table = k.table;
      out += "[" + table + "]\n";
    }
    out += k.name + " = " + k.get() + "\n";
  }
  return out;
}

std::string config_reference() {
  ExperimentConfig defaults;
  const auto keys = registry(defaults);
  std::string out;
  for (const Key& k : keys) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "  %-28s %-22s %s\n", k.full().c_str(), k.get().c_str(), k.help.c_str());
    out += buf;
  }
  return out;
}

}  // namespace forgenet
