#include "forgenet/synth_forge.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

#include "forgenet/errors.hpp"
#include "io_util.hpp"

namespace forgenet {

namespace {

constexpr double kMm = 1e-3;
constexpr double kSeedJitter = 1e-8;  // m
// A ring counts as reduced once the die has pushed it this far inside its
// initial radius; clamping jittered nodes onto the entry cylinder stays below.
constexpr double kReducedTol = 1e-7;  // m

void validate_tube(const TubeSpec& t) {
  for (double v : {t.d_a0, t.s0, t.length, t.element_size}) {
    if (!std::isfinite(v) || v <= 0.0) throw ConfigError("tube dimensions must be positive");
  }
  if (!(t.d_a0 > 2.0 * t.s0)) throw ConfigError("tube s0 must be below the outer radius");
}

}  // namespace

void RunConfig::validate() const {
  validate_tube(tube);
  die.validate();
  if (n_steps < 1) throw ConfigError("n_steps must be >= 1");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be positive");
  if (!(stamp_speed > 0.0) || !std::isfinite(stamp_speed)) {
    throw ConfigError("stamp_speed must be positive");
  }
  if (!(mu >= 0.0) || !std::isfinite(mu)) throw ConfigError("mu must be non-negative");
  if (!(phi_target >= 0.0) || !std::isfinite(phi_target)) {
    throw ConfigError("phi must be non-negative");
  }
  const double expected = 0.5 * tube.d_a0 * std::exp(-0.5 * phi_target);
  if (std::abs(die.reduction_radius - expected) > 1e-9 * expected) {
    throw ConfigError("die reduction_radius inconsistent with phi");
  }
  if (die.entry_radius < 0.5 * tube.d_a0) {
    throw ConfigError("die entry_radius below the tube outer radius: tube cannot enter the die");
  }
}

RunConfig make_run_config(const TubeSpec& tube, double phi, double alpha_deg, double mu,
                          int n_steps, std::uint64_t seed) {
  RunConfig c;
  c.tube = tube;
  c.phi_target = phi;
  c.mu = mu;
  c.n_steps = n_steps;
  c.seed = seed;
  c.die.entry_radius = 0.5 * tube.d_a0;
  c.die.reduction_radius = 0.5 * tube.d_a0 * std::exp(-0.5 * phi);
  c.die.half_angle = alpha_deg;
  return c;
}

MeshState TrajectoryDataset::state(std::size_t t) const {
  const auto f = frame(t);
  return {std::vector<Vec2>(f.begin(), f.end()), kinds};
}

TubeMesh initial_scene(const RunConfig& config) {
  const auto& t = config.tube;
  TubeMesh tube = build_tube_mesh(t.d_a0, t.s0, t.length, t.element_size);
  MeshState die = build_die_mesh(config.die, t.element_size);
  MeshState stamp = build_stamp_mesh(tube, t.element_size);
  TubeMesh scene = assemble_scene(tube, die, stamp);
  for (Vec2& p : scene.state.positions) p.z += kSceneAxialOrigin;
  return scene;
}

double tube_section_area(std::span<const Vec2> p, const Topology& topo) {
  double area = 0.0;
  for (std::size_t r = 0; r + 1 < topo.tube_rows; ++r) {
    for (std::size_t c = 0; c + 1 < topo.tube_cols; ++c) {
      const Vec2 q[4] = {p[topo.tube_node(r, c)], p[topo.tube_node(r, c + 1)],
                         p[topo.tube_node(r + 1, c + 1)], p[topo.tube_node(r + 1, c)]};
      double twice = 0.0;
      for (int k = 0; k < 4; ++k) {
        const Vec2 a = q[k];
        const Vec2 b = q[(k + 1) % 4];
        twice += a.x * b.z - b.x * a.z;
      }
      area += 0.5 * std::abs(twice);
    }
  }
  return area;
}

TrajectoryDataset generate(const RunConfig& config) {
  config.validate();
  TubeMesh scene = initial_scene(config);
  const Topology& topo = scene.topology;
  const DieContour contour(config.die);
  const std::size_t rows = topo.tube_rows;
  const std::size_t cols = topo.tube_cols;
  const std::size_t outer = cols - 1;

  std::vector<Vec2> pos = scene.state.positions;
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> jitter(-kSeedJitter, kSeedJitter);
  for (std::size_t i = topo.tube.begin; i < topo.tube.end; ++i) {
    pos[i].x += jitter(rng);
    pos[i].z += jitter(rng);
  }

  // Per-ring reference: initial outer radius and each node's initial offset
  // from the outer surface.
  std::vector<double> ring_r0(rows);
  std::vector<double> offset0(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    ring_r0[r] = pos[topo.tube_node(r, outer)].x;
    for (std::size_t c = 0; c < cols; ++c) {
      offset0[r * cols + c] = ring_r0[r] - pos[topo.tube_node(r, c)].x;
    }
  }

  TrajectoryDataset ds;
  ds.config = config;
  ds.topology = topo;
  ds.kinds = scene.state.kinds;
  ds.frames.reserve(pos.size() * static_cast<std::size_t>(config.n_steps + 1));
  ds.frames.insert(ds.frames.end(), pos.begin(), pos.end());

  const double feed = config.feed_per_step();
  const double attenuated = feed / (1.0 + config.mu);
  for (int step = 0; step < config.n_steps; ++step) {
    for (std::size_t r = 0; r < rows; ++r) {
      const bool reduced = pos[topo.tube_node(r, outer)].x < ring_r0[r] - kReducedTol;
      const double dz = reduced ? attenuated : feed;
      for (std::size_t c = 0; c < cols; ++c) pos[topo.tube_node(r, c)].z -= dz;
    }
    for (std::size_t i = topo.tube.begin; i < topo.tube.end; ++i) {
      pos[i].x = std::min(pos[i].x, contour.radius_at(pos[i].z - kSceneAxialOrigin));
    }
    for (std::size_t r = 0; r < rows; ++r) {
      const double x_outer = pos[topo.tube_node(r, outer)].x;
      if (!(x_outer < ring_r0[r] - kReducedTol)) continue;
      const double factor = std::sqrt(ring_r0[r] / x_outer);
      for (std::size_t c = 0; c < outer; ++c) {
        pos[topo.tube_node(r, c)].x = x_outer - offset0[r * cols + c] * factor;
      }
    }
    for (std::size_t i = topo.stamp.begin; i < topo.stamp.end; ++i) pos[i].z -= feed;
    ds.frames.insert(ds.frames.end(), pos.begin(), pos.end());
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

using nlohmann::json;

json tube_to_json(const TubeSpec& t) {
  return {{"d_a0", t.d_a0}, {"s0", t.s0}, {"length", t.length}, {"element_size", t.element_size}};
}

json die_to_json(const DieGeometry& d) {
  return {{"entry_radius", d.entry_radius},
          {"reduction_radius", d.reduction_radius},
          {"half_angle", d.half_angle},
          {"rounding_radius", d.rounding_radius},
          {"calibration_length", d.calibration_length},
          {"entry_length", d.entry_length}};
}

json config_to_json(const RunConfig& c) {
  return {{"tube", tube_to_json(c.tube)},
          {"die", die_to_json(c.die)},
          {"phi", c.phi_target},
          {"mu", c.mu},
          {"stamp_speed", c.stamp_speed},
          {"dt", c.dt},
          {"n_steps", c.n_steps},
          {"seed", c.seed}};
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  const auto& t = j.at("tube");
  c.tube = {t.at("d_a0"), t.at("s0"), t.at("length"), t.at("element_size")};
  const auto& d = j.at("die");
  c.die.entry_radius = d.at("entry_radius");
  c.die.reduction_radius = d.at("reduction_radius");
  c.die.half_angle = d.at("half_angle");
  c.die.rounding_radius = d.at("rounding_radius");
  c.die.calibration_length = d.at("calibration_length");
  c.die.entry_length = d.at("entry_length");
  c.phi_target = j.at("phi");
  c.mu = j.at("mu");
  c.stamp_speed = j.at("stamp_speed");
  c.dt = j.at("dt");
  c.n_steps = j.at("n_steps");
  c.seed = j.at("seed");
  return c;
}

json range_to_json(const IndexRange& r) { return json::array({r.begin, r.end}); }
IndexRange range_from_json(const json& j) { return {j.at(0), j.at(1)}; }

}  // namespace

void write_dataset(const TrajectoryDataset& ds, const std::filesystem::path& dir) {
  io::ensure_directory(dir);

  std::vector<unsigned char> bytes;
  bytes.reserve(ds.frames.size() * 2 * sizeof(double));
  for (const Vec2& v : ds.frames) {
    io::append_le(bytes, v.x);
    io::append_le(bytes, v.z);
  }
  json edges = json::array();
  for (const Edge& e : ds.topology.tube_edges) edges.push_back({e.src, e.dst});
  json kinds = json::array();
  for (NodeKind k : ds.kinds) kinds.push_back(static_cast<int>(k));

  json manifest = {
      {"format", "forgenet-trajectory"},
      {"format_version", kDatasetFormatVersion},
      {"config", config_to_json(ds.config)},
      {"n_frames", ds.frame_count()},
      {"n_nodes", ds.node_count()},
      {"kinds", kinds},
      {"topology",
       {{"node_count", ds.topology.node_count},
        {"tube", range_to_json(ds.topology.tube)},
        {"die", range_to_json(ds.topology.die)},
        {"stamp", range_to_json(ds.topology.stamp)},
        {"tube_rows", ds.topology.tube_rows},
        {"tube_cols", ds.topology.tube_cols},
        {"tube_edges", edges}}},
      {"split", ds.split},
      {"frames_file", "frames.bin"},
      {"frames_layout", "float64 little-endian [n_frames, n_nodes, 2] (x, z)"},
      {"checksum_crc32", io::crc32_hex(bytes)},
  };
  io::write_bytes(dir / "frames.bin", bytes.data(), bytes.size());
  const std::string text = manifest.dump(2) + "\n";
  io::write_bytes(dir / "manifest.json", text.data(), text.size());
}

TrajectoryDataset read_dataset(const std::filesystem::path& dir) {
  json manifest;
  {
    const auto raw = io::read_bytes(dir / "manifest.json");
    manifest = json::parse(raw.begin(), raw.end(), nullptr, false);
    if (manifest.is_discarded()) throw DataError("manifest.json is not valid JSON");
  }
  TrajectoryDataset ds;
  std::size_t n_frames = 0;
  std::size_t n_nodes = 0;
  std::string checksum;
  try {
    n_frames = manifest.at("n_frames");
    n_nodes = manifest.at("n_nodes");
    checksum = manifest.at("checksum_crc32").get<std::string>();
    if (manifest.at("format_version").get<int>() != kDatasetFormatVersion) {
      throw DataError("unsupported dataset format version");
    }
    ds.config = config_from_json(manifest.at("config"));
    ds.split = manifest.value("split", "");
    for (int k : manifest.at("kinds")) {
      if (k < 0 || k >= kNodeKindCount) throw DataError("invalid node kind in manifest");
      ds.kinds.push_back(static_cast<NodeKind>(k));
    }
    const auto& t = manifest.at("topology");
    ds.topology.node_count = t.at("node_count");
    ds.topology.tube = range_from_json(t.at("tube"));
    ds.topology.die = range_from_json(t.at("die"));
    ds.topology.stamp = range_from_json(t.at("stamp"));
    ds.topology.tube_rows = t.at("tube_rows");
    ds.topology.tube_cols = t.at("tube_cols");
    for (const auto& e : t.at("tube_edges")) {
      ds.topology.tube_edges.push_back({e.at(0).get<std::uint32_t>(), e.at(1).get<std::uint32_t>()});
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  }

  if (n_nodes != ds.kinds.size() || n_nodes != ds.topology.node_count) {
    throw DataError("manifest node counts disagree");
  }
  if (n_frames != static_cast<std::size_t>(ds.config.n_steps) + 1) {
    throw DataError("manifest n_steps disagrees with the frame count");
  }
  for (const Edge& e : ds.topology.tube_edges) {
    if (!ds.topology.tube.contains(e.src) || !ds.topology.tube.contains(e.dst)) {
      throw DataError("tube edge references a non-tube node");
    }
  }

  const auto bytes = io::read_bytes(dir / "frames.bin");
  const std::size_t expected = n_frames * n_nodes * 2 * sizeof(double);
  if (bytes.size() != expected) {
    throw DataError("frames.bin is corrupt: expected " + std::to_string(expected) +
                    " bytes, found " + std::to_string(bytes.size()));
  }
  if (io::crc32_hex(bytes) != checksum) {
    throw DataError("frames.bin checksum mismatch");
  }
  ds.frames.resize(n_frames * n_nodes);
  for (std::size_t i = 0; i < ds.frames.size(); ++i) {
    ds.frames[i] = {io::decode_le(&bytes[16 * i]), io::decode_le(&bytes[16 * i + 8])};
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Splits

std::vector<GridCell> nosing_table_cells() {
  const double alphas[] = {5.0, 7.5, 10.0, 12.5, 15.0, 17.5, 20.0, 22.5, 25.0};
  // Number of leading alpha columns performed per phi row, and the first
  // performed column (the phi = 0.35 row starts at 7.5 deg).
  struct Row { double phi; int first; int last; };
  const Row rows[] = {{0.05, 0, 8}, {0.10, 0, 8}, {0.15, 0, 8}, {0.20, 0, 8},
                      {0.25, 0, 6}, {0.30, 0, 3}, {0.35, 1, 2}};
  std::vector<GridCell> cells;
  for (const Row& r : rows) {
    for (int a = r.first; a <= r.last; ++a) cells.push_back({r.phi, alphas[a]});
  }
  return cells;
}

std::vector<GridCell> nosing_table_test_cells() {
  return {{0.10, 17.5}, {0.10, 22.5}, {0.15, 10.0}, {0.15, 15.0}, {0.15, 20.0},
          {0.20, 5.0},  {0.20, 12.5}, {0.25, 10.0}, {0.35, 7.5}};
}

namespace {

bool same(double a, double b) { return std::abs(a - b) < 1e-9; }

bool contains_cell(const std::vector<GridCell>& cells, double phi, double alpha) {
  return std::any_of(cells.begin(), cells.end(),
                     [&](const GridCell& c) { return same(c.phi, phi) && same(c.alpha, alpha); });
}

}  // namespace

Split make_split(std::span<const RunConfig> grid) {
  if (grid.size() < 2) throw ConfigError("split needs at least 2 configurations");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t j = i + 1; j < grid.size(); ++j) {
      if (same(grid[i].phi_target, grid[j].phi_target) &&
          same(grid[i].alpha(), grid[j].alpha()) && same(grid[i].mu, grid[j].mu)) {
        throw ConfigError("duplicate configuration in grid");
      }
    }
  }

  std::vector<bool> held(grid.size(), false);

  // The nosing table reproduces its own held-out cells.
  const auto table = nosing_table_cells();
  const bool is_table = grid.size() == table.size() &&
                        std::all_of(grid.begin(), grid.end(), [&](const RunConfig& c) {
                          return same(c.mu, grid.front().mu) &&
                                 contains_cell(table, c.phi_target, c.alpha());
                        });
  if (is_table) {
    const auto test = nosing_table_test_cells();
    for (std::size_t i = 0; i < grid.size(); ++i) {
      held[i] = contains_cell(test, grid[i].phi_target, grid[i].alpha());
    }
  } else {
    std::set<double> phis;
    std::set<double> alphas;
    for (const auto& c : grid) {
      phis.insert(c.phi_target);
      alphas.insert(c.alpha());
    }
    const std::vector<double> phi_axis(phis.begin(), phis.end());
    const std::vector<double> alpha_axis(alphas.begin(), alphas.end());
    auto find = [&](double phi, double alpha) -> std::ptrdiff_t {
      for (std::size_t i = 0; i < grid.size(); ++i) {
        if (same(grid[i].phi_target, phi) && same(grid[i].alpha(), alpha)) {
          return static_cast<std::ptrdiff_t>(i);
        }
      }
      return -1;
    };
    if (phi_axis.size() >= 3 && alpha_axis.size() >= 3) {
      const std::size_t inner_cols = alpha_axis.size() - 2;
      for (std::size_t row = 1; row + 1 < phi_axis.size(); ++row) {
        const std::size_t col = 1 + (row - 1) % inner_cols;
        const auto idx = find(phi_axis[row], alpha_axis[col]);
        if (idx >= 0) held[static_cast<std::size_t>(idx)] = true;
      }
    }
    if (std::none_of(held.begin(), held.end(), [](bool b) { return b; })) {
      // No interior cell: hold out the last non-corner config, else the last.
      auto is_corner = [&](const RunConfig& c) {
        return (same(c.phi_target, phi_axis.front()) || same(c.phi_target, phi_axis.back())) &&
               (same(c.alpha(), alpha_axis.front()) || same(c.alpha(), alpha_axis.back()));
      };
      std::size_t pick = grid.size() - 1;
      for (std::size_t i = grid.size(); i-- > 0;) {
        if (!is_corner(grid[i])) {
          pick = i;
          break;
        }
      }
      held[pick] = true;
    }
  }

  Split split;
  for (std::size_t i = 0; i < grid.size(); ++i) (held[i] ? split.test : split.train).push_back(i);
  if (split.train.empty()) throw ConfigError("grid too small to hold out a test config");
  return split;
}

}  // namespace forgenet
