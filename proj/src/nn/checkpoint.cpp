#include "forgenet/nn/checkpoint.hpp"

#include "json.hpp"

#include "forgenet/errors.hpp"
#include "../io_util.hpp"

namespace forgenet::nn {

namespace {

using json = nlohmann::json;

json standardizer_to_json(const Standardizer& s) { return {{"mean", s.mean}, {"std", s.std}}; }

Standardizer standardizer_from_json(const json& j, int dim) {
  Standardizer s{j.at("mean").get<std::vector<double>>(), j.at("std").get<std::vector<double>>()};
  try {
    s.validate(dim);
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint statistics: ") + e.what());
  }
  return s;
}

}  // namespace

void write_checkpoint(const ModelParameters& params, const std::filesystem::path& dir) {
  const ParameterLayout layout = params.layout();
  if (params.values.size() != layout.size()) throw ConfigError("parameter vector size mismatch");
  io::ensure_directory(dir);

  std::vector<unsigned char> bytes;
  bytes.reserve(params.values.size() * sizeof(double));
  for (double v : params.values) io::append_le(bytes, v);

  json tensors = json::array();
  for (const auto& t : layout.tensors()) {
    tensors.push_back({{"name", t.name}, {"offset", t.offset}, {"size", t.size}});
  }
  const NormalizationStats& st = params.stats;
  json manifest = {
      {"format", "forgenet-checkpoint"},
      {"format_version", kCheckpointFormatVersion},
      {"spec",
       {{"hidden_dim", params.spec.hidden_dim},
        {"n_hidden_layers", params.spec.n_hidden_layers},
        {"message_passing_steps", params.spec.message_passing_steps}}},
      {"features",
       {{"node", "one-hot(tube, die, stamp), x, z"},
        {"edge_tube", "dx, dz, dist"},
        {"edge_die", "dx, dz, dist, mu"},
        {"edge_stamp", "dx, dz, dist, mu"},
        {"output", "normalized dx, dz"}}},
      {"stats",
       {{"node", standardizer_to_json(st.node)},
        {"edge_tube", standardizer_to_json(st.edge[static_cast<int>(EdgeType::Tube)])},
        {"edge_die", standardizer_to_json(st.edge[static_cast<int>(EdgeType::Die)])},
        {"edge_stamp", standardizer_to_json(st.edge[static_cast<int>(EdgeType::Stamp)])},
        {"target", standardizer_to_json(st.target)}}},
      {"parameter_count", layout.size()},
      {"params_file", "params.bin"},
      {"params_layout", "float64 little-endian, tensors in table order"},
      {"tensors", tensors},
      {"checksum_crc32", io::crc32_hex(bytes)},
  };
  io::write_bytes(dir / "params.bin", bytes.data(), bytes.size());
  io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

ModelParameters read_checkpoint(const std::filesystem::path& dir) {
  const auto raw = io::read_bytes(dir / "manifest.json");
  const json manifest = json::parse(raw.begin(), raw.end(), nullptr, false);
  if (manifest.is_discarded()) throw DataError("checkpoint manifest.json is not valid JSON");

  ModelParameters p;
  std::string checksum;
  std::size_t count = 0;
  try {
    if (manifest.at("format_version").get<int>() != kCheckpointFormatVersion) {
      throw DataError("unsupported checkpoint format version");
    }
    const json& s = manifest.at("spec");
    p.spec.hidden_dim = s.at("hidden_dim");
    p.spec.n_hidden_layers = s.at("n_hidden_layers");
    p.spec.message_passing_steps = s.at("message_passing_steps");
    const json& st = manifest.at("stats");
    p.stats.node = standardizer_from_json(st.at("node"), kNodeFeatures);
    p.stats.edge[static_cast<int>(EdgeType::Tube)] =
        standardizer_from_json(st.at("edge_tube"), kTubeEdgeFeatures);
    p.stats.edge[static_cast<int>(EdgeType::Die)] =
        standardizer_from_json(st.at("edge_die"), kContactEdgeFeatures);
    p.stats.edge[static_cast<int>(EdgeType::Stamp)] =
        standardizer_from_json(st.at("edge_stamp"), kContactEdgeFeatures);
    p.stats.target = standardizer_from_json(st.at("target"), kOutputDim);
    count = manifest.at("parameter_count");
    checksum = manifest.at("checksum_crc32");
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint manifest: ") + e.what());
  }
  std::size_t expected = 0;
  try {
    expected = parameter_count(p.spec);
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint spec: ") + e.what());
  }
  if (count != expected) throw DataError("checkpoint parameter count disagrees with its spec");

  const auto bytes = io::read_bytes(dir / "params.bin");
  if (bytes.size() != expected * sizeof(double)) {
    throw DataError("params.bin is corrupt: expected " + std::to_string(expected * sizeof(double)) +
                    " bytes, found " + std::to_string(bytes.size()));
  }
  if (io::crc32_hex(bytes) != checksum) throw DataError("params.bin checksum mismatch");
  p.values.resize(expected);
  for (std::size_t i = 0; i < expected; ++i) p.values[i] = io::decode_le(&bytes[8 * i]);
  return p;
}

}  // namespace forgenet::nn
