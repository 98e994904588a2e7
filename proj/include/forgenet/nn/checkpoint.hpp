#pragma once

// Model checkpoint: manifest.json (network spec, feature layout,
// normalization statistics, tensor table) and params.bin (little-endian
// float64 in ParameterLayout order).

#include <filesystem>

#include "forgenet/nn/network.hpp"

namespace forgenet::nn {

inline constexpr int kCheckpointFormatVersion = 1;

void write_checkpoint(const ModelParameters& params, const std::filesystem::path& dir);

// Throws DataError on version, size or checksum mismatch.
ModelParameters read_checkpoint(const std::filesystem::path& dir);

}  // namespace forgenet::nn
