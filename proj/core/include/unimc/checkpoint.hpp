#pragma once

#include <optional>
#include <string>

#include "unimc/model.hpp"

namespace unimc {

// Binary checkpoint: magic bytes, format version, JSON-serialized config,
// then named arrays with shape headers and row-major little-endian 64-bit
// values. load(save(x)) is bit-exact.
void save_checkpoint(const ModelParameters& params, const std::string& path);

// Loads and validates a checkpoint against its embedded config's manifest.
// When expected is given, the embedded config must match it exactly.
ModelParameters load_checkpoint(const std::string& path,
                                const std::optional<ModelConfig>& expected = std::nullopt);

std::string config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const std::string& text);

}  // namespace unimc
