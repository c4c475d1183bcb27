#pragma once

#include <string>

#include "json.hpp"

#include "eager/nn/optim.hpp"

namespace eager::nn {

// Checkpoint file: 8-byte magic, u32 version, u64 header length, JSON header
// (meta + array names/shapes in order), then raw little-endian doubles.
// Round-trips are bit-identical.
void save_checkpoint(const std::string& path, const ParamSet& params,
                     const nlohmann::json& meta);

// Loads values into `params` (which must already have matching names/shapes)
// and returns the stored meta block.
nlohmann::json load_checkpoint(const std::string& path, ParamSet& params);

// Reads only the meta block (for reconstructing model config before
// building the ParamSet).
nlohmann::json read_checkpoint_meta(const std::string& path);

}  // namespace eager::nn
