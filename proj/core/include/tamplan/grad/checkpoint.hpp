#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "tamplan/grad/parameter.hpp"

namespace tamplan::grad {

// Binary checkpoint layout:
//   8 bytes   magic "TAMCKPT1"
//   u32 LE    format version
//   u64 LE    manifest length in bytes
//   manifest  JSON {"version", "parameters": [{"name", "shape", "offset"}], "metadata"}
//   payload   little-endian float64 values, parameters in manifest order
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ParameterStore store;
  nlohmann::json metadata;
};

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store,
                     const nlohmann::json& metadata = nlohmann::json::object());
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies values from `source` into `target`; names and shapes must match exactly.
void assign_parameters(ParameterStore& target, const ParameterStore& source);

}  // namespace tamplan::grad
