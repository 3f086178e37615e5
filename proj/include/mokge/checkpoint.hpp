#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

#include "mokge/optim.hpp"

namespace mokge {

/// Binary parameter file:
///   magic "MOKGECKP", u32 version, u64 metadata length, metadata (JSON text),
///   u64 entry count, then per entry: u32 name length, name, u32 rank,
///   u64 dims[rank], f64 values (host byte order).
struct Checkpoint {
    nlohmann::json metadata;
    std::map<std::string, Tensor> tensors;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params,
                     const nlohmann::json& metadata);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies values from `ckpt` into `params`; names and shapes must match exactly.
void restore_parameters(ParameterSet& params, const Checkpoint& ckpt);

}  // namespace mokge
