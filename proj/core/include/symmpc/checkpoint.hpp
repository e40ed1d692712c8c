#pragma once

#include <filesystem>

#include "symmpc/config.hpp"
#include "symmpc/layers.hpp"

namespace symmpc::diff {

// Binary little-endian container: "SYMC" magic, u32 version, u32 entry count,
// then per entry [u16 name length][name][u8 rank][u32 dims...][f64 payload].
// The model configuration rides along as reserved "config.*" entries.
void save_checkpoint(const ParamRegistry& reg, const ModelConfig& cfg,
                     const std::filesystem::path& path);

// Reads the embedded configuration without touching parameters.
ModelConfig peek_checkpoint_config(const std::filesystem::path& path);

// Copies saved parameters into an already-built registry; names and shapes
// must match exactly in both directions.
void load_checkpoint(ParamRegistry& reg, const std::filesystem::path& path);

} // namespace symmpc::diff
