#pragma once

#include <filesystem>

#include "symmpc/geometry.hpp"

namespace symmpc {

// ASCII: one "x y z" triple per line, '#' starts a comment, blank lines skipped.
PointCloud load_xyz(const std::filesystem::path& path);
void save_xyz(const PointCloud& cloud, const std::filesystem::path& path);

// Binary: "PCF1" magic, u32 little-endian count, then count*3 f32 coordinates.
PointCloud load_pcf(const std::filesystem::path& path);
void save_pcf(const PointCloud& cloud, const std::filesystem::path& path);

// Dispatches on extension: .xyz / .pcf (case-insensitive).
PointCloud load_cloud(const std::filesystem::path& path);
void save_cloud(const PointCloud& cloud, const std::filesystem::path& path);

} // namespace symmpc
