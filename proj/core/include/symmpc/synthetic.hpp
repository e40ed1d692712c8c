#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "symmpc/geometry.hpp"

namespace symmpc {

struct SampleRecord {
  PointCloud partial;
  PointCloud gt;
  std::string shape_id;
  bool has_plane = false;
  Vec3 plane_normal{1.0, 0.0, 0.0};  // mirror plane through the origin
};

// Parametric shapes (boxes, ellipsoids, cylinder+box composites) with a known
// mirror plane; every fifth sample grows a one-sided lug and keeps only its
// nominal plane. Surface-sampled to `resolution` points; symmetric shapes are
// sampled in mirror pairs so the gt is exactly symmetric as a point set.
// Partials are backface-culled from a random viewpoint, half-space cropped,
// and resampled to resolution/4 points.
std::vector<SampleRecord> gen_synthetic(std::uint64_t seed, std::size_t count,
                                        std::size_t resolution);

// manifest.tsv plus one .pcf pair per sample; byte-stable for fixed inputs
void save_dataset(const std::vector<SampleRecord>& samples, const std::filesystem::path& dir);
std::vector<SampleRecord> load_dataset(const std::filesystem::path& dir);

// deterministic 80/20-style split on the id hash
bool is_validation(const std::string& shape_id, double val_fraction);

} // namespace symmpc
