#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "symmpc/errors.hpp"

namespace symmpc {

using Vec3 = std::array<double, 3>;

inline Vec3 operator-(const Vec3& a, const Vec3& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}
inline Vec3 operator+(const Vec3& a, const Vec3& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline Vec3 operator*(const Vec3& a, double s) { return s * a; }
inline double dot(const Vec3& a, const Vec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
inline double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}
double norm(const Vec3& a);
Vec3 normalized(const Vec3& a);  // throws DomainError on zero vector

/// An ordered set of 3D points in model units. Every coordinate is finite and
/// the cloud is non-empty once validated.
struct PointCloud {
  std::vector<Vec3> points;

  std::size_t count() const { return points.size(); }
  bool empty() const { return points.empty(); }

  /// Throws DomainError if empty or any coordinate is non-finite.
  void validate(const char* what = "point cloud") const;
};

/// Evaluation metrics for one completed sample.
struct MetricsRecord {
  double cd_l1 = 0.0;
  double cd_l2 = 0.0;
  double f1_at_1pct = 0.0;
  double fd = 0.0;
  double mmd = 0.0;
};

/// Farthest point sampling. The first pick is `seed`; each later pick
/// maximizes its minimum distance to everything already picked, ties broken
/// by lowest index. Returns m distinct indices.
std::vector<std::uint32_t> fps(const PointCloud& cloud, std::size_t m, std::size_t seed = 0);

/// Exact k nearest neighbors of each query among `reference`, sorted by
/// ascending distance with ties broken by lowest index. Accelerated by a
/// uniform grid; results match the brute-force scan exactly.
std::vector<std::vector<std::uint32_t>> knn(const PointCloud& queries,
                                            const PointCloud& reference, std::size_t k);

/// Index of the nearest reference point for each query (knn with k=1).
std::vector<std::uint32_t> nearest_neighbor(const PointCloud& queries,
                                            const PointCloud& reference);

/// l1 Chamfer distance: half the sum of both directional means of Euclidean
/// nearest-neighbor distances.
double chamfer_l1(const PointCloud& p, const PointCloud& q);

/// l2 Chamfer distance: sum of both directional means of squared
/// nearest-neighbor distances.
double chamfer_l2(const PointCloud& p, const PointCloud& q);

/// F1 = 2PR/(P+R) where precision/recall count points within `threshold` of
/// the other cloud; 0 when both are 0.
double f1_score(const PointCloud& p, const PointCloud& q, double threshold = 0.01);

/// Single-sided mean distance from each input point to its nearest output
/// point. Zero whenever the output contains the input.
double fidelity_distance(const PointCloud& input, const PointCloud& output);

/// Minimum chamfer_l2 between `output` and any gallery member.
double mmd(const PointCloud& output, const std::vector<PointCloud>& gallery);

/// Mirror about the plane through the origin with the given normal:
/// x -> x - 2 (n.x)/|n|^2 n.
PointCloud reflect_about_plane(const PointCloud& p, const Vec3& normal);

} // namespace symmpc
