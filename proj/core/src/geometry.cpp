#include "symmpc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>

#include "symmpc/threading.hpp"

namespace symmpc {

namespace {

constexpr std::size_t kChunk = 256;           // fixed so parallel sums are order-stable
constexpr std::size_t kGridMinPoints = 48;    // below this brute force wins anyway

struct Candidate {
  double d2;
  std::uint32_t idx;
};
inline bool better(const Candidate& a, const Candidate& b) {
  return a.d2 < b.d2 || (a.d2 == b.d2 && a.idx < b.idx);
}

// Bounded worst-first heap of the k best (d2, idx) pairs seen so far.
class KBest {
public:
  explicit KBest(std::size_t k) : k_(k) { heap_.reserve(k); }

  bool full() const { return heap_.size() == k_; }
  double worst_d2() const { return heap_.front().d2; }

  void offer(const Candidate& c) {
    if (heap_.size() < k_) {
      heap_.push_back(c);
      std::push_heap(heap_.begin(), heap_.end(), better);
    } else if (better(c, heap_.front())) {
      std::pop_heap(heap_.begin(), heap_.end(), better);
      heap_.back() = c;
      std::push_heap(heap_.begin(), heap_.end(), better);
    }
  }

  std::vector<std::uint32_t> sorted_indices() {
    std::sort(heap_.begin(), heap_.end(), better);
    std::vector<std::uint32_t> out(heap_.size());
    for (std::size_t i = 0; i < heap_.size(); ++i) out[i] = heap_[i].idx;
    return out;
  }

private:
  std::size_t k_;
  std::vector<Candidate> heap_;
};

// Uniform grid over the reference cloud. Cell size is the bounding-box
// diagonal over the cube root of the point count; degenerate boxes fall back
// to brute force.
class UniformGrid {
public:
  explicit UniformGrid(const std::vector<Vec3>& pts) : pts_(pts) {
    const std::size_t n = pts.size();
    if (n < kGridMinPoints) return;

    lo_ = hi_ = pts[0];
    for (const Vec3& p : pts) {
      for (int a = 0; a < 3; ++a) {
        lo_[a] = std::min(lo_[a], p[a]);
        hi_[a] = std::max(hi_[a], p[a]);
      }
    }
    const double diag = std::sqrt(squared_distance(lo_, hi_));
    cell_ = diag / std::cbrt(static_cast<double>(n));
    if (!(cell_ > 0.0) || !std::isfinite(cell_)) return;

    for (int a = 0; a < 3; ++a) {
      dims_[a] = static_cast<long>((hi_[a] - lo_[a]) / cell_) + 1;
      dims_[a] = std::max<long>(1, dims_[a]);
    }
    if (dims_[0] * dims_[1] * dims_[2] > static_cast<long>(4 * n + 64)) {
      // highly anisotropic cloud; a finer grid than points is wasted effort
      const double scale = std::cbrt(static_cast<double>(dims_[0] * dims_[1] * dims_[2]) /
                                     static_cast<double>(4 * n + 64));
      cell_ *= scale;
      for (int a = 0; a < 3; ++a) {
        dims_[a] = static_cast<long>((hi_[a] - lo_[a]) / cell_) + 1;
        dims_[a] = std::max<long>(1, dims_[a]);
      }
    }

    const std::size_t ncells = static_cast<std::size_t>(dims_[0] * dims_[1] * dims_[2]);
    starts_.assign(ncells + 1, 0);
    std::vector<std::uint32_t> cell_of(n);
    for (std::size_t i = 0; i < n; ++i) {
      cell_of[i] = static_cast<std::uint32_t>(cell_index(coords(pts[i])));
      ++starts_[cell_of[i] + 1];
    }
    for (std::size_t c = 1; c <= ncells; ++c) starts_[c] += starts_[c - 1];
    order_.resize(n);
    std::vector<std::uint32_t> cursor(starts_.begin(), starts_.end() - 1);
    for (std::size_t i = 0; i < n; ++i) order_[cursor[cell_of[i]]++] = static_cast<std::uint32_t>(i);
    active_ = true;
  }

  bool active() const { return active_; }

  void knn_query(const Vec3& q, KBest& best) const {
    const std::array<long, 3> c = coords(q);
    for (long ring = 0;; ++ring) {
      if (best.full() && ring > 0) {
        const double gap = static_cast<double>(ring - 1) * cell_;
        if (gap * gap > best.worst_d2()) return;
      }
      if (!visit_ring(q, c, ring, best)) {
        if (best.full()) return;  // ring beyond grid extent and heap complete
        if (ring > dims_[0] + dims_[1] + dims_[2] + 2) return;  // unreachable guard
      }
    }
  }

  Candidate nn_query(const Vec3& q) const {
    KBest best(1);
    knn_query(q, best);
    auto idx = best.sorted_indices();
    return {squared_distance(q, pts_[idx[0]]), idx[0]};
  }

private:
  std::array<long, 3> coords(const Vec3& p) const {
    std::array<long, 3> c;
    for (int a = 0; a < 3; ++a) c[a] = static_cast<long>(std::floor((p[a] - lo_[a]) / cell_));
    return c;
  }

  std::size_t cell_index(std::array<long, 3> c) const {
    for (int a = 0; a < 3; ++a) c[a] = std::clamp(c[a], 0L, dims_[a] - 1);
    return static_cast<std::size_t>((c[2] * dims_[1] + c[1]) * dims_[0] + c[0]);
  }

  void scan_cell(const Vec3& q, long x, long y, long z, KBest& best) const {
    const std::size_t ci = static_cast<std::size_t>((z * dims_[1] + y) * dims_[0] + x);
    for (std::uint32_t s = starts_[ci]; s < starts_[ci + 1]; ++s) {
      const std::uint32_t i = order_[s];
      best.offer({squared_distance(q, pts_[i]), i});
    }
  }

  // Visits all in-range cells at Chebyshev distance `ring` from c. Returns
  // false when the ring lies entirely outside the grid.
  bool visit_ring(const Vec3& q, const std::array<long, 3>& c, long ring, KBest& best) const {
    const long x0 = c[0] - ring, x1 = c[0] + ring;
    const long y0 = c[1] - ring, y1 = c[1] + ring;
    const long z0 = c[2] - ring, z1 = c[2] + ring;
    if (x1 < 0 || y1 < 0 || z1 < 0 || x0 >= dims_[0] || y0 >= dims_[1] || z0 >= dims_[2])
      return false;
    bool touched = false;
    for (long z = std::max(z0, 0L); z <= std::min(z1, dims_[2] - 1); ++z) {
      const bool zface = (z == z0 || z == z1);
      for (long y = std::max(y0, 0L); y <= std::min(y1, dims_[1] - 1); ++y) {
        const bool yface = zface || y == y0 || y == y1;
        if (yface) {
          for (long x = std::max(x0, 0L); x <= std::min(x1, dims_[0] - 1); ++x) {
            scan_cell(q, x, y, z, best);
            touched = true;
          }
        } else {
          for (long x : {x0, x1}) {
            if (x >= 0 && x < dims_[0]) {
              scan_cell(q, x, y, z, best);
              touched = true;
            }
          }
        }
      }
    }
    return touched;
  }

  const std::vector<Vec3>& pts_;
  Vec3 lo_{}, hi_{};
  double cell_ = 0.0;
  std::array<long, 3> dims_{1, 1, 1};
  std::vector<std::uint32_t> starts_;
  std::vector<std::uint32_t> order_;
  bool active_ = false;
};

void brute_knn(const Vec3& q, const std::vector<Vec3>& ref, std::size_t k, KBest& best) {
  for (std::uint32_t i = 0; i < ref.size(); ++i) best.offer({squared_distance(q, ref[i]), i});
  (void)k;
}

Candidate brute_nn(const Vec3& q, const std::vector<Vec3>& ref) {
  Candidate best{std::numeric_limits<double>::infinity(), 0};
  for (std::uint32_t i = 0; i < ref.size(); ++i) {
    const Candidate c{squared_distance(q, ref[i]), i};
    if (better(c, best)) best = c;
  }
  return best;
}

// Nearest-neighbor distances (squared) from every a-point into b.
std::vector<double> nn_squared(const PointCloud& a, const PointCloud& b) {
  const UniformGrid grid(b.points);
  std::vector<double> d2(a.count());
  parallel_chunks(a.count(), kChunk, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const Candidate c =
          grid.active() ? grid.nn_query(a.points[i]) : brute_nn(a.points[i], b.points);
      d2[i] = c.d2;
    }
  });
  return d2;
}

double mean_chunked(const std::vector<double>& v) {
  // fixed-chunk partial sums keep the result independent of thread count
  double total = 0.0;
  for (std::size_t lo = 0; lo < v.size(); lo += kChunk) {
    const std::size_t hi = std::min(v.size(), lo + kChunk);
    double part = 0.0;
    for (std::size_t i = lo; i < hi; ++i) part += v[i];
    total += part;
  }
  return total / static_cast<double>(v.size());
}

} // namespace

double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

Vec3 normalized(const Vec3& a) {
  const double n = norm(a);
  if (!(n > 0.0)) throw DomainError("cannot normalize a zero vector");
  return {a[0] / n, a[1] / n, a[2] / n};
}

void PointCloud::validate(const char* what) const {
  if (points.empty()) throw DomainError(std::string(what) + " is empty");
  for (const Vec3& p : points)
    for (int a = 0; a < 3; ++a)
      if (!std::isfinite(p[a])) throw DomainError(std::string(what) + " has non-finite coordinates");
}

std::vector<std::uint32_t> fps(const PointCloud& cloud, std::size_t m, std::size_t seed) {
  cloud.validate("fps input");
  if (m < 1 || m > cloud.count())
    throw SizeError("fps: m=" + std::to_string(m) + " outside [1, " +
                    std::to_string(cloud.count()) + "]");
  if (seed >= cloud.count())
    throw SizeError("fps: seed index " + std::to_string(seed) + " out of range");

  const std::size_t n = cloud.count();
  std::vector<std::uint32_t> picked;
  picked.reserve(m);
  picked.push_back(static_cast<std::uint32_t>(seed));

  std::vector<double> min_d2(n);
  for (std::size_t i = 0; i < n; ++i)
    min_d2[i] = squared_distance(cloud.points[i], cloud.points[seed]);

  while (picked.size() < m) {
    std::size_t far = 0;
    double far_d2 = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (min_d2[i] > far_d2) {  // strict: ties keep the lowest index
        far_d2 = min_d2[i];
        far = i;
      }
    }
    picked.push_back(static_cast<std::uint32_t>(far));
    for (std::size_t i = 0; i < n; ++i)
      min_d2[i] = std::min(min_d2[i], squared_distance(cloud.points[i], cloud.points[far]));
  }
  return picked;
}

std::vector<std::vector<std::uint32_t>> knn(const PointCloud& queries, const PointCloud& reference,
                                            std::size_t k) {
  queries.validate("knn queries");
  reference.validate("knn reference");
  if (k < 1 || k > reference.count())
    throw SizeError("knn: k=" + std::to_string(k) + " outside [1, " +
                    std::to_string(reference.count()) + "]");

  const UniformGrid grid(reference.points);
  std::vector<std::vector<std::uint32_t>> out(queries.count());
  parallel_chunks(queries.count(), kChunk, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      KBest best(k);
      if (grid.active())
        grid.knn_query(queries.points[i], best);
      else
        brute_knn(queries.points[i], reference.points, k, best);
      out[i] = best.sorted_indices();
    }
  });
  return out;
}

std::vector<std::uint32_t> nearest_neighbor(const PointCloud& queries,
                                            const PointCloud& reference) {
  queries.validate("nn queries");
  reference.validate("nn reference");
  const UniformGrid grid(reference.points);
  std::vector<std::uint32_t> out(queries.count());
  parallel_chunks(queries.count(), kChunk, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const Candidate c = grid.active() ? grid.nn_query(queries.points[i])
                                        : brute_nn(queries.points[i], reference.points);
      out[i] = c.idx;
    }
  });
  return out;
}

double chamfer_l1(const PointCloud& p, const PointCloud& q) {
  p.validate("chamfer_l1 p");
  q.validate("chamfer_l1 q");
  std::vector<double> pq = nn_squared(p, q);
  std::vector<double> qp = nn_squared(q, p);
  for (double& d : pq) d = std::sqrt(d);
  for (double& d : qp) d = std::sqrt(d);
  return 0.5 * (mean_chunked(pq) + mean_chunked(qp));
}

double chamfer_l2(const PointCloud& p, const PointCloud& q) {
  p.validate("chamfer_l2 p");
  q.validate("chamfer_l2 q");
  return mean_chunked(nn_squared(p, q)) + mean_chunked(nn_squared(q, p));
}

double f1_score(const PointCloud& p, const PointCloud& q, double threshold) {
  p.validate("f1 p");
  q.validate("f1 q");
  if (!(threshold > 0.0)) throw DomainError("f1 threshold must be positive");
  const double t2 = threshold * threshold;
  const auto count_within = [&](const std::vector<double>& d2) {
    std::size_t n = 0;
    for (double d : d2)
      if (d <= t2) ++n;
    return n;
  };
  const double precision =
      static_cast<double>(count_within(nn_squared(p, q))) / static_cast<double>(p.count());
  const double recall =
      static_cast<double>(count_within(nn_squared(q, p))) / static_cast<double>(q.count());
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double fidelity_distance(const PointCloud& input, const PointCloud& output) {
  input.validate("fidelity input");
  output.validate("fidelity output");
  std::vector<double> d2 = nn_squared(input, output);
  for (double& d : d2) d = std::sqrt(d);
  return mean_chunked(d2);
}

double mmd(const PointCloud& output, const std::vector<PointCloud>& gallery) {
  if (gallery.empty()) throw DomainError("mmd gallery is empty");
  double best = std::numeric_limits<double>::infinity();
  for (const PointCloud& member : gallery) best = std::min(best, chamfer_l2(output, member));
  return best;
}

PointCloud reflect_about_plane(const PointCloud& p, const Vec3& normal) {
  p.validate("reflect input");
  const double n2 = dot(normal, normal);
  if (!(n2 > 0.0)) throw DomainError("reflect_about_plane: zero normal");
  PointCloud out;
  out.points.reserve(p.count());
  for (const Vec3& x : p.points) {
    const double s = 2.0 * dot(normal, x) / n2;
    out.points.push_back({x[0] - s * normal[0], x[1] - s * normal[1], x[2] - s * normal[2]});
  }
  return out;
}

} // namespace symmpc
