#include "symmpc/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "symmpc/errors.hpp"
#include "symmpc/io.hpp"
#include "symmpc/rng.hpp"
#include "symmpc/threading.hpp"

namespace symmpc {

namespace {

struct SurfacePoint {
  Vec3 p;
  Vec3 n;  // outward unit normal
};

Vec3 random_unit(Rng& rng) {
  for (;;) {
    const Vec3 v{rng.normal(), rng.normal(), rng.normal()};
    const double len = norm(v);
    if (len > 1e-6) return {v[0] / len, v[1] / len, v[2] / len};
  }
}

std::array<Vec3, 3> random_rotation(Rng& rng) {
  // rows of the matrix; quaternion drawn from an isotropic gaussian
  double q[4];
  double len2 = 0.0;
  do {
    len2 = 0.0;
    for (double& c : q) {
      c = rng.normal();
      len2 += c * c;
    }
  } while (len2 < 1e-12);
  const double s = 1.0 / std::sqrt(len2);
  const double w = q[0] * s, x = q[1] * s, y = q[2] * s, z = q[3] * s;
  return {Vec3{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
          Vec3{2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
          Vec3{2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}};
}

Vec3 rotate(const std::array<Vec3, 3>& r, const Vec3& v) {
  return {dot(r[0], v), dot(r[1], v), dot(r[2], v)};
}

// --- canonical-frame samplers; every body is mirror-symmetric about x=0 ---

SurfacePoint sample_box_at(const Vec3& half, const Vec3& center, Rng& rng) {
  const double ax = half[1] * half[2], ay = half[0] * half[2], az = half[0] * half[1];
  const double pick = rng.uniform(0.0, ax + ay + az);
  int axis = pick < ax ? 0 : (pick < ax + ay ? 1 : 2);
  const double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
  Vec3 p, n{0, 0, 0};
  p[axis] = side * half[axis];
  n[axis] = side;
  const int u = (axis + 1) % 3, v = (axis + 2) % 3;
  p[u] = rng.uniform(-half[u], half[u]);
  p[v] = rng.uniform(-half[v], half[v]);
  return {p + center, n};
}

double box_area(const Vec3& half) {
  return 8.0 * (half[0] * half[1] + half[1] * half[2] + half[2] * half[0]);
}

struct BoxBody {
  Vec3 half;
  double area() const { return box_area(half); }
  SurfacePoint sample(Rng& rng) const { return sample_box_at(half, {0, 0, 0}, rng); }
  Vec3 lo() const { return {-half[0], -half[1], -half[2]}; }
  Vec3 hi() const { return half; }
};

struct EllipsoidBody {
  Vec3 axes;
  double area() const {
    constexpr double p = 1.6075;  // Thomsen approximation, plenty for weighting
    const double a = axes[0], b = axes[1], c = axes[2];
    const double m =
        (std::pow(a * b, p) + std::pow(a * c, p) + std::pow(b * c, p)) / 3.0;
    return 4.0 * std::numbers::pi * std::pow(m, 1.0 / p);
  }
  SurfacePoint sample(Rng& rng) const {
    const Vec3 u = random_unit(rng);
    const Vec3 p{axes[0] * u[0], axes[1] * u[1], axes[2] * u[2]};
    return {p, normalized({u[0] / axes[0], u[1] / axes[1], u[2] / axes[2]})};
  }
  Vec3 lo() const { return {-axes[0], -axes[1], -axes[2]}; }
  Vec3 hi() const { return axes; }
};

// upright cylinder with a box sitting on its top cap
struct CompositeBody {
  double radius, halfh;
  Vec3 box_half;
  double lateral() const { return 2.0 * std::numbers::pi * radius * 2.0 * halfh; }
  double caps() const { return 2.0 * std::numbers::pi * radius * radius; }
  double area() const { return lateral() + caps() + box_area(box_half); }
  SurfacePoint sample(Rng& rng) const {
    const double pick = rng.uniform(0.0, area());
    if (pick < lateral()) {
      const double ang = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double z = rng.uniform(-halfh, halfh);
      return {{radius * std::cos(ang), radius * std::sin(ang), z},
              {std::cos(ang), std::sin(ang), 0.0}};
    }
    if (pick < lateral() + caps()) {
      const double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
      const double r = radius * std::sqrt(rng.uniform());
      const double ang = rng.uniform(0.0, 2.0 * std::numbers::pi);
      return {{r * std::cos(ang), r * std::sin(ang), side * halfh}, {0.0, 0.0, side}};
    }
    return sample_box_at(box_half, {0.0, 0.0, halfh + box_half[2]}, rng);
  }
  Vec3 lo() const {
    return {std::min(-radius, -box_half[0]), std::min(-radius, -box_half[1]), -halfh};
  }
  Vec3 hi() const {
    return {std::max(radius, box_half[0]), std::max(radius, box_half[1]),
            halfh + 2.0 * box_half[2]};
  }
};

// one-sided lug hung off the body's +x extremity; what makes a shape asymmetric
struct Lug {
  Vec3 half, center;
  double area() const { return box_area(half); }
  SurfacePoint sample(Rng& rng) const { return sample_box_at(half, center, rng); }
};

SurfacePoint mirror_x(const SurfacePoint& s) {
  return {{-s.p[0], s.p[1], s.p[2]}, {-s.n[0], s.n[1], s.n[2]}};
}

template <typename Body>
std::vector<SurfacePoint> sample_shape(const Body& body, const Lug* lug, std::size_t n,
                                       Rng& rng) {
  std::vector<SurfacePoint> pts;
  pts.reserve(n + 1);
  if (!lug) {
    // mirror pairs make the point set exactly symmetric about x=0
    while (pts.size() + 1 < n) {
      const SurfacePoint s = body.sample(rng);
      pts.push_back(s);
      pts.push_back(mirror_x(s));
    }
    if (pts.size() < n) pts.push_back(body.sample(rng));
    return pts;
  }
  const double wb = body.area(), wl = lug->area();
  for (std::size_t i = 0; i < n; ++i)
    pts.push_back(rng.uniform(0.0, wb + wl) < wb ? body.sample(rng) : lug->sample(rng));
  return pts;
}

template <typename Body>
Lug make_lug(const Body& body, Rng& rng) {
  const Vec3 lo = body.lo(), hi = body.hi();
  const double span = std::max({hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]});
  Lug lug;
  for (int a = 0; a < 3; ++a) lug.half[a] = span * rng.uniform(0.22, 0.32);
  lug.center = {hi[0] + 0.7 * lug.half[0], rng.uniform(-0.15, 0.15) * span,
                0.5 * (lo[2] + hi[2]) + rng.uniform(-0.15, 0.15) * span};
  return lug;
}

struct CanonicalShape {
  std::vector<SurfacePoint> pts;
  Vec3 body_lo, body_hi;
  Vec3 full_lo, full_hi;
};

template <typename Body>
CanonicalShape build(const Body& body, bool asym, std::size_t n, Rng& rng) {
  CanonicalShape shape;
  shape.body_lo = body.lo();
  shape.body_hi = body.hi();
  if (asym) {
    const Lug lug = make_lug(body, rng);
    shape.pts = sample_shape(body, &lug, n, rng);
    for (int a = 0; a < 3; ++a) {
      shape.full_lo[a] = std::min(shape.body_lo[a], lug.center[a] - lug.half[a]);
      shape.full_hi[a] = std::max(shape.body_hi[a], lug.center[a] + lug.half[a]);
    }
  } else {
    shape.pts = sample_shape(body, nullptr, n, rng);
    shape.full_lo = shape.body_lo;
    shape.full_hi = shape.body_hi;
  }
  return shape;
}

std::string zero_pad(std::size_t v, int width) {
  std::string s = std::to_string(v);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

SampleRecord make_sample(std::size_t index, std::size_t resolution, Rng& rng) {
  const bool asym = index % 5 == 4;
  const int kind = static_cast<int>(rng.index(3));

  CanonicalShape shape;
  std::string kind_name;
  switch (kind) {
    case 0: {
      kind_name = "box";
      BoxBody body{{rng.uniform(0.25, 0.5), rng.uniform(0.25, 0.5), rng.uniform(0.25, 0.5)}};
      shape = build(body, asym, resolution, rng);
      break;
    }
    case 1: {
      kind_name = "ellipsoid";
      EllipsoidBody body{
          {rng.uniform(0.25, 0.5), rng.uniform(0.25, 0.5), rng.uniform(0.25, 0.5)}};
      shape = build(body, asym, resolution, rng);
      break;
    }
    default: {
      kind_name = "comp";
      CompositeBody body{rng.uniform(0.2, 0.35),
                         rng.uniform(0.25, 0.45),
                         {rng.uniform(0.12, 0.3), rng.uniform(0.12, 0.3),
                          rng.uniform(0.1, 0.25)}};
      shape = build(body, asym, resolution, rng);
      break;
    }
  }

  // center on the symmetric body (keeps the plane through the origin), scale
  // the whole thing — lug included — into the unit cube
  Vec3 center;
  for (int a = 0; a < 3; ++a) center[a] = 0.5 * (shape.body_lo[a] + shape.body_hi[a]);
  center[0] = 0.0;
  double span = 0.0;
  for (int a = 0; a < 3; ++a)
    span = std::max(span, std::max(shape.full_hi[a] - center[a], center[a] - shape.full_lo[a]));
  const double scale = 0.5 / span;

  const auto rot = random_rotation(rng);
  std::vector<SurfacePoint> world(shape.pts.size());
  for (std::size_t i = 0; i < shape.pts.size(); ++i) {
    world[i].p = rotate(rot, (shape.pts[i].p - center) * scale);
    world[i].n = rotate(rot, shape.pts[i].n);
  }

  SampleRecord rec;
  rec.shape_id = kind_name + (asym ? "_asym_" : "_") + zero_pad(index, 4);
  rec.has_plane = true;
  rec.plane_normal = rotate(rot, {1.0, 0.0, 0.0});
  rec.gt.points.reserve(world.size());
  for (const SurfacePoint& s : world) rec.gt.points.push_back(s.p);

  // occlusion: backface-cull from a viewpoint, then a half-space crop
  const Vec3 view = 2.5 * random_unit(rng);
  std::vector<std::uint32_t> visible;
  for (std::uint32_t i = 0; i < world.size(); ++i)
    if (dot(world[i].n, view - world[i].p) > 0.0) visible.push_back(i);
  if (visible.size() < 8)
    for (std::uint32_t i = 0; i < world.size(); ++i) visible.push_back(i);

  const Vec3 crop_dir = random_unit(rng);
  const double keep_frac = rng.uniform(0.55, 0.8);
  std::vector<double> proj(visible.size());
  for (std::size_t i = 0; i < visible.size(); ++i) proj[i] = dot(crop_dir, world[visible[i]].p);
  std::vector<double> sorted = proj;
  std::sort(sorted.begin(), sorted.end());
  const double cut = sorted[static_cast<std::size_t>(keep_frac * (sorted.size() - 1))];
  std::vector<std::uint32_t> kept;
  for (std::size_t i = 0; i < visible.size(); ++i)
    if (proj[i] <= cut) kept.push_back(visible[i]);
  if (kept.size() < 8) kept = visible;

  const std::size_t partial_size = std::max<std::size_t>(4, resolution / 4);
  rec.partial.points.reserve(partial_size);
  if (kept.size() >= partial_size) {
    rng.shuffle(kept);
    for (std::size_t i = 0; i < partial_size; ++i) rec.partial.points.push_back(world[kept[i]].p);
  } else {
    for (std::size_t i = 0; i < partial_size; ++i)
      rec.partial.points.push_back(world[kept[rng.index(kept.size())]].p);
  }
  return rec;
}

} // namespace

std::vector<SampleRecord> gen_synthetic(std::uint64_t seed, std::size_t count,
                                        std::size_t resolution) {
  if (count < 1) throw DomainError("gen_synthetic: count must be positive");
  if (resolution < 16) throw DomainError("gen_synthetic: resolution must be at least 16");
  std::vector<SampleRecord> out(count);
  Rng root(seed);
  std::vector<Rng> forks;
  forks.reserve(count);
  for (std::size_t i = 0; i < count; ++i) forks.push_back(root.fork(i));
  parallel_chunks(count, 8, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) out[i] = make_sample(i, resolution, forks[i]);
  });
  return out;
}

void save_dataset(const std::vector<SampleRecord>& samples, const std::filesystem::path& dir) {
  if (samples.empty()) throw DomainError("save_dataset: no samples");
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.tsv");
  if (!manifest) throw IoError((dir / "manifest.tsv").string() + ": cannot open for writing");
  manifest.precision(17);
  for (const SampleRecord& rec : samples) {
    const std::string pfile = rec.shape_id + "_partial.pcf";
    const std::string gfile = rec.shape_id + "_gt.pcf";
    save_pcf(rec.partial, dir / pfile);
    save_pcf(rec.gt, dir / gfile);
    manifest << rec.shape_id << '\t' << pfile << '\t' << gfile << '\t';
    if (rec.has_plane)
      manifest << rec.plane_normal[0] << ' ' << rec.plane_normal[1] << ' '
               << rec.plane_normal[2];
    else
      manifest << '-';
    manifest << '\n';
  }
  if (!manifest) throw IoError((dir / "manifest.tsv").string() + ": write failed");
}

std::vector<SampleRecord> load_dataset(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.tsv");
  if (!manifest) throw IoError((dir / "manifest.tsv").string() + ": cannot open for reading");
  std::vector<SampleRecord> samples;
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    SampleRecord rec;
    std::string pfile, gfile, plane;
    if (!std::getline(ss, rec.shape_id, '\t') || !std::getline(ss, pfile, '\t') ||
        !std::getline(ss, gfile, '\t') || !std::getline(ss, plane))
      throw IoError((dir / "manifest.tsv").string() + ": malformed line");
    if (plane != "-") {
      std::stringstream ps(plane);
      if (!(ps >> rec.plane_normal[0] >> rec.plane_normal[1] >> rec.plane_normal[2]))
        throw IoError((dir / "manifest.tsv").string() + ": bad plane normal for " + rec.shape_id);
      rec.has_plane = true;
    }
    rec.partial = load_pcf(dir / pfile);
    rec.gt = load_pcf(dir / gfile);
    samples.push_back(std::move(rec));
  }
  if (samples.empty()) throw IoError((dir / "manifest.tsv").string() + ": no samples listed");
  return samples;
}

bool is_validation(const std::string& shape_id, double val_fraction) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : shape_id) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return static_cast<double>(h % 1000) < val_fraction * 1000.0;
}

} // namespace symmpc
