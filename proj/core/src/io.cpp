#include "symmpc/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "symmpc/errors.hpp"

namespace symmpc {

namespace {

static_assert(std::endian::native == std::endian::little,
              "pcf reader assumes a little-endian host");

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& why) {
  throw IoError(path.string() + ": " + why);
}

std::string lower_ext(const std::filesystem::path& path) {
  std::string e = path.extension().string();
  std::transform(e.begin(), e.end(), e.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return e;
}

} // namespace

PointCloud load_xyz(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(path, "cannot open for reading");
  PointCloud cloud;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    Vec3 p;
    if (!(ss >> p[0])) continue;  // blank or comment-only line
    if (!(ss >> p[1] >> p[2]))
      fail(path, "line " + std::to_string(lineno) + ": expected three coordinates");
    double extra;
    if (ss >> extra) fail(path, "line " + std::to_string(lineno) + ": trailing fields");
    for (int a = 0; a < 3; ++a)
      if (!std::isfinite(p[a]))
        fail(path, "line " + std::to_string(lineno) + ": non-finite coordinate");
    cloud.points.push_back(p);
  }
  if (cloud.empty()) fail(path, "no points");
  return cloud;
}

void save_xyz(const PointCloud& cloud, const std::filesystem::path& path) {
  cloud.validate("xyz output");
  std::ofstream out(path);
  if (!out) fail(path, "cannot open for writing");
  out.precision(17);
  for (const Vec3& p : cloud.points) out << p[0] << ' ' << p[1] << ' ' << p[2] << '\n';
  if (!out) fail(path, "write failed");
}

PointCloud load_pcf(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open for reading");
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "PCF1", 4) != 0) fail(path, "bad magic");
  std::uint32_t count = 0;
  if (!in.read(reinterpret_cast<char*>(&count), 4)) fail(path, "truncated header");
  if (count == 0) fail(path, "no points");
  std::vector<float> raw(static_cast<std::size_t>(count) * 3);
  if (!in.read(reinterpret_cast<char*>(raw.data()),
               static_cast<std::streamsize>(raw.size() * sizeof(float))))
    fail(path, "truncated payload");
  PointCloud cloud;
  cloud.points.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    for (int a = 0; a < 3; ++a) {
      const float v = raw[i * 3 + static_cast<std::size_t>(a)];
      if (!std::isfinite(v)) fail(path, "non-finite coordinate at point " + std::to_string(i));
      cloud.points[i][a] = static_cast<double>(v);
    }
  }
  return cloud;
}

void save_pcf(const PointCloud& cloud, const std::filesystem::path& path) {
  cloud.validate("pcf output");
  if (cloud.count() > 0xffffffffu) fail(path, "too many points for format");
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(path, "cannot open for writing");
  out.write("PCF1", 4);
  const std::uint32_t count = static_cast<std::uint32_t>(cloud.count());
  out.write(reinterpret_cast<const char*>(&count), 4);
  std::vector<float> raw(cloud.count() * 3);
  for (std::size_t i = 0; i < cloud.count(); ++i)
    for (int a = 0; a < 3; ++a)
      raw[i * 3 + static_cast<std::size_t>(a)] = static_cast<float>(cloud.points[i][a]);
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size() * sizeof(float)));
  if (!out) fail(path, "write failed");
}

PointCloud load_cloud(const std::filesystem::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".xyz") return load_xyz(path);
  if (ext == ".pcf") return load_pcf(path);
  fail(path, "unknown extension (use .xyz or .pcf)");
}

void save_cloud(const PointCloud& cloud, const std::filesystem::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".xyz") return save_xyz(cloud, path);
  if (ext == ".pcf") return save_pcf(cloud, path);
  fail(path, "unknown extension (use .xyz or .pcf)");
}

} // namespace symmpc
