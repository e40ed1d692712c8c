#include "symmpc/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

namespace symmpc::diff {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

constexpr char kMagic[4] = {'S', 'Y', 'M', 'C'};
constexpr std::uint32_t kVersion = 1;

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& why) {
  throw IoError(path.string() + ": " + why);
}

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::ifstream& in, const std::filesystem::path& path) {
  T v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) fail(path, "truncated file");
  return v;
}

struct Entry {
  std::vector<std::size_t> shape;
  std::vector<double> data;
};

void write_entry(std::ofstream& out, const std::string& name, const Entry& e) {
  if (name.size() > 0xffff) throw DomainError("parameter name too long: " + name);
  put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(e.shape.size()));
  for (std::size_t d : e.shape) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  out.write(reinterpret_cast<const char*>(e.data.data()),
            static_cast<std::streamsize>(e.data.size() * sizeof(double)));
}

std::map<std::string, Entry> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open for reading");
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) fail(path, "bad magic");
  const std::uint32_t version = take<std::uint32_t>(in, path);
  if (version != kVersion) fail(path, "unsupported version " + std::to_string(version));
  const std::uint32_t count = take<std::uint32_t>(in, path);
  std::map<std::string, Entry> entries;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t len = take<std::uint16_t>(in, path);
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) fail(path, "truncated name");
    const std::uint8_t rank = take<std::uint8_t>(in, path);
    if (rank < 1 || rank > 2) fail(path, "entry " + name + " has bad rank");
    Entry e;
    std::size_t n = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      e.shape.push_back(take<std::uint32_t>(in, path));
      n *= e.shape.back();
    }
    e.data.resize(n);
    if (!in.read(reinterpret_cast<char*>(e.data.data()),
                 static_cast<std::streamsize>(n * sizeof(double))))
      fail(path, "truncated payload for " + name);
    if (!entries.emplace(std::move(name), std::move(e)).second) fail(path, "duplicate entry");
  }
  return entries;
}

Entry scalar_entry(double v) { return Entry{{1}, {v}}; }

double scalar_of(const std::map<std::string, Entry>& entries, const std::string& key,
                 const std::filesystem::path& path) {
  const auto it = entries.find(key);
  if (it == entries.end() || it->second.data.size() != 1)
    fail(path, "missing config entry " + key);
  return it->second.data[0];
}

} // namespace

void save_checkpoint(const ParamRegistry& reg, const ModelConfig& cfg,
                     const std::filesystem::path& path) {
  cfg.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(path, "cannot open for writing");

  std::vector<std::pair<std::string, Entry>> entries;
  entries.emplace_back("config.n_k", scalar_entry(static_cast<double>(cfg.n_k)));
  entries.emplace_back("config.enc_channels", scalar_entry(static_cast<double>(cfg.enc_channels)));
  entries.emplace_back("config.channels", scalar_entry(static_cast<double>(cfg.channels)));
  entries.emplace_back("config.heads", scalar_entry(static_cast<double>(cfg.heads)));
  entries.emplace_back("config.knn_k", scalar_entry(static_cast<double>(cfg.knn_k)));
  Entry ratios{{cfg.ratios.size()}, {}};
  for (std::size_t r : cfg.ratios) ratios.data.push_back(static_cast<double>(r));
  entries.emplace_back("config.ratios", std::move(ratios));
  entries.emplace_back("config.use_f_k", scalar_entry(cfg.use_f_k ? 1.0 : 0.0));
  entries.emplace_back("config.use_f_m", scalar_entry(cfg.use_f_m ? 1.0 : 0.0));
  entries.emplace_back("config.seed", scalar_entry(static_cast<double>(cfg.seed)));
  for (const auto& [name, t] : reg.entries()) {
    if (name.rfind("config.", 0) == 0) throw DomainError("parameter name collides with config.*");
    entries.emplace_back(name, Entry{t->shape, t->data});
  }

  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, e] : entries) write_entry(out, name, e);
  if (!out) fail(path, "write failed");
}

ModelConfig peek_checkpoint_config(const std::filesystem::path& path) {
  const auto entries = read_all(path);
  ModelConfig cfg;
  cfg.n_k = static_cast<std::size_t>(scalar_of(entries, "config.n_k", path));
  cfg.enc_channels = static_cast<std::size_t>(scalar_of(entries, "config.enc_channels", path));
  cfg.channels = static_cast<std::size_t>(scalar_of(entries, "config.channels", path));
  cfg.heads = static_cast<std::size_t>(scalar_of(entries, "config.heads", path));
  cfg.knn_k = static_cast<std::size_t>(scalar_of(entries, "config.knn_k", path));
  const auto it = entries.find("config.ratios");
  if (it == entries.end()) fail(path, "missing config entry config.ratios");
  cfg.ratios.clear();
  for (double r : it->second.data) cfg.ratios.push_back(static_cast<std::size_t>(r));
  cfg.use_f_k = scalar_of(entries, "config.use_f_k", path) != 0.0;
  cfg.use_f_m = scalar_of(entries, "config.use_f_m", path) != 0.0;
  cfg.seed = static_cast<std::size_t>(scalar_of(entries, "config.seed", path));
  cfg.validate();
  return cfg;
}

void load_checkpoint(ParamRegistry& reg, const std::filesystem::path& path) {
  auto entries = read_all(path);
  std::size_t consumed = 0;
  for (auto& [name, e] : entries)
    if (name.rfind("config.", 0) == 0) ++consumed;
  for (const auto& [name, t] : reg.entries()) {
    const auto it = entries.find(name);
    if (it == entries.end()) fail(path, "checkpoint lacks parameter " + name);
    if (it->second.shape != t->shape)
      fail(path, "shape mismatch for " + name + ": file " + shape_str(it->second.shape) +
                     " vs model " + shape_str(t->shape));
    t->data = std::move(it->second.data);
    ++consumed;
  }
  if (consumed != entries.size())
    fail(path, "checkpoint holds parameters the model does not define");
}

} // namespace symmpc::diff
