#include "symmpc/config.hpp"

#include <fstream>
#include <sstream>

#include "symmpc/errors.hpp"

namespace symmpc {

void ModelConfig::validate() const {
  if (n_k < 1) throw DomainError("n_k must be positive");
  if (enc_channels < 2 || enc_channels % 2 != 0)
    throw DomainError("enc_channels must be even and at least 2");
  if (channels < 2 || channels % 2 != 0) throw DomainError("channels must be even and at least 2");
  if (heads < 1 || (2 * enc_channels) % heads != 0)
    throw DomainError("heads must divide 2*enc_channels");
  if (knn_k < 1) throw DomainError("knn_k must be positive");
  if (ratios.empty()) throw DomainError("at least one upsampling ratio required");
  for (std::size_t r : ratios)
    if (r < 1) throw DomainError("ratios must be positive");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw DomainError("epochs must be positive");
  if (batch_size < 1) throw DomainError("batch_size must be positive");
  if (lr < 0.0) throw DomainError("lr must be non-negative");
  if (weight_decay < 0.0) throw DomainError("weight_decay must be non-negative");
  if (partial_points < 4) throw DomainError("partial_points must be at least 4");
  if (gt_points < 4) throw DomainError("gt_points must be at least 4");
  if (!(val_fraction > 0.0 && val_fraction < 1.0))
    throw DomainError("val_fraction must be in (0, 1)");
}

ModelConfig paper_default() { return ModelConfig{}; }

ModelConfig toy_benchmark() {
  ModelConfig m;
  m.n_k = 48;
  m.enc_channels = 24;
  m.channels = 96;
  m.heads = 4;
  m.knn_k = 8;
  m.ratios = {2, 6};
  return m;
}

ModelConfig tiny_gradcheck() {
  ModelConfig m;
  m.n_k = 4;
  m.enc_channels = 8;
  m.channels = 32;
  m.heads = 2;
  m.knn_k = 4;
  m.ratios = {2, 2};
  return m;
}

namespace {

std::string trim(const std::string& s) {
  const std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::size_t parse_size(const std::string& v, const std::string& key) {
  try {
    const long long n = std::stoll(v);
    if (n < 0) throw std::invalid_argument("negative");
    return static_cast<std::size_t>(n);
  } catch (const std::exception&) {
    throw DomainError("config key " + key + ": bad integer '" + v + "'");
  }
}

double parse_double(const std::string& v, const std::string& key) {
  try {
    return std::stod(v);
  } catch (const std::exception&) {
    throw DomainError("config key " + key + ": bad number '" + v + "'");
  }
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw DomainError("config key " + key + ": bad flag '" + v + "'");
}

std::vector<std::size_t> parse_list(const std::string& v, const std::string& key) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_size(item, key));
  }
  if (out.empty()) throw DomainError("config key " + key + ": empty list");
  return out;
}

} // namespace

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open for reading");
  RunConfig cfg;
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw DomainError(path.string() + ":" + std::to_string(lineno) + ": bad section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "model" && section != "train" && section != "guidance")
        throw DomainError(path.string() + ": unknown section [" + section + "]");
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw DomainError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    const std::string qual = section + "." + key;

    if (qual == "model.n_k") cfg.model.n_k = parse_size(val, qual);
    else if (qual == "model.enc_channels") cfg.model.enc_channels = parse_size(val, qual);
    else if (qual == "model.channels") cfg.model.channels = parse_size(val, qual);
    else if (qual == "model.heads") cfg.model.heads = parse_size(val, qual);
    else if (qual == "model.knn_k") cfg.model.knn_k = parse_size(val, qual);
    else if (qual == "model.ratios") cfg.model.ratios = parse_list(val, qual);
    else if (qual == "model.seed") cfg.model.seed = parse_size(val, qual);
    else if (qual == "guidance.use_f_k") cfg.model.use_f_k = parse_bool(val, qual);
    else if (qual == "guidance.use_f_m") cfg.model.use_f_m = parse_bool(val, qual);
    else if (qual == "train.epochs") cfg.train.epochs = parse_size(val, qual);
    else if (qual == "train.batch_size") cfg.train.batch_size = parse_size(val, qual);
    else if (qual == "train.lr") cfg.train.lr = parse_double(val, qual);
    else if (qual == "train.weight_decay") cfg.train.weight_decay = parse_double(val, qual);
    else if (qual == "train.partial_points") cfg.train.partial_points = parse_size(val, qual);
    else if (qual == "train.gt_points") cfg.train.gt_points = parse_size(val, qual);
    else if (qual == "train.val_fraction") cfg.train.val_fraction = parse_double(val, qual);
    else if (qual == "train.seed") cfg.train.seed = parse_size(val, qual);
    else throw DomainError(path.string() + ": unknown config key '" + qual + "'");
  }
  cfg.model.validate();
  cfg.train.validate();
  return cfg;
}

void save_config(const RunConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out << "[model]\n";
  out << "n_k = " << cfg.model.n_k << "\n";
  out << "enc_channels = " << cfg.model.enc_channels << "\n";
  out << "channels = " << cfg.model.channels << "\n";
  out << "heads = " << cfg.model.heads << "\n";
  out << "knn_k = " << cfg.model.knn_k << "\n";
  out << "ratios = ";
  for (std::size_t i = 0; i < cfg.model.ratios.size(); ++i)
    out << (i ? ", " : "") << cfg.model.ratios[i];
  out << "\n";
  out << "seed = " << cfg.model.seed << "\n\n";
  out << "[guidance]\n";
  out << "use_f_k = " << (cfg.model.use_f_k ? "true" : "false") << "\n";
  out << "use_f_m = " << (cfg.model.use_f_m ? "true" : "false") << "\n\n";
  out << "[train]\n";
  out << "epochs = " << cfg.train.epochs << "\n";
  out << "batch_size = " << cfg.train.batch_size << "\n";
  out.precision(17);
  out << "lr = " << cfg.train.lr << "\n";
  out << "weight_decay = " << cfg.train.weight_decay << "\n";
  out << "partial_points = " << cfg.train.partial_points << "\n";
  out << "gt_points = " << cfg.train.gt_points << "\n";
  out << "val_fraction = " << cfg.train.val_fraction << "\n";
  out << "seed = " << cfg.train.seed << "\n";
  if (!out) throw IoError(path.string() + ": write failed");
}

} // namespace symmpc
