#include "ocacnn/config.hpp"

#include <fstream>
#include <sstream>

#include "text_util.hpp"

namespace ocacnn {

namespace {

constexpr std::string_view kArchPrefix = "arch.";

std::vector<std::string> arch_keys() {
  std::vector<std::string> keys;
  for (const auto& [key, value] : ArchConfig::desk().to_entries()) keys.push_back(std::string(kArchPrefix) + key);
  return keys;
}

}  // namespace

const std::vector<std::pair<std::string, std::string>>& RunConfig::defaults() {
  static const std::vector<std::pair<std::string, std::string>> table = [] {
    std::vector<std::pair<std::string, std::string>> t = {
        {"arch.preset", "desk"},
        {"train.lr", "1e-4"},
        {"train.beta1", "0.9"},
        {"train.beta2", "0.999"},
        {"train.eps", "1e-8"},
        {"train.batch", "64"},
        {"train.epochs", "20"},
        {"train.seed", "1"},
        {"train.mode", "full"},
        {"train.target", ""},
        {"pseudo.mu", "0.0"},
        {"pseudo.sigma", "0.01"},
        {"loss.lambda_r", "1.0"},
        {"loss.recon_reduction", "sum"},
        {"data.root", ""},
        {"data.identities", "8"},
        {"data.samples", "500"},
        {"data.seed", "1"},
        {"data.ratio", "0.8"},
        {"data.format", "oct"},
        {"data.blob_count", "4"},
        {"data.gain_min", "0.6"},
        {"data.gain_max", "1.4"},
        {"data.jitter", "3"},
        {"data.noise_std", "0.05"},
        {"data.max_unknown_per_identity", "0"},
        {"data.resize", "false"},
        {"data.tolerant", "false"},
        {"eval.modes", "full,classifier_only,autoencoder_only"},
        {"eval.seeds", "1"},
    };
    for (const auto& key : arch_keys()) t.emplace_back(key, "");
    return t;
  }();
  return table;
}

RunConfig::RunConfig() {
  for (const auto& [key, value] : defaults()) values_.emplace(key, value);
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  RunConfig cfg;
  cfg.load_file(path);
  return cfg;
}

void RunConfig::load_text(std::string_view text, std::string_view origin) {
  std::size_t lineno = 0;
  for (auto line : detail::split(text, '\n')) {
    ++lineno;
    const auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    try {
      set_assignment(t);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(origin) + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  load_text(buffer.str(), path.string());
}

void RunConfig::set_assignment(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("expected key=value, got '" + std::string(assignment) + "'");
  }
  set(detail::trim(assignment.substr(0, eq)), detail::trim(assignment.substr(eq + 1)));
}

void RunConfig::set(std::string_view key, std::string_view value) {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
  it->second = std::string(value);
  if (key.starts_with(kArchPrefix) && key != "arch.preset") arch_explicit_[std::string(key)] = true;
}

bool RunConfig::contains(std::string_view key) const { return values_.contains(key); }

const std::string& RunConfig::get(std::string_view key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
  return it->second;
}

double RunConfig::get_double(std::string_view key) const { return detail::parse_double(key, get(key)); }

std::uint64_t RunConfig::get_u64(std::string_view key) const {
  return detail::parse_int<std::uint64_t>(key, get(key));
}

bool RunConfig::get_bool(std::string_view key) const { return detail::parse_bool(key, get(key)); }

ArchConfig RunConfig::arch() const {
  ArchConfig arch = ArchConfig::preset(get("arch.preset"));
  for (const auto& [key, is_set] : arch_explicit_) {
    if (is_set) arch.set_entry(std::string_view(key).substr(kArchPrefix.size()), get(key));
  }
  arch.validate();
  return arch;
}

std::map<std::string, std::string> RunConfig::resolved() const {
  std::map<std::string, std::string> out(values_.begin(), values_.end());
  for (const auto& [key, value] : arch().to_entries()) {
    const std::string full = std::string(kArchPrefix) + key;
    if (!arch_explicit_.contains(full)) out[full] = value;
  }
  return out;
}

std::string RunConfig::resolved_text() const {
  std::string text;
  for (const auto& [key, value] : resolved()) text += key + "=" + value + "\n";
  return text;
}

void RunConfig::write_resolved(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << resolved_text();
}

TrainOptions RunConfig::train_options() const {
  TrainOptions t;
  t.mode = parse_train_mode(get("train.mode"));
  t.lambda_r = get_double("loss.lambda_r");
  if (!(t.lambda_r >= 0.0)) throw ConfigError("loss.lambda_r must be >= 0");
  const auto& reduction = get("loss.recon_reduction");
  if (reduction == "sum") t.recon = ReconReduction::sum;
  else if (reduction == "mean") t.recon = ReconReduction::mean;
  else throw ConfigError("loss.recon_reduction must be sum or mean");
  t.pseudo_mu = get_double("pseudo.mu");
  t.pseudo_sigma = get_double("pseudo.sigma");
  if (!(t.pseudo_sigma > 0.0)) throw ConfigError("pseudo.sigma must be > 0");
  t.adam.lr = get_double("train.lr");
  t.adam.beta1 = get_double("train.beta1");
  t.adam.beta2 = get_double("train.beta2");
  t.adam.eps = get_double("train.eps");
  t.batch_size = get_u64("train.batch");
  if (t.batch_size == 0) throw ConfigError("train.batch must be >= 1");
  t.epochs = get_u64("train.epochs");
  t.seed = get_u64("train.seed");
  return t;
}

GeneratorConfig RunConfig::generator() const {
  const ArchConfig a = arch();
  GeneratorConfig g;
  g.identities = get_u64("data.identities");
  g.samples = get_u64("data.samples");
  g.image_size = a.image_size;
  g.channels = a.image_channels;
  g.seed = get_u64("data.seed");
  g.ratio = get_double("data.ratio");
  const auto& format = get("data.format");
  if (format == "oct") g.format = ImageFormat::oct;
  else if (format == "ppm") g.format = ImageFormat::ppm;
  else throw ConfigError("data.format must be oct or ppm");
  g.blob_count = get_u64("data.blob_count");
  g.gain_min = get_double("data.gain_min");
  g.gain_max = get_double("data.gain_max");
  g.jitter = get_u64("data.jitter");
  g.noise_std = get_double("data.noise_std");
  return g;
}

IngestOptions RunConfig::ingest() const {
  IngestOptions o;
  o.image_size = arch().image_size;
  o.resize = get_bool("data.resize");
  o.tolerant = get_bool("data.tolerant");
  o.ratio = get_double("data.ratio");
  o.seed = get_u64("data.seed");
  return o;
}

ProtocolOptions RunConfig::protocol() const {
  ProtocolOptions p;
  p.arch = arch();
  p.train = train_options();
  p.seeds.clear();
  for (auto s : detail::split(get("eval.seeds"), ',')) {
    p.seeds.push_back(detail::parse_int<std::uint64_t>("eval.seeds", s));
  }
  if (p.seeds.empty()) throw ConfigError("eval.seeds must list at least one seed");
  p.ratio = get_double("data.ratio");
  p.max_unknown_per_identity = get_u64("data.max_unknown_per_identity");
  return p;
}

std::vector<TrainMode> RunConfig::eval_modes() const {
  std::vector<TrainMode> modes;
  for (auto m : detail::split(get("eval.modes"), ',')) modes.push_back(parse_train_mode(detail::trim(m)));
  return modes;
}

}  // namespace ocacnn
