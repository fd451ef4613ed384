#include "ocacnn/checkpoint.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

#include "binary_io.hpp"
#include "text_util.hpp"

namespace ocacnn {

namespace {

constexpr char kCheckpointMagic[4] = {'O', 'C', 'K', '1'};

std::string format_double(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

std::string header_block(const ModelParams& params, const CheckpointMeta& meta, const AdamState* opt) {
  std::string text;
  for (const auto& [key, value] : params.arch.to_entries()) text += "arch." + key + "=" + value + "\n";
  for (const auto& [key, value] : meta) {
    if (key.find_first_of("=\n") != std::string::npos || value.find('\n') != std::string::npos) {
      throw ContractError("checkpoint metadata '" + key + "' contains '=' or a newline");
    }
    text += "meta." + key + "=" + value + "\n";
  }
  if (opt) {
    text += "optim.lr=" + format_double(opt->config.lr) + "\n";
    text += "optim.beta1=" + format_double(opt->config.beta1) + "\n";
    text += "optim.beta2=" + format_double(opt->config.beta2) + "\n";
    text += "optim.eps=" + format_double(opt->config.eps) + "\n";
  }
  return text;
}

void write_named(std::ostream& out, const std::string& name, const Tensor& t) {
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  detail::write_bytes(out, name);
  write_tensor(out, t);
}

std::pair<std::string, Tensor> read_named(std::istream& in) {
  const auto len = detail::read_le<std::uint32_t>(in);
  if (len == 0 || len > 4096) throw FormatError("bad tensor name length");
  std::string name = detail::read_bytes(in, len);
  return {std::move(name), read_tensor<float>(in)};
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[4];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw FormatError("bad checkpoint magic (expected OCK1)");
  }
  const auto version = detail::read_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto text_len = detail::read_le<std::uint64_t>(in);
  if (text_len > (1u << 24)) throw FormatError("checkpoint header too large");
  const std::string text = detail::read_bytes(in, static_cast<std::size_t>(text_len));

  Checkpoint ckpt;
  ArchConfig arch;
  AdamConfig adam;
  bool has_adam_config = false;
  for (auto line : detail::split(text, '\n')) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw FormatError("malformed checkpoint header line");
    const auto key = line.substr(0, eq);
    const auto value = line.substr(eq + 1);
    if (key.starts_with("arch.")) {
      arch.set_entry(key.substr(5), value);
    } else if (key.starts_with("meta.")) {
      ckpt.meta.emplace(std::string(key.substr(5)), std::string(value));
    } else if (key.starts_with("optim.")) {
      has_adam_config = true;
      const double v = detail::parse_double(key, value);
      const auto field = key.substr(6);
      if (field == "lr") adam.lr = v;
      else if (field == "beta1") adam.beta1 = v;
      else if (field == "beta2") adam.beta2 = v;
      else if (field == "eps") adam.eps = v;
      else throw FormatError("unknown checkpoint key '" + std::string(key) + "'");
    } else {
      throw FormatError("unknown checkpoint key '" + std::string(key) + "'");
    }
  }
  ckpt.params.arch = arch;

  const auto count = detail::read_le<std::uint32_t>(in);
  std::vector<std::string> order;
  for (std::uint32_t i = 0; i < count; ++i) {
    auto [name, tensor] = read_named(in);
    order.push_back(name);
    if (!ckpt.params.tensors.emplace(std::move(name), std::move(tensor)).second) {
      throw FormatError("duplicate tensor '" + order.back() + "' in checkpoint");
    }
  }
  const auto has_opt = detail::read_le<std::uint8_t>(in);
  if (has_opt) {
    AdamState state;
    state.config = has_adam_config ? adam : AdamConfig{};
    state.step = detail::read_le<std::uint64_t>(in);
    for (const auto& name : order) {
      auto [mn, m] = read_named(in);
      auto [vn, v] = read_named(in);
      if (mn != name || vn != name) throw FormatError("optimizer state out of order for '" + name + "'");
      state.m.emplace(name, std::move(m));
      state.v.emplace(name, std::move(v));
    }
    ckpt.optimizer = std::move(state);
  }
  return ckpt;
}

}  // namespace

void save_params(const ModelParams& params, const std::filesystem::path& path,
                 const CheckpointMeta& meta, const AdamState* optimizer) {
  std::ostringstream out(std::ios::binary);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::write_le<std::uint32_t>(out, kCheckpointVersion);
  const std::string text = header_block(params, meta, optimizer);
  detail::write_le<std::uint64_t>(out, text.size());
  detail::write_bytes(out, text);
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.tensors.size()));
  for (const auto& [name, t] : params.tensors) write_named(out, name, t);
  detail::write_le<std::uint8_t>(out, optimizer ? 1 : 0);
  if (optimizer) {
    detail::write_le<std::uint64_t>(out, optimizer->step);
    for (const auto& [name, t] : params.tensors) {
      const auto m = optimizer->m.find(name);
      const auto v = optimizer->v.find(name);
      write_named(out, name, m == optimizer->m.end() ? Tensor(t.shape()) : m->second);
      write_named(out, name, v == optimizer->v.end() ? Tensor(t.shape()) : v->second);
    }
  }

  // Write-then-rename so an interrupted save never replaces a good file.
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream file(tmp, std::ios::binary | std::ios::trunc);
    if (!file) throw DataError("cannot open " + tmp.string() + " for writing");
    const std::string bytes = out.str();
    file.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!file) throw DataError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  try {
    return read_checkpoint(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

Checkpoint load_params(const std::filesystem::path& path, const ArchConfig& expected) {
  Checkpoint ckpt = load_params(path);
  auto shapes = expected.parameter_shapes();
  std::sort(shapes.begin(), shapes.end());
  auto stored = ckpt.params.tensors.begin();
  for (const auto& [name, shape] : shapes) {
    if (stored == ckpt.params.tensors.end() || stored->first > name) {
      throw FormatError(path.string() + ": tensor '" + name + "' missing from checkpoint");
    }
    if (stored->first < name) {
      throw FormatError(path.string() + ": unexpected tensor '" + stored->first + "'");
    }
    if (stored->second.shape() != shape) {
      throw FormatError(path.string() + ": tensor '" + name + "' has shape " +
                        shape_str(stored->second.shape()) + ", expected " + shape_str(shape));
    }
    ++stored;
  }
  if (stored != ckpt.params.tensors.end()) {
    throw FormatError(path.string() + ": unexpected tensor '" + stored->first + "'");
  }
  ckpt.params.arch = expected;
  return ckpt;
}

}  // namespace ocacnn
