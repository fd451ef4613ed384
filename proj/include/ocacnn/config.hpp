#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ocacnn/data.hpp"
#include "ocacnn/eval.hpp"
#include "ocacnn/model.hpp"
#include "ocacnn/train.hpp"

namespace ocacnn {

/// Flat key=value run configuration. Values are kept as the text they were
/// given in, so the resolved snapshot echoes them unchanged. Unknown keys are
/// rejected.
class RunConfig {
 public:
  RunConfig();

  static RunConfig from_file(const std::filesystem::path& path);

  /// Reads "key=value" lines; '#' starts a comment line.
  void load_text(std::string_view text, std::string_view origin = "<config>");
  void load_file(const std::filesystem::path& path);
  /// Parses "key=value".
  void set_assignment(std::string_view assignment);
  void set(std::string_view key, std::string_view value);

  bool contains(std::string_view key) const;
  const std::string& get(std::string_view key) const;
  double get_double(std::string_view key) const;
  std::uint64_t get_u64(std::string_view key) const;
  bool get_bool(std::string_view key) const;

  /// Every key with its effective value; arch.* keys not set explicitly take
  /// the value from arch.preset.
  std::map<std::string, std::string> resolved() const;
  std::string resolved_text() const;
  void write_resolved(const std::filesystem::path& path) const;

  ArchConfig arch() const;
  TrainOptions train_options() const;
  GeneratorConfig generator() const;
  IngestOptions ingest() const;
  ProtocolOptions protocol() const;
  std::vector<TrainMode> eval_modes() const;

  static const std::vector<std::pair<std::string, std::string>>& defaults();

 private:
  std::map<std::string, std::string, std::less<>> values_;
  std::map<std::string, bool, std::less<>> arch_explicit_;
};

inline constexpr const char* kResolvedConfigFile = "config.resolved.txt";

}  // namespace ocacnn
