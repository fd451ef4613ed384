#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "ocacnn/model.hpp"
#include "ocacnn/optim.hpp"

namespace ocacnn {

/// Free-form run metadata stored next to the architecture (seed, target, ...).
using CheckpointMeta = std::map<std::string, std::string>;

struct Checkpoint {
  ModelParams params;
  CheckpointMeta meta;
  std::optional<AdamState> optimizer;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout: "OCK1", u32 version, u64 length + key=value text block (arch.* and
// meta.* lines), u32 tensor count, then per tensor (sorted by name) u32 name
// length, name bytes and an OCT1 record; finally u8 optimizer flag and, when
// set, u64 step followed by the m and v tensors in the same order.
void save_params(const ModelParams& params, const std::filesystem::path& path,
                 const CheckpointMeta& meta = {}, const AdamState* optimizer = nullptr);

Checkpoint load_params(const std::filesystem::path& path);

/// Also verifies every stored tensor against `expected`; the error names the
/// first tensor that is missing, extra or differently shaped.
Checkpoint load_params(const std::filesystem::path& path, const ArchConfig& expected);

}  // namespace ocacnn
