#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>

#include "ocacnn/config.hpp"

namespace ocacnn::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kData = 3, kNumerical = 4 };

/// Runs `body`, printing any exception to `err` and mapping it to an exit
/// code: ConfigError/ContractError/ShapeError -> 2, DataError -> 3,
/// NumericalError -> 4.
int guarded(std::ostream& err, const std::function<int()>& body);

/// Reads <data.root>/manifest.tsv, or ingests data.root as one subdirectory
/// per identity when there is no manifest. Never writes into data.root.
DatasetManifest load_dataset(const RunConfig& config);

/// Writes the dataset to `out_dir` (manifest, images, resolved config).
int cmd_gen_data(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& log);

/// Trains one model for train.target. Writes loss.tsv, epoch_NNN.ock after
/// every epoch and final.ock. A non-finite loss stops the run with exit code
/// 4; checkpoints already written are kept.
int cmd_train(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& log);

/// Scores a checkpoint on its target's protocol view: scores.tsv, auroc.txt.
int cmd_eval(const RunConfig& config, const std::filesystem::path& checkpoint,
             const std::filesystem::path& out_dir, std::ostream& log);

/// Full leave-one-identity-in protocol in train.mode: report.tsv, report.txt.
int cmd_protocol(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& log);

/// The three modes of eval.modes side by side: ablation.tsv, ablation.txt.
int cmd_ablate(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& log);

/// Gradient check of L_t on the tiny architecture in 64-bit mode; exit code
/// 4 when the maximum relative error exceeds kGradCheckTolerance.
int cmd_gradcheck(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& log);

int cmd_export_features(const RunConfig& config, const std::filesystem::path& checkpoint,
                        const std::filesystem::path& out_dir, std::ostream& log);

inline constexpr double kGradCheckTolerance = 1e-5;

}  // namespace ocacnn::cli
