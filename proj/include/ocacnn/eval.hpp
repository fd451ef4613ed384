#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ocacnn/data.hpp"
#include "ocacnn/model.hpp"
#include "ocacnn/train.hpp"

namespace ocacnn {

/// classifier_prob: sigmoid of the classifier logit, no pseudo-negative rows.
/// neg_recon_error: minus the per-sample L1 reconstruction error.
enum class ScoreMode { classifier_prob, neg_recon_error };

std::string_view to_string(ScoreMode mode);
ScoreMode score_mode_for(TrainMode mode);

struct ScoredSample {
  double score = 0.0;  // higher means more target-like
  bool is_target = false;
  std::string identity;
  ScoreMode mode = ScoreMode::classifier_prob;
};

/// One score per image of [M,C,H,W], order preserved. Images are pushed
/// through the networks in chunks of `chunk`.
std::vector<double> score_images(const ModelParams& params, const Tensor& images, ScoreMode mode,
                                 std::size_t chunk = 256);

/// Scores every test file of a view.
std::vector<ScoredSample> score_samples(const ModelParams& params, const DatasetManifest& manifest,
                                        const ImageStore& store, const ProtocolView& view,
                                        ScoreMode mode, std::size_t chunk = 256);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocResult {
  std::vector<RocPoint> points;  // (0,0) first, (1,1) last
  double auroc = 0.0;
  std::size_t n_target = 0;
  std::size_t n_unknown = 0;
};

/// Mann-Whitney statistic with ties counted one half; cross-checked against
/// the trapezoidal area of the ROC built from the distinct thresholds.
RocResult auroc(std::span<const ScoredSample> samples);
RocResult auroc(std::span<const double> target_scores, std::span<const double> unknown_scores);

/// Trapezoidal area under a stored curve.
double trapezoid_area(std::span<const RocPoint> points);

struct ProtocolOptions {
  ArchConfig arch;
  TrainOptions train;
  std::vector<std::uint64_t> seeds{1};
  double ratio = 0.8;
  std::size_t max_unknown_per_identity = 0;
  /// Restricts the targets; empty means every identity.
  std::vector<std::string> targets;
};

struct TargetResult {
  std::uint64_t seed = 0;
  std::string target;
  double auroc = 0.0;
  std::size_t n_target = 0;
  std::size_t n_unknown = 0;
  bool failed = false;
  std::string error;
};

struct ProtocolReport {
  TrainMode mode = TrainMode::full;
  std::vector<TargetResult> results;  // seed-major, then identity order
  double mean = 0.0;
  double std = 0.0;  // population standard deviation over successful runs
  std::size_t failures = 0;
  std::map<std::string, std::string> config;
};

/// Population mean and standard deviation of the successful entries.
void summarize(ProtocolReport& report);

using ProgressFn = std::function<void(const TargetResult&)>;

/// Trains one fresh model per (seed, target) in `mode`, scores the target's
/// held-out files against every unknown file and aggregates the AUROCs.
/// Runs whose loss diverges are recorded as failed and left out of the mean.
ProtocolReport run_protocol(const DatasetManifest& manifest, const ImageStore& store,
                            const ProtocolOptions& options, TrainMode mode,
                            const ProgressFn& progress = {});

struct AblationReport {
  std::vector<ProtocolReport> reports;  // autoencoder_only, classifier_only, full
  /// mean(a) - mean(b) for each ordered pair (a, b) of modes.
  std::vector<std::pair<std::string, double>> differences;
};

AblationReport run_ablation_suite(const DatasetManifest& manifest, const ImageStore& store,
                                  const ProtocolOptions& options, const ProgressFn& progress = {});

/// "mode<TAB>target<TAB>auroc" per entry, then MEAN and STD lines.
std::string format_machine(const ProtocolReport& report);
/// Human-readable table, one row per report.
std::string format_table(std::span<const ProtocolReport> reports);
std::string format_differences(const AblationReport& report);

struct FeatureExport {
  Tensor features;  // [M,D]
  std::vector<std::string> identities;
  std::vector<bool> is_target;
};

/// Features of every manifest image (manifest order) for external plotting.
FeatureExport compute_features(const ModelParams& params, const DatasetManifest& manifest,
                               const ImageStore& store, const std::string& target,
                               std::size_t chunk = 256);

/// Writes features.oct and labels.tsv ("identity<TAB>is_target", one line per row).
void export_features(const ModelParams& params, const DatasetManifest& manifest,
                     const ImageStore& store, const std::string& target,
                     const std::filesystem::path& out_dir);

}  // namespace ocacnn
