#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ocacnn/data.hpp"
#include "ocacnn/gradcheck.hpp"
#include "ocacnn/model.hpp"
#include "ocacnn/optim.hpp"
#include "ocacnn/rng.hpp"

namespace ocacnn {

/// full: L_c + lambda_r L_r. classifier_only: lambda_r forced to 0.
/// autoencoder_only: L_r alone, classifier unused.
enum class TrainMode { full, classifier_only, autoencoder_only };

TrainMode parse_train_mode(std::string_view name);
std::string_view to_string(TrainMode mode);

struct TrainOptions {
  TrainMode mode = TrainMode::full;
  double lambda_r = 1.0;
  ReconReduction recon = ReconReduction::sum;
  double pseudo_mu = 0.0;
  double pseudo_sigma = 0.01;
  AdamConfig adam;
  std::size_t batch_size = 64;
  std::size_t epochs = 20;
  std::uint64_t seed = 1;

  /// The lambda_r actually applied in `mode`.
  double effective_lambda() const;
};

/// Seed for one (run seed, target) pair. Keyed by the target's name so results
/// do not depend on the order targets are visited in.
std::uint64_t target_seed(std::uint64_t seed, const std::string& target);

struct StepLosses {
  std::size_t step = 0;
  std::optional<double> lc;  // absent in autoencoder_only
  double lr = 0.0;
  double lt = 0.0;
};

/// One model, its Adam state and the pseudo-negative stream.
class Trainer {
 public:
  Trainer(ModelParams params, TrainOptions options, std::uint64_t run_seed);

  /// Forward, backward and one Adam update on a batch [N,C,H,W]. Throws
  /// NumericalError (leaving the model untouched) when a loss or gradient is
  /// not finite.
  StepLosses step(const Tensor& images);

  const ModelParams& params() const noexcept { return params_; }
  const AdamState& optimizer() const noexcept { return adam_; }
  const TrainOptions& options() const noexcept { return options_; }
  std::size_t steps() const noexcept { return steps_; }

 private:
  ModelParams params_;
  TrainOptions options_;
  AdamState adam_;
  DeterministicRng pseudo_rng_;
  std::set<std::string> frozen_;
  std::size_t steps_ = 0;
};

struct TrainCallbacks {
  std::function<void(const StepLosses&)> on_step;
  /// Called after each completed epoch (1-based).
  std::function<void(std::size_t epoch, const Trainer&)> on_epoch;
};

struct TrainResult {
  ModelParams params;
  AdamState optimizer;
  std::vector<StepLosses> history;
};

/// Trains a fresh model on the view's train files for options.epochs epochs.
TrainResult train_target(const DatasetManifest& manifest, const ImageStore& store,
                         const ProtocolView& view, const ArchConfig& arch,
                         const TrainOptions& options, const TrainCallbacks& callbacks = {});

/// step 1e-5, floor 1e-4 (absolute tolerance 1e-9 below it), kink test 1e-2.
GradCheckOptions model_gradcheck_defaults();

struct ModelGradCheck {
  GradCheckReport report;
  std::vector<std::string> names;  // parameter order used by report.worst_param
};

/// Checks the reverse-mode gradient of L_t with respect to every parameter of
/// a freshly initialized model in 64-bit arithmetic. Images and
/// pseudo-negatives are drawn from `seed`; biases are randomized so that they
/// do not sit at zero.
ModelGradCheck model_gradient_check(const ArchConfig& arch, std::uint64_t seed, std::size_t batch,
                                    double lambda_r = 1.0,
                                    const GradCheckOptions& options = model_gradcheck_defaults());

}  // namespace ocacnn
