#include "ocacnn/train.hpp"

#include <cmath>

#include "ocacnn/ops.hpp"

namespace ocacnn {

TrainMode parse_train_mode(std::string_view name) {
  if (name == "full") return TrainMode::full;
  if (name == "classifier_only") return TrainMode::classifier_only;
  if (name == "autoencoder_only") return TrainMode::autoencoder_only;
  throw ConfigError("unknown mode '" + std::string(name) +
                    "' (expected full, classifier_only or autoencoder_only)");
}

std::string_view to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::full: return "full";
    case TrainMode::classifier_only: return "classifier_only";
    case TrainMode::autoencoder_only: return "autoencoder_only";
  }
  return "?";
}

double TrainOptions::effective_lambda() const {
  return mode == TrainMode::classifier_only ? 0.0 : lambda_r;
}

std::uint64_t target_seed(std::uint64_t seed, const std::string& target) {
  return splitmix64(seed ^ stable_hash(target));
}

Trainer::Trainer(ModelParams params, TrainOptions options, std::uint64_t run_seed)
    : params_(std::move(params)),
      options_(options),
      pseudo_rng_(run_seed, Stream::pseudo_negatives),
      frozen_(params_.arch.frozen_parameters()) {
  params_.arch.validate();
  adam_.config = options_.adam;
  if (!(options_.lambda_r >= 0.0)) throw ContractError("lambda_r must be >= 0");
}

StepLosses Trainer::step(const Tensor& images) {
  Tape<float> tape;
  ModelGraph<float> graph(tape, params_, true);
  Var<float> x = tape.constant(images);
  Var<float> features = graph.extract_features(x);
  const std::size_t n = images.dim(0);

  StepLosses out;
  out.step = steps_ + 1;
  std::optional<Var<float>> lc, lr;
  if (options_.mode != TrainMode::autoencoder_only) {
    const PseudoNegConfig cfg{options_.pseudo_mu, options_.pseudo_sigma, params_.arch.feature_dim};
    Var<float> pseudo = tape.constant(sample_gaussian(pseudo_rng_, n, cfg.dim, cfg));
    auto head = graph.classify(features, pseudo);
    lc = classification_loss(head.probs, head.labels);
    out.lc = lc->value().item();
  }
  {
    Var<float> rec = graph.decode(features);
    lr = reconstruction_loss(x, rec, options_.recon);
    out.lr = lr->value().item();
  }
  Var<float> total = options_.mode == TrainMode::autoencoder_only
                         ? *lr
                         : total_loss(*lc, *lr, options_.effective_lambda());
  // The logged total is formed in double from the logged terms so that it
  // matches them exactly; the float graph value drives the gradients.
  out.lt = out.lc ? total_loss(*out.lc, out.lr, options_.effective_lambda()) : out.lr;
  if (!std::isfinite(total.value().item()) || !std::isfinite(out.lt) || !std::isfinite(out.lr) ||
      (out.lc && !std::isfinite(*out.lc))) {
    throw NumericalError("non-finite loss at step " + std::to_string(out.step));
  }

  tape.backward(total);
  std::map<std::string, Tensor> grads;
  for (const auto& [name, var] : graph.params()) {
    if (var.requires_grad()) grads.emplace(name, tape.grad(var));
  }
  adam_step(adam_, params_.tensors, grads, frozen_);
  ++steps_;
  return out;
}

TrainResult train_target(const DatasetManifest& manifest, const ImageStore& store,
                         const ProtocolView& view, const ArchConfig& arch,
                         const TrainOptions& options, const TrainCallbacks& callbacks) {
  if (store.image_shape() != Shape{arch.image_channels, arch.image_size, arch.image_size}) {
    throw ShapeError("dataset images " + shape_str(store.image_shape()) +
                     " do not match the architecture input size");
  }
  const std::uint64_t run_seed = target_seed(options.seed, view.target);
  Trainer trainer(init_params(arch, run_seed), options, run_seed);
  BatchIterator batches(view.train, options.batch_size, DeterministicRng(run_seed, Stream::shuffle));

  TrainResult result;
  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    for (std::size_t b = 0; b < batches.batches_per_epoch(); ++b) {
      const Batch batch = next_batch(batches, store, manifest);
      StepLosses losses = trainer.step(batch.images);
      if (callbacks.on_step) callbacks.on_step(losses);
      result.history.push_back(losses);
    }
    if (callbacks.on_epoch) callbacks.on_epoch(epoch, trainer);
  }
  result.params = trainer.params();
  result.optimizer = trainer.optimizer();
  return result;
}

GradCheckOptions model_gradcheck_defaults() {
  GradCheckOptions o;
  o.step = 1e-5;
  o.floor = 1e-4;
  o.nonsmooth_tol = 1e-2;
  return o;
}

ModelGradCheck model_gradient_check(const ArchConfig& arch, std::uint64_t seed, std::size_t batch,
                                    double lambda_r, const GradCheckOptions& options) {
  arch.validate();
  BasicModelParams<double> params = init_params(arch, seed).cast<double>();
  DeterministicRng rng(seed, Stream::data);
  for (auto& [name, t] : params.tensors) {
    if (name.ends_with(".bias")) {
      for (auto& v : t.data()) v = rng.uniform(-0.1, 0.1);
    }
  }
  Tensor64 images({batch, arch.image_channels, arch.image_size, arch.image_size});
  for (auto& v : images.data()) v = rng.uniform(-1.0, 1.0);
  const PseudoNegConfig cfg{0.0, 0.01, arch.feature_dim};
  DeterministicRng pseudo_rng(seed, Stream::pseudo_negatives);
  const Tensor64 pseudo = sample_gaussian(pseudo_rng, batch, arch.feature_dim, cfg).cast<double>();

  ModelGradCheck out;
  std::vector<Tensor64> values;
  for (const auto& [name, t] : params.tensors) {
    out.names.push_back(name);
    values.push_back(t);
  }
  const ScalarGraphFn f = [&](Tape<double>& tape, std::span<const Var<double>> leaves) {
    std::map<std::string, Var<double>> bound;
    for (std::size_t i = 0; i < leaves.size(); ++i) bound.emplace(out.names[i], leaves[i]);
    ModelGraph<double> graph(tape, arch, std::move(bound));
    Var<double> x = tape.constant(images);
    Var<double> features = graph.extract_features(x);
    auto head = graph.classify(features, tape.constant(pseudo));
    Var<double> lc = classification_loss(head.probs, head.labels);
    Var<double> lr = reconstruction_loss(x, graph.decode(features));
    return total_loss(lc, lr, lambda_r);
  };
  out.report = gradient_check(f, values, options);
  return out;
}

}  // namespace ocacnn
