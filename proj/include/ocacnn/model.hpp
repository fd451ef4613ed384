#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ocacnn/nn.hpp"
#include "ocacnn/tape.hpp"

namespace ocacnn {

struct ExtractorLayer {
  std::size_t out_channels = 16;
  std::size_t kernel = 3;
  std::size_t stride = 2;
  std::size_t padding = 1;
  bool operator==(const ExtractorLayer&) const = default;
};

struct DecoderLayer {
  std::size_t in_channels = 64;
  std::size_t out_channels = 32;
  std::size_t kernel = 4;
  std::size_t stride = 2;
  std::size_t padding = 1;
  bool operator==(const DecoderLayer&) const = default;
};

/// hidden: FC(D->D) + ReLU + FC(D->1); single: FC(D->1).
enum class ClassifierKind { hidden, single };

struct ArchConfig {
  std::size_t image_size = 32;
  std::size_t image_channels = 3;
  std::size_t feature_dim = 256;
  std::vector<ExtractorLayer> extractor{{16, 3, 2, 1}, {32, 3, 2, 1}, {64, 3, 2, 1}};
  Shape decoder_reshape{64, 2, 2};
  std::vector<DecoderLayer> decoder{{64, 32, 4, 2, 1}, {32, 16, 4, 2, 1}, {16, 8, 4, 2, 1}, {8, 3, 4, 2, 1}};
  ClassifierKind classifier = ClassifierKind::hidden;
  bool freeze_conv = false;

  /// 32x32x3 images, D = 256.
  static ArchConfig desk();
  /// Decoder channel widths 1024-256-64-16-3 from a [1024,1,1] reshape; 16x16 images.
  static ArchConfig paper();
  /// 4x4x3 images, D = 8, two extractor convs; sized for finite-difference checks.
  static ArchConfig tiny();
  static ArchConfig preset(std::string_view name);

  /// Throws ShapeError when the layer chain does not close.
  void validate() const;

  std::vector<ConvSpec> extractor_specs() const;
  std::vector<ConvSpec> decoder_specs() const;
  /// Flattened size of the last extractor feature map.
  std::size_t extractor_flat_dim() const;

  /// Every learnable tensor in construction order.
  std::vector<std::pair<std::string, Shape>> parameter_shapes() const;
  std::size_t parameter_count() const;
  /// Names excluded from updates (the extractor convolutions when freeze_conv).
  std::set<std::string> frozen_parameters() const;

  /// key=value entries, keys without the "arch." prefix.
  std::vector<std::pair<std::string, std::string>> to_entries() const;
  /// Applies one entry; throws ConfigError for unknown keys or bad values.
  void set_entry(std::string_view key, std::string_view value);

  bool operator==(const ArchConfig&) const = default;
};

std::string_view to_string(ClassifierKind kind);

template <typename T>
struct BasicModelParams {
  ArchConfig arch;
  std::map<std::string, BasicTensor<T>> tensors;

  const BasicTensor<T>& at(const std::string& name) const;

  template <typename U>
  BasicModelParams<U> cast() const {
    BasicModelParams<U> out{arch, {}};
    for (const auto& [name, t] : tensors) out.tensors.emplace(name, t.template cast<U>());
    return out;
  }
};

using ModelParams = BasicModelParams<float>;

/// Conv and FC weights uniform on +-1/sqrt(fan_in) from the weights stream of
/// `seed`; biases zero.
ModelParams init_params(const ArchConfig& arch, std::uint64_t seed);

/// Output of the classifier head. Rows [0, N) are the normalized features
/// (label 1); rows [N, 2N) are pseudo-negatives (label 0).
template <typename T>
struct ClassifierGraph {
  Var<T> inputs;
  Var<T> logits;  // [rows]
  Var<T> probs;   // [rows], clamped
  BasicTensor<T> labels;
};

inline constexpr double kProbClamp = 1e-7;

/// The three networks bound to one tape.
template <typename T>
class ModelGraph {
 public:
  /// With `trainable`, every non-frozen parameter becomes a gradient leaf.
  ModelGraph(Tape<T>& tape, const BasicModelParams<T>& params, bool trainable);
  /// Uses existing variables of `tape` as the parameters.
  ModelGraph(Tape<T>& tape, const ArchConfig& arch, std::map<std::string, Var<T>> vars);

  const ArchConfig& arch() const { return arch_; }
  Var<T> param(const std::string& name) const;
  const std::map<std::string, Var<T>>& params() const { return vars_; }

  /// x [N,C,H,W] -> [N,D].
  Var<T> extract_features(Var<T> x) const;
  /// Normalizes the feature rows, appends the pseudo-negative rows when given,
  /// and runs the classifier head.
  ClassifierGraph<T> classify(Var<T> features, std::optional<Var<T>> pseudo) const;
  /// [N,D] -> [N,C,H,W] in (-1, 1).
  Var<T> decode(Var<T> features) const;

 private:
  Tape<T>& tape_;
  ArchConfig arch_;
  std::map<std::string, Var<T>> vars_;
};

enum class ReconReduction { sum, mean };

/// -(1/2N) sum [y log2 p + (1 - y) log2 (1 - p)] over all rows.
template <typename T>
Var<T> classification_loss(Var<T> probs, const BasicTensor<T>& labels);

/// (1/N) sum_n ||x_n - x_rec_n||_1; `mean` divides further by C*H*W.
template <typename T>
Var<T> reconstruction_loss(Var<T> x, Var<T> x_rec, ReconReduction reduction = ReconReduction::sum);

/// L_c + lambda_r * L_r.
template <typename T>
Var<T> total_loss(Var<T> lc, Var<T> lr, double lambda_r);

// Value-level forms of the operations above.

struct ClassifierBatch {
  Tensor inputs;  // [2N,D]
  Tensor labels;  // [2N]
  Tensor probs;   // [2N]
};

Tensor extract_features(const ModelParams& params, const Tensor& images);
ClassifierBatch classify(const ModelParams& params, const Tensor& features, const Tensor& pseudo);
Tensor decode(const ModelParams& params, const Tensor& features);
double classification_loss(const Tensor& probs, const Tensor& labels);
double reconstruction_loss(const Tensor& x, const Tensor& x_rec,
                           ReconReduction reduction = ReconReduction::sum);
double total_loss(double lc, double lr, double lambda_r);

}  // namespace ocacnn
