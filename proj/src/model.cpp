#include "ocacnn/model.hpp"

#include <cmath>
#include <numbers>

#include "ocacnn/ops.hpp"
#include "ocacnn/rng.hpp"
#include "text_util.hpp"

namespace ocacnn {

namespace {

std::string conv_name(std::size_t i) { return "extractor.conv" + std::to_string(i); }
std::string tconv_name(std::size_t i) { return "decoder.tconv" + std::to_string(i); }

std::string format_extractor(const std::vector<ExtractorLayer>& layers) {
  std::string out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (i) out += ',';
    out += std::to_string(l.out_channels) + ':' + std::to_string(l.kernel) + ':' +
           std::to_string(l.stride) + ':' + std::to_string(l.padding);
  }
  return out;
}

std::string format_decoder(const std::vector<DecoderLayer>& layers) {
  std::string out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (i) out += ',';
    out += std::to_string(l.in_channels) + ':' + std::to_string(l.out_channels) + ':' +
           std::to_string(l.kernel) + ':' + std::to_string(l.stride) + ':' +
           std::to_string(l.padding);
  }
  return out;
}

// Extractor layers accept "out" (k3 s2 p1 implied) or "out:k:s:p".
std::vector<ExtractorLayer> parse_extractor(std::string_view key, std::string_view text) {
  std::vector<ExtractorLayer> layers;
  for (auto item : detail::split(detail::trim(text), ',')) {
    const auto f = detail::parse_size_list(key, item, ':');
    if (f.size() == 1) {
      layers.push_back({f[0], 3, 2, 1});
    } else if (f.size() == 4) {
      layers.push_back({f[0], f[1], f[2], f[3]});
    } else {
      throw ConfigError(std::string(key) + ": layer '" + std::string(item) + "' is not out or out:k:s:p");
    }
  }
  return layers;
}

// Decoder layers accept "in:out" (k4 s2 p1 implied) or "in:out:k:s:p".
std::vector<DecoderLayer> parse_decoder(std::string_view key, std::string_view text) {
  std::vector<DecoderLayer> layers;
  for (auto item : detail::split(detail::trim(text), ',')) {
    const auto f = detail::parse_size_list(key, item, ':');
    if (f.size() == 2) {
      layers.push_back({f[0], f[1], 4, 2, 1});
    } else if (f.size() == 5) {
      layers.push_back({f[0], f[1], f[2], f[3], f[4]});
    } else {
      throw ConfigError(std::string(key) + ": layer '" + std::string(item) + "' is not in:out or in:out:k:s:p");
    }
  }
  return layers;
}

}  // namespace

ArchConfig ArchConfig::desk() { return ArchConfig{}; }

ArchConfig ArchConfig::paper() {
  ArchConfig a;
  a.image_size = 16;
  a.feature_dim = 1024;
  a.decoder_reshape = {1024, 1, 1};
  a.decoder = {{1024, 256, 4, 2, 1}, {256, 64, 4, 2, 1}, {64, 16, 4, 2, 1}, {16, 3, 4, 2, 1}};
  return a;
}

ArchConfig ArchConfig::tiny() {
  ArchConfig a;
  a.image_size = 4;
  a.feature_dim = 8;
  a.extractor = {{4, 3, 2, 1}, {8, 3, 2, 1}};
  a.decoder_reshape = {2, 2, 2};
  a.decoder = {{2, 4, 4, 2, 1}, {4, 4, 3, 1, 1}, {4, 4, 3, 1, 1}, {4, 3, 3, 1, 1}};
  return a;
}

ArchConfig ArchConfig::preset(std::string_view name) {
  if (name == "desk") return desk();
  if (name == "paper") return paper();
  if (name == "tiny") return tiny();
  throw ConfigError("unknown architecture preset '" + std::string(name) + "'");
}

std::vector<ConvSpec> ArchConfig::extractor_specs() const {
  std::vector<ConvSpec> specs;
  std::size_t channels = image_channels;
  for (const auto& l : extractor) {
    specs.push_back({channels, l.out_channels, l.kernel, l.stride, l.padding, false});
    channels = l.out_channels;
  }
  return specs;
}

std::vector<ConvSpec> ArchConfig::decoder_specs() const {
  std::vector<ConvSpec> specs;
  for (const auto& l : decoder) {
    specs.push_back({l.in_channels, l.out_channels, l.kernel, l.stride, l.padding, true});
  }
  return specs;
}

std::size_t ArchConfig::extractor_flat_dim() const {
  std::size_t size = image_size;
  for (const auto& spec : extractor_specs()) size = spec.output_size(size);
  const std::size_t channels = extractor.empty() ? image_channels : extractor.back().out_channels;
  return channels * size * size;
}

void ArchConfig::validate() const {
  if (image_size < 1 || image_channels < 1 || feature_dim < 2) {
    throw ShapeError("arch: image size, channels must be >= 1 and feature_dim >= 2");
  }
  if (extractor.empty()) throw ShapeError("arch: extractor needs at least one convolution");
  (void)extractor_flat_dim();
  if (decoder_reshape.size() != 3 || shape_numel(decoder_reshape) != feature_dim) {
    throw ShapeError("arch: decoder reshape " + shape_str(decoder_reshape) +
                     " must have three dims whose product equals feature_dim " +
                     std::to_string(feature_dim));
  }
  if (decoder.size() != 4) {
    throw ShapeError("arch: decoder must have exactly 4 transposed convolutions, got " +
                     std::to_string(decoder.size()));
  }
  std::size_t channels = decoder_reshape[0];
  std::size_t h = decoder_reshape[1], w = decoder_reshape[2];
  for (std::size_t i = 0; i < decoder.size(); ++i) {
    if (decoder[i].in_channels != channels) {
      throw ShapeError("arch: decoder layer " + std::to_string(i) + " expects " +
                       std::to_string(decoder[i].in_channels) + " input channels, gets " +
                       std::to_string(channels));
    }
    const auto spec = decoder_specs()[i];
    h = spec.output_size(h);
    w = spec.output_size(w);
    channels = decoder[i].out_channels;
  }
  if (channels != image_channels || h != image_size || w != image_size) {
    throw ShapeError("arch: decoder produces [" + std::to_string(channels) + "," +
                     std::to_string(h) + "," + std::to_string(w) + "], images are [" +
                     std::to_string(image_channels) + "," + std::to_string(image_size) + "," +
                     std::to_string(image_size) + "]");
  }
}

std::vector<std::pair<std::string, Shape>> ArchConfig::parameter_shapes() const {
  std::vector<std::pair<std::string, Shape>> shapes;
  const auto conv_specs = extractor_specs();
  for (std::size_t i = 0; i < conv_specs.size(); ++i) {
    const auto& spec = conv_specs[i];
    shapes.emplace_back(conv_name(i) + ".weight",
                        Shape{spec.out_channels, spec.in_channels, spec.kernel, spec.kernel});
    shapes.emplace_back(conv_name(i) + ".bias", Shape{spec.out_channels});
  }
  shapes.emplace_back("extractor.fc.weight", Shape{extractor_flat_dim(), feature_dim});
  shapes.emplace_back("extractor.fc.bias", Shape{feature_dim});
  if (classifier == ClassifierKind::hidden) {
    shapes.emplace_back("classifier.hidden.weight", Shape{feature_dim, feature_dim});
    shapes.emplace_back("classifier.hidden.bias", Shape{feature_dim});
  }
  shapes.emplace_back("classifier.out.weight", Shape{feature_dim, 1});
  shapes.emplace_back("classifier.out.bias", Shape{1});
  const auto specs = decoder_specs();
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    shapes.emplace_back(tconv_name(i) + ".weight", Shape{s.in_channels, s.out_channels, s.kernel, s.kernel});
    shapes.emplace_back(tconv_name(i) + ".bias", Shape{s.out_channels});
  }
  return shapes;
}

std::size_t ArchConfig::parameter_count() const {
  std::size_t total = 0;
  for (const auto& [name, shape] : parameter_shapes()) total += shape_numel(shape);
  return total;
}

std::set<std::string> ArchConfig::frozen_parameters() const {
  std::set<std::string> frozen;
  if (!freeze_conv) return frozen;
  for (std::size_t i = 0; i < extractor.size(); ++i) {
    frozen.insert(conv_name(i) + ".weight");
    frozen.insert(conv_name(i) + ".bias");
  }
  return frozen;
}

std::vector<std::pair<std::string, std::string>> ArchConfig::to_entries() const {
  return {
      {"image_size", std::to_string(image_size)},
      {"image_channels", std::to_string(image_channels)},
      {"feature_dim", std::to_string(feature_dim)},
      {"extractor_layers", format_extractor(extractor)},
      {"decoder_reshape", detail::join(decoder_reshape, ',')},
      {"decoder_layers", format_decoder(decoder)},
      {"classifier", std::string(to_string(classifier))},
      {"freeze_conv", freeze_conv ? "true" : "false"},
  };
}

void ArchConfig::set_entry(std::string_view key, std::string_view value) {
  if (key == "image_size") {
    image_size = detail::parse_int<std::size_t>(key, value);
  } else if (key == "image_channels") {
    image_channels = detail::parse_int<std::size_t>(key, value);
  } else if (key == "feature_dim") {
    feature_dim = detail::parse_int<std::size_t>(key, value);
  } else if (key == "extractor_layers") {
    extractor = parse_extractor(key, value);
  } else if (key == "decoder_reshape") {
    decoder_reshape = detail::parse_size_list(key, value, ',');
  } else if (key == "decoder_layers") {
    decoder = parse_decoder(key, value);
  } else if (key == "classifier") {
    const auto v = detail::trim(value);
    if (v == "hidden") {
      classifier = ClassifierKind::hidden;
    } else if (v == "single") {
      classifier = ClassifierKind::single;
    } else {
      throw ConfigError("classifier: expected hidden or single, got '" + std::string(v) + "'");
    }
  } else if (key == "freeze_conv") {
    freeze_conv = detail::parse_bool(key, value);
  } else {
    throw ConfigError("unknown architecture key '" + std::string(key) + "'");
  }
}

std::string_view to_string(ClassifierKind kind) {
  return kind == ClassifierKind::hidden ? "hidden" : "single";
}

template <typename T>
const BasicTensor<T>& BasicModelParams<T>::at(const std::string& name) const {
  const auto it = tensors.find(name);
  if (it == tensors.end()) throw ContractError("model has no parameter '" + name + "'");
  return it->second;
}

template struct BasicModelParams<float>;
template struct BasicModelParams<double>;

ModelParams init_params(const ArchConfig& arch, std::uint64_t seed) {
  arch.validate();
  DeterministicRng rng(seed, Stream::weights);
  ModelParams params{arch, {}};
  for (const auto& [name, shape] : arch.parameter_shapes()) {
    const bool is_bias = name.ends_with(".bias");
    if (is_bias) {
      params.tensors.emplace(name, Tensor(shape));
      continue;
    }
    // Output axis: conv [out,in,k,k] -> 0; fc [in,out] and tconv [in,out,k,k] -> 1.
    const std::size_t out_axis = name.starts_with("extractor.conv") ? 0 : 1;
    params.tensors.emplace(name, init_weights(rng, shape, out_axis));
  }
  return params;
}

template <typename T>
ModelGraph<T>::ModelGraph(Tape<T>& tape, const BasicModelParams<T>& params, bool trainable)
    : tape_(tape), arch_(params.arch) {
  const auto frozen = arch_.frozen_parameters();
  for (const auto& [name, shape] : arch_.parameter_shapes()) {
    const auto& value = params.at(name);
    if (value.shape() != shape) {
      throw ShapeError("parameter '" + name + "' has shape " + shape_str(value.shape()) +
                       ", architecture expects " + shape_str(shape));
    }
    vars_.emplace(name, tape_.leaf(value, trainable && !frozen.contains(name)));
  }
}

template <typename T>
ModelGraph<T>::ModelGraph(Tape<T>& tape, const ArchConfig& arch, std::map<std::string, Var<T>> vars)
    : tape_(tape), arch_(arch), vars_(std::move(vars)) {
  for (const auto& [name, shape] : arch_.parameter_shapes()) {
    const auto it = vars_.find(name);
    if (it == vars_.end()) throw ContractError("missing parameter '" + name + "'");
    if (it->second.value().shape() != shape) {
      throw ShapeError("parameter '" + name + "' has shape " + shape_str(it->second.value().shape()) +
                       ", architecture expects " + shape_str(shape));
    }
  }
}

template <typename T>
Var<T> ModelGraph<T>::param(const std::string& name) const {
  const auto it = vars_.find(name);
  if (it == vars_.end()) throw ContractError("model has no parameter '" + name + "'");
  return it->second;
}

template <typename T>
Var<T> ModelGraph<T>::extract_features(Var<T> x) const {
  const auto& xs = x.shape();
  if (xs.size() != 4 || xs[1] != arch_.image_channels || xs[2] != arch_.image_size ||
      xs[3] != arch_.image_size) {
    throw ShapeError("extract_features: images " + shape_str(xs) + " do not match [N," +
                     std::to_string(arch_.image_channels) + "," + std::to_string(arch_.image_size) +
                     "," + std::to_string(arch_.image_size) + "]");
  }
  Var<T> h = x;
  const auto specs = arch_.extractor_specs();
  for (std::size_t i = 0; i < specs.size(); ++i) {
    h = relu(conv2d(h, param(conv_name(i) + ".weight"), param(conv_name(i) + ".bias"), specs[i]));
  }
  h = reshape(h, Shape{xs[0], arch_.extractor_flat_dim()});
  return fully_connected(h, param("extractor.fc.weight"), param("extractor.fc.bias"));
}

template <typename T>
ClassifierGraph<T> ModelGraph<T>::classify(Var<T> features, std::optional<Var<T>> pseudo) const {
  const auto& fs = features.shape();
  if (fs.size() != 2 || fs[1] != arch_.feature_dim) {
    throw ShapeError("classify: features " + shape_str(fs) + " are not [N," +
                     std::to_string(arch_.feature_dim) + "]");
  }
  const std::size_t n = fs[0];
  Var<T> inputs = instance_norm_vec(features);
  std::size_t rows = n;
  if (pseudo) {
    if (pseudo->shape() != fs) {
      throw ShapeError("classify: pseudo-negatives " + shape_str(pseudo->shape()) +
                       " do not match features " + shape_str(fs));
    }
    inputs = concat_rows(inputs, *pseudo);
    rows = 2 * n;
  }
  Var<T> h = inputs;
  if (arch_.classifier == ClassifierKind::hidden) {
    h = relu(fully_connected(h, param("classifier.hidden.weight"), param("classifier.hidden.bias")));
  }
  Var<T> logits = reshape(fully_connected(h, param("classifier.out.weight"), param("classifier.out.bias")),
                          Shape{rows});
  Var<T> probs = clamp(sigmoid(logits), static_cast<T>(kProbClamp), static_cast<T>(1.0 - kProbClamp));
  BasicTensor<T> labels(Shape{rows}, T{0});
  for (std::size_t i = 0; i < n; ++i) labels[i] = T{1};
  return {inputs, logits, probs, std::move(labels)};
}

template <typename T>
Var<T> ModelGraph<T>::decode(Var<T> features) const {
  const auto& fs = features.shape();
  if (fs.size() != 2 || fs[1] != arch_.feature_dim) {
    throw ShapeError("decode: features " + shape_str(fs) + " are not [N," +
                     std::to_string(arch_.feature_dim) + "]");
  }
  const auto& r = arch_.decoder_reshape;
  Var<T> h = reshape(features, Shape{fs[0], r[0], r[1], r[2]});
  const auto specs = arch_.decoder_specs();
  for (std::size_t i = 0; i < specs.size(); ++i) {
    h = conv_transpose2d(h, param(tconv_name(i) + ".weight"), param(tconv_name(i) + ".bias"), specs[i]);
    h = i + 1 < specs.size() ? relu(instance_norm_2d(h)) : tanh(h);
  }
  return h;
}

template <typename T>
Var<T> classification_loss(Var<T> probs, const BasicTensor<T>& labels) {
  const auto& p = probs.value();
  if (p.size() != labels.size()) {
    throw ShapeError("classification_loss: " + std::to_string(p.size()) + " probabilities, " +
                     std::to_string(labels.size()) + " labels");
  }
  const double rows = static_cast<double>(p.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double y = labels[i];
    total += y * std::log2(static_cast<double>(p[i])) + (1.0 - y) * std::log2(1.0 - p[i]);
  }
  const T loss = static_cast<T>(-total / rows);
  const std::size_t ip = probs.index();
  return probs.tape().record(
      "classification_loss", {probs}, BasicTensor<T>::scalar(loss),
      [ip, labels, rows](Tape<T>& tape, const BasicTensor<T>& g) {
        const auto& pv = tape.value(ip);
        auto dp = tape.grad_buffer(ip);
        const double scale = -static_cast<double>(g[0]) / (rows * std::numbers::ln2);
        for (std::size_t i = 0; i < dp.size(); ++i) {
          const double y = labels[i];
          const double p = pv[i];
          dp[i] += static_cast<T>(scale * (y / p - (1.0 - y) / (1.0 - p)));
        }
      });
}

template <typename T>
Var<T> reconstruction_loss(Var<T> x, Var<T> x_rec, ReconReduction reduction) {
  const auto& xv = x.value();
  const auto& rv = x_rec.value();
  if (xv.shape() != rv.shape() || xv.rank() < 2) {
    throw ShapeError("reconstruction_loss: shapes " + shape_str(xv.shape()) + " and " +
                     shape_str(rv.shape()) + " differ");
  }
  const std::size_t n = xv.dim(0);
  const std::size_t per_sample = xv.size() / n;
  double divisor = static_cast<double>(n);
  if (reduction == ReconReduction::mean) divisor *= static_cast<double>(per_sample);
  double total = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    double sample = 0.0;
    for (std::size_t i = s * per_sample; i < (s + 1) * per_sample; ++i) {
      sample += std::abs(static_cast<double>(xv[i]) - rv[i]);
    }
    total += sample;
  }
  const std::size_t ix = x.index(), ir = x_rec.index();
  return x.tape().record("reconstruction_loss", {x, x_rec},
                         BasicTensor<T>::scalar(static_cast<T>(total / divisor)),
                         [ix, ir, divisor](Tape<T>& tape, const BasicTensor<T>& g) {
                           const auto& xv = tape.value(ix);
                           const auto& rv = tape.value(ir);
                           const T step = static_cast<T>(g[0] / divisor);
                           std::span<T> dr, dx;
                           if (tape.requires_grad(ir)) dr = tape.grad_buffer(ir);
                           if (tape.requires_grad(ix)) dx = tape.grad_buffer(ix);
                           for (std::size_t i = 0; i < xv.size(); ++i) {
                             const T d = rv[i] - xv[i];
                             const T sign = d > T{0} ? T{1} : (d < T{0} ? T{-1} : T{0});
                             if (!dr.empty()) dr[i] += step * sign;
                             if (!dx.empty()) dx[i] -= step * sign;
                           }
                         });
}

template <typename T>
Var<T> total_loss(Var<T> lc, Var<T> lr, double lambda_r) {
  if (!(lambda_r >= 0.0)) throw ContractError("total_loss: lambda_r must be >= 0");
  return add(lc, scale(lr, static_cast<T>(lambda_r)));
}

template class ModelGraph<float>;
template class ModelGraph<double>;
template Var<float> classification_loss(Var<float>, const Tensor&);
template Var<double> classification_loss(Var<double>, const Tensor64&);
template Var<float> reconstruction_loss(Var<float>, Var<float>, ReconReduction);
template Var<double> reconstruction_loss(Var<double>, Var<double>, ReconReduction);
template Var<float> total_loss(Var<float>, Var<float>, double);
template Var<double> total_loss(Var<double>, Var<double>, double);

Tensor extract_features(const ModelParams& params, const Tensor& images) {
  Tape<float> tape;
  ModelGraph<float> graph(tape, params, false);
  return graph.extract_features(tape.constant(images)).value();
}

ClassifierBatch classify(const ModelParams& params, const Tensor& features, const Tensor& pseudo) {
  Tape<float> tape;
  ModelGraph<float> graph(tape, params, false);
  auto out = graph.classify(tape.constant(features), tape.constant(pseudo));
  return {out.inputs.value(), out.labels, out.probs.value()};
}

Tensor decode(const ModelParams& params, const Tensor& features) {
  Tape<float> tape;
  ModelGraph<float> graph(tape, params, false);
  return graph.decode(tape.constant(features)).value();
}

double classification_loss(const Tensor& probs, const Tensor& labels) {
  if (probs.size() != labels.size()) throw ShapeError("classification_loss: size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double y = labels[i];
    const double p = std::clamp(static_cast<double>(probs[i]), kProbClamp, 1.0 - kProbClamp);
    total += y * std::log2(p) + (1.0 - y) * std::log2(1.0 - p);
  }
  return -total / static_cast<double>(probs.size());
}

double reconstruction_loss(const Tensor& x, const Tensor& x_rec, ReconReduction reduction) {
  if (x.shape() != x_rec.shape() || x.rank() < 2) {
    throw ShapeError("reconstruction_loss: shapes " + shape_str(x.shape()) + " and " +
                     shape_str(x_rec.shape()) + " differ");
  }
  const std::size_t n = x.dim(0);
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) total += std::abs(static_cast<double>(x[i]) - x_rec[i]);
  double divisor = static_cast<double>(n);
  if (reduction == ReconReduction::mean) divisor *= static_cast<double>(x.size() / n);
  return total / divisor;
}

double total_loss(double lc, double lr, double lambda_r) {
  if (!(lambda_r >= 0.0)) throw ContractError("total_loss: lambda_r must be >= 0");
  return lc + lambda_r * lr;
}

}  // namespace ocacnn
