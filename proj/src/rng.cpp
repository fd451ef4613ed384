#include "ocacnn/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace ocacnn {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t stable_hash(std::string_view text) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

DeterministicRng::DeterministicRng(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_(stream_id), engine_(splitmix64(splitmix64(seed) ^ splitmix64(~stream_id))) {}

double DeterministicRng::uniform01() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t DeterministicRng::uniform_index(std::uint64_t bound) {
  if (bound == 0) throw ContractError("uniform_index: bound must be positive");
  // Rejection sampling keeps the result unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t v = engine_();
  while (v >= limit) v = engine_();
  return v % bound;
}

double DeterministicRng::normal() {
  if (spare_) {
    const double v = *spare_;
    spare_.reset();
    return v;
  }
  const double u1 = 1.0 - uniform01();  // (0, 1]
  const double u2 = uniform01();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  return radius * std::cos(angle);
}

DeterministicRng DeterministicRng::fork(std::uint64_t key) const {
  return DeterministicRng(seed_, splitmix64(stream_ ^ splitmix64(key)));
}

void PseudoNegConfig::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ContractError("pseudo-negative sigma must be > 0");
  if (!std::isfinite(mu)) throw ContractError("pseudo-negative mu must be finite");
  if (dim < 1) throw ContractError("pseudo-negative dim must be >= 1");
}

Tensor sample_gaussian(DeterministicRng& rng, std::size_t n, std::size_t d, const PseudoNegConfig& cfg) {
  cfg.validate();
  if (n < 1) throw ContractError("sample_gaussian: n must be >= 1");
  if (d != cfg.dim) {
    throw ShapeError("sample_gaussian: requested dim " + std::to_string(d) +
                     " but config dim is " + std::to_string(cfg.dim));
  }
  Tensor out(Shape{n, d});
  for (float& v : out.data()) v = static_cast<float>(cfg.mu + cfg.sigma * rng.normal());
  return out;
}

Tensor init_weights(DeterministicRng& rng, const Shape& shape, std::size_t out_axis, InitScheme scheme) {
  if (out_axis >= shape.size()) throw ContractError("init_weights: output axis out of range");
  std::size_t fan_in = 1;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != out_axis) fan_in *= shape[i];
  }
  Tensor out(shape);
  switch (scheme) {
    case InitScheme::uniform_fan_in: {
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (float& v : out.data()) v = static_cast<float>(rng.uniform(-bound, bound));
      break;
    }
  }
  return out;
}

}  // namespace ocacnn
