#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string_view>

#include "ocacnn/tensor.hpp"

namespace ocacnn {

/// Stream ids used across the project. Each consumer owns its own stream so
/// that draws on one never shift another.
enum class Stream : std::uint64_t {
  data = 1,
  weights = 2,
  pseudo_negatives = 3,
  shuffle = 4,
  split = 5,
};

std::uint64_t splitmix64(std::uint64_t x);

/// FNV-1a over the bytes of `text`; used to derive per-identity streams from
/// identity names so results do not depend on iteration order.
std::uint64_t stable_hash(std::string_view text);

/// Seeded 64-bit Mersenne Twister on a (seed, stream) pair. Uniforms are built
/// from raw engine bits rather than <random> distributions so the sequence is
/// identical across standard library implementations.
class DeterministicRng {
 public:
  DeterministicRng(std::uint64_t seed, std::uint64_t stream_id);
  DeterministicRng(std::uint64_t seed, Stream stream)
      : DeterministicRng(seed, static_cast<std::uint64_t>(stream)) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_; }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform01();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  /// Uniform integer in [0, bound).
  std::uint64_t uniform_index(std::uint64_t bound);
  /// Standard normal by Box-Muller; the sine branch is returned on the
  /// following call.
  double normal();

  /// Derives an independent generator keyed by `key` on the same seed.
  DeterministicRng fork(std::uint64_t key) const;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

struct PseudoNegConfig {
  double mu = 0.0;
  double sigma = 0.01;  // standard deviation of every coordinate
  std::size_t dim = 256;

  void validate() const;
};

/// n draws of mu + sigma * z, z ~ N(0, I_d).
Tensor sample_gaussian(DeterministicRng& rng, std::size_t n, std::size_t d, const PseudoNegConfig& cfg);

enum class InitScheme { uniform_fan_in };

/// Uniform on +-1/sqrt(fan_in), where fan_in is the product of all dimensions
/// except `out_axis`.
Tensor init_weights(DeterministicRng& rng, const Shape& shape, std::size_t out_axis,
                    InitScheme scheme = InitScheme::uniform_fan_in);

}  // namespace ocacnn
