#include <cmath>
#include <set>

#include "doctest.h"
#include "ocacnn/rng.hpp"

using namespace ocacnn;

TEST_SUITE("rng-sampler") {

TEST_CASE("streams are reproducible and distinct") {
  DeterministicRng a(42, Stream::data), b(42, Stream::data), c(42, Stream::weights), d(43, Stream::data);
  bool differs_stream = false, differs_seed = false;
  for (int i = 0; i < 100; ++i) {
    const auto va = a.next_u64();
    CHECK(va == b.next_u64());
    differs_stream |= va != c.next_u64();
    differs_seed |= va != d.next_u64();
  }
  CHECK(differs_stream);
  CHECK(differs_seed);

  DeterministicRng parent(1, Stream::split);
  auto f1 = parent.fork(stable_hash("id00"));
  auto f2 = parent.fork(stable_hash("id00"));
  auto f3 = parent.fork(stable_hash("id01"));
  const auto x1 = f1.next_u64();
  CHECK(x1 == f2.next_u64());
  CHECK(x1 != f3.next_u64());
}

TEST_CASE("stable_hash is FNV-1a") {
  CHECK(stable_hash("") == 0xcbf29ce484222325ULL);
  CHECK(stable_hash("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("uniforms stay in range") {
  DeterministicRng rng(7, 0);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const auto k = rng.uniform_index(5);
    CHECK(k < 5);
    seen.insert(k);
  }
  CHECK(seen.size() == 5);
}

TEST_CASE("sample_gaussian") {
  const PseudoNegConfig cfg{0.0, 0.01, 128};
  DeterministicRng r1(1, Stream::pseudo_negatives), r2(1, Stream::pseudo_negatives);
  const Tensor g = sample_gaussian(r1, 64, 128, cfg);
  CHECK(g.shape() == Shape{64, 128});
  CHECK(bitwise_equal(g, sample_gaussian(r2, 64, 128, cfg)));

  DeterministicRng big(5, Stream::pseudo_negatives);
  const Tensor s = sample_gaussian(big, 1000, 1000, PseudoNegConfig{0.0, 0.01, 1000});
  double mean = 0.0;
  for (float v : s.data()) mean += v;
  mean /= static_cast<double>(s.size());
  double var = 0.0;
  for (float v : s.data()) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(s.size()));
  CHECK(std::abs(mean) <= 4.0 * (0.01 / 1000.0));
  CHECK(std::abs(sd - 0.01) <= 0.01 * 0.01);

  CHECK_THROWS_AS((PseudoNegConfig{0.0, 0.0, 8}.validate()), ContractError);
  CHECK_THROWS_AS(sample_gaussian(big, 2, 3, cfg), ShapeError);
}

TEST_CASE("init_weights") {
  DeterministicRng r1(3, Stream::weights), r2(3, Stream::weights);
  const Tensor w = init_weights(r1, {100, 7}, 1);  // fan_in = 100
  for (float v : w.data()) {
    CHECK(v >= -0.1f);
    CHECK(v <= 0.1f);
  }
  CHECK(bitwise_equal(w, init_weights(r2, {100, 7}, 1)));

  DeterministicRng r3(4, Stream::weights);
  const Tensor many = init_weights(r3, {1, 100000}, 1);  // fan_in = 1, bound 1
  double mean = 0.0;
  for (float v : many.data()) mean += v;
  mean /= 1e5;
  // Uniform on [-a, a] has standard deviation a / sqrt(3).
  const double se = (1.0 / std::sqrt(3.0)) / std::sqrt(1e5);
  CHECK(std::abs(mean) <= 3.0 * se);
}

}
