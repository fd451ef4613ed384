#include <cmath>

#include "doctest.h"
#include "ocacnn/optim.hpp"

using namespace ocacnn;

TEST_SUITE("optim") {

TEST_CASE("zero gradient leaves parameters unchanged") {
  AdamState state;
  std::map<std::string, Tensor> params{{"w", Tensor({3}, std::vector<float>{1, -2, 3})}};
  const Tensor before = params.at("w");
  adam_step(state, params, {{"w", Tensor({3}, 0.0f)}});
  CHECK(state.step == 1);
  CHECK(bitwise_equal(params.at("w"), before));
  adam_step(state, params, {});
  CHECK(state.step == 2);
  CHECK(bitwise_equal(params.at("w"), before));
}

TEST_CASE("first step moves by lr") {
  AdamState state;
  std::map<std::string, Tensor> params{{"w", Tensor::scalar(0.5f)}};
  adam_step(state, params, {{"w", Tensor::scalar(1.0f)}});
  const double delta = static_cast<double>(params.at("w").item()) - 0.5;
  CHECK(delta == doctest::Approx(-1e-4 / (1.0 + 1e-8)).epsilon(1e-3));
}

TEST_CASE("matches a reference Adam over several steps") {
  AdamConfig cfg{1e-2, 0.9, 0.999, 1e-8};
  AdamState state{cfg, 0, {}, {}};
  std::map<std::string, Tensor> params{{"a", Tensor::scalar(1.0f)}, {"b", Tensor::scalar(1.0f)}};
  const double gs[] = {0.5, -1.5, 2.0, 0.25, -0.75};
  double theta = 1.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 5; ++t) {
    const double g = gs[t - 1];
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1.0 - std::pow(0.9, t)), vh = v / (1.0 - std::pow(0.999, t));
    theta -= 1e-2 * mh / (std::sqrt(vh) + 1e-8);
    const Tensor gt = Tensor::scalar(static_cast<float>(g));
    adam_step(state, params, {{"a", gt}, {"b", gt}});
  }
  CHECK(params.at("a").item() == doctest::Approx(theta).epsilon(1e-6));
  // Identical histories give identical parameters.
  CHECK(params.at("a").item() == params.at("b").item());
}

TEST_CASE("frozen parameters and bad gradients") {
  AdamState state;
  std::map<std::string, Tensor> params{{"a", Tensor::scalar(1.0f)}, {"b", Tensor::scalar(1.0f)}};
  adam_step(state, params, {{"a", Tensor::scalar(1.0f)}, {"b", Tensor::scalar(1.0f)}}, {"b"});
  CHECK(params.at("a").item() != 1.0f);
  CHECK(params.at("b").item() == 1.0f);

  const auto snapshot = params;
  const std::uint64_t step = state.step;
  try {
    adam_step(state, params, {{"a", Tensor::scalar(1.0f)}, {"b", Tensor::scalar(NAN)}});
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("'b'") != std::string::npos);
  }
  CHECK(state.step == step);
  CHECK(bitwise_equal(params.at("a"), snapshot.at("a")));

  CHECK_THROWS_AS(adam_step(state, params, {{"a", Tensor({2}, 0.0f)}}), ShapeError);
  CHECK_THROWS_AS(adam_step(state, params, {{"zzz", Tensor::scalar(0.0f)}}), ContractError);
}

}
