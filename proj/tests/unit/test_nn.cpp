#include <cmath>

#include "doctest.h"
#include "ocacnn/gradcheck.hpp"
#include "ocacnn/nn.hpp"
#include "ocacnn/ops.hpp"
#include "support.hpp"

using namespace ocacnn;

namespace {

// Direct-loop cross-correlation used as an oracle for the im2col path.
Tensor64 naive_conv(const Tensor64& x, const Tensor64& w, const Tensor64& b, std::size_t s, std::size_t p) {
  const std::size_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t cout = w.dim(0), k = w.dim(2);
  const std::size_t oh = (h + 2 * p - k) / s + 1, ow = (wd + 2 * p - k) / s + 1;
  Tensor64 y({n, cout, oh, ow});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t o = 0; o < cout; ++o)
      for (std::size_t r = 0; r < oh; ++r)
        for (std::size_t c = 0; c < ow; ++c) {
          double acc = b[o];
          for (std::size_t ci = 0; ci < cin; ++ci)
            for (std::size_t u = 0; u < k; ++u)
              for (std::size_t v = 0; v < k; ++v) {
                const long yy = static_cast<long>(r * s + u) - static_cast<long>(p);
                const long xx = static_cast<long>(c * s + v) - static_cast<long>(p);
                if (yy < 0 || xx < 0 || yy >= static_cast<long>(h) || xx >= static_cast<long>(wd)) continue;
                acc += w[((o * cin + ci) * k + u) * k + v] * x[((i * cin + ci) * h + yy) * wd + xx];
              }
          y[((i * cout + o) * oh + r) * ow + c] = acc;
        }
  return y;
}

Tensor64 run_conv(const Tensor64& x, const Tensor64& w, const Tensor64& b, const ConvSpec& spec) {
  Tape<double> tape;
  auto fn = spec.transposed ? conv_transpose2d<double> : conv2d<double>;
  return fn(tape.constant(x), tape.constant(w), tape.constant(b), spec).value();
}

double dot(const Tensor64& a, const Tensor64& b) {
  REQUIRE(a.shape() == b.shape());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_SUITE("nn-ops") {

TEST_CASE("conv2d examples") {
  const Tensor64 x({1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4});
  const Tensor64 ones({1, 1, 2, 2}, 1.0);
  CHECK(run_conv(x, ones, Tensor64({1}, 0.0), {1, 1, 2, 1, 0, false}).item() == 10.0);

  DeterministicRng rng(1, 0);
  const Tensor64 img = test::random_tensor(rng, {2, 3, 5, 5});
  Tensor64 unit({3, 3, 1, 1}, 0.0);
  for (std::size_t c = 0; c < 3; ++c) unit[c * 3 + c] = 1.0;
  CHECK(bitwise_equal(run_conv(img, unit, Tensor64({3}, 0.0), {3, 3, 1, 1, 0, false}), img));

  CHECK(ConvSpec{3, 16, 3, 2, 1, false}.output_size(32) == 16);
  const ConvSpec too_big{1, 1, 5, 1, 0, false};
  CHECK_THROWS_AS(too_big.output_size(3), ShapeError);
}

TEST_CASE("conv2d matches direct loops") {
  DeterministicRng rng(2, 0);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t cin = 1 + rng.uniform_index(3), cout = 1 + rng.uniform_index(3);
    const std::size_t k = 1 + rng.uniform_index(4), s = 1 + rng.uniform_index(3), p = rng.uniform_index(k);
    const std::size_t h = k + rng.uniform_index(6);
    const Tensor64 x = test::random_tensor(rng, {2, cin, h, h});
    const Tensor64 w = test::random_tensor(rng, {cout, cin, k, k});
    const Tensor64 b = test::random_tensor(rng, {cout});
    const Tensor64 got = run_conv(x, w, b, {cin, cout, k, s, p, false});
    const Tensor64 want = naive_conv(x, w, b, s, p);
    REQUIRE(got.shape() == want.shape());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
}

TEST_CASE("conv_transpose2d examples") {
  CHECK(ConvSpec{1, 1, 4, 2, 1, true}.output_size(2) == 4);
  std::size_t size = 2;
  for (int layer = 0; layer < 4; ++layer) size = ConvSpec{1, 1, 4, 2, 1, true}.output_size(size);
  CHECK(size == 32);

  // A unit impulse scatters one copy of the kernel.
  DeterministicRng rng(3, 0);
  const Tensor64 w = test::random_tensor(rng, {1, 2, 3, 3});
  Tensor64 x({1, 1, 3, 3}, 0.0);
  x[1 * 3 + 2] = 1.0;  // row 1, column 2
  const Tensor64 y = run_conv(x, w, Tensor64({2}, 0.0), {1, 2, 3, 1, 0, true});
  REQUIRE(y.shape() == Shape{1, 2, 5, 5});
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t r = 0; r < 5; ++r)
      for (std::size_t q = 0; q < 5; ++q) {
        const bool inside = r >= 1 && r < 4 && q >= 2;
        const double want = inside ? w[(c * 3 + (r - 1)) * 3 + (q - 2)] : 0.0;
        CHECK(y[(c * 5 + r) * 5 + q] == want);
      }
}

TEST_CASE("conv_transpose2d is the adjoint of conv2d") {
  DeterministicRng rng(4, 0);
  int checked = 0;
  while (checked < 50) {
    const std::size_t cin = 1 + rng.uniform_index(4), cout = 1 + rng.uniform_index(4);
    const std::size_t k = 1 + rng.uniform_index(5), s = 1 + rng.uniform_index(3), p = rng.uniform_index(k);
    const std::size_t n = 1 + rng.uniform_index(2), oh = 1 + rng.uniform_index(5);
    // Input size for which the strided conv uses every row, so that the
    // transposed output has exactly the input's extent.
    const long h_signed = static_cast<long>((oh - 1) * s + k) - 2 * static_cast<long>(p);
    if (h_signed < 1) continue;
    const std::size_t h = static_cast<std::size_t>(h_signed);
    const ConvSpec fwd{cin, cout, k, s, p, false};
    const ConvSpec bwd{cout, cin, k, s, p, true};
    REQUIRE(fwd.output_size(h) == oh);
    REQUIRE(bwd.output_size(oh) == h);

    const Tensor64 x = test::random_tensor(rng, {n, cin, h, h});
    const Tensor64 w = test::random_tensor(rng, {cout, cin, k, k});
    const Tensor64 y = test::random_tensor(rng, {n, cout, oh, oh});
    const double lhs = dot(run_conv(x, w, Tensor64({cout}, 0.0), fwd), y);
    const double rhs = dot(x, run_conv(y, w, Tensor64({cin}, 0.0), bwd));
    CHECK(std::abs(lhs - rhs) <= 1e-8);
    ++checked;
  }
}

TEST_CASE("fully_connected examples") {
  Tape<double> tape;
  const Tensor64 x({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  Tensor64 eye({3, 3}, 0.0);
  for (std::size_t i = 0; i < 3; ++i) eye[i * 3 + i] = 1.0;
  CHECK(bitwise_equal(fully_connected(tape.constant(x), tape.constant(eye), tape.constant(Tensor64({3}, 0.0))).value(), x));

  const auto y = fully_connected(tape.constant(Tensor64({1, 2}, std::vector<double>{1, 2})),
                                 tape.constant(Tensor64({2, 1}, 1.0)), tape.constant(Tensor64({1}, 1.0)));
  CHECK(y.value().item() == 4.0);

  const auto batch = fully_connected(tape.constant(Tensor64({64, 5}, 0.5)), tape.constant(Tensor64({5, 7}, 0.1)),
                                     tape.constant(Tensor64({7}, 0.0)));
  CHECK(batch.value().shape() == Shape{64, 7});
}

TEST_CASE("activation examples") {
  Tape<double> tape;
  const auto r = relu(tape.constant(Tensor64({3}, std::vector<double>{-1, 0, 2})));
  CHECK(r.value()[0] == 0.0);
  CHECK(r.value()[1] == 0.0);
  CHECK(r.value()[2] == 2.0);
  CHECK(sigmoid(tape.constant(Tensor64::scalar(0.0))).value().item() == 0.5);
  const auto t = tanh(tape.constant(Tensor64({3}, std::vector<double>{20.0, -20.0, 0.3})));
  CHECK(std::abs(t.value()[0] - 1.0) <= 1e-6);
  for (double v : t.value().data()) CHECK(std::abs(v) <= 1.0);
  CHECK(parse_activation("tanh") == Activation::tanh);
  CHECK_THROWS_AS(parse_activation("gelu"), ConfigError);

  // Float saturation never reaches the closed bounds.
  Tape<float> ft;
  const auto fs = tanh(ft.constant(Tensor({2}, std::vector<float>{4.0f, -4.0f})));
  CHECK(std::abs(fs.value()[0]) < 1.0f);
}

TEST_CASE("instance norm examples") {
  const double eps = kInstanceNormEps;
  Tape<double> tape;
  const auto flat = instance_norm_2d(tape.constant(Tensor64({1, 1, 2, 2}, 3.0)));
  for (double v : flat.value().data()) CHECK(v == 0.0);

  const auto pm = instance_norm_2d(tape.constant(Tensor64({1, 1, 1, 2}, std::vector<double>{1, -1})));
  CHECK(pm.value()[0] == doctest::Approx(1.0 / std::sqrt(1.0 + eps)).epsilon(1e-14));
  CHECK(pm.value()[1] == doctest::Approx(-1.0 / std::sqrt(1.0 + eps)).epsilon(1e-14));

  DeterministicRng rng(9, 0);
  const auto z = instance_norm_2d(tape.constant(test::random_tensor(rng, {3, 4, 5, 5}, -3.0, 7.0)));
  for (std::size_t g = 0; g < 12; ++g) {
    double m = 0.0, v = 0.0;
    for (std::size_t i = 0; i < 25; ++i) m += z.value()[g * 25 + i];
    m /= 25.0;
    for (std::size_t i = 0; i < 25; ++i) v += (z.value()[g * 25 + i] - m) * (z.value()[g * 25 + i] - m);
    v /= 25.0;
    CHECK(std::abs(m) <= 1e-6);
    CHECK(std::abs(v - 1.0) <= 1e-4);
  }

  const auto c = instance_norm_vec(tape.constant(Tensor64({1, 4}, 5.0)));
  for (double v : c.value().data()) CHECK(v == 0.0);
  const auto two = instance_norm_vec(tape.constant(Tensor64({1, 2}, std::vector<double>{0, 2})));
  CHECK(two.value()[0] == doctest::Approx(-1.0 / std::sqrt(1.0 + eps)).epsilon(1e-14));
  CHECK(two.value()[1] == doctest::Approx(1.0 / std::sqrt(1.0 + eps)).epsilon(1e-14));
  const auto rows = instance_norm_vec(tape.constant(test::random_tensor(rng, {6, 9}, -2.0, 5.0)));
  for (std::size_t r = 0; r < 6; ++r) {
    double m = 0.0;
    for (std::size_t i = 0; i < 9; ++i) m += rows.value()[r * 9 + i];
    CHECK(std::abs(m / 9.0) <= 1e-6);
  }
}

TEST_CASE("layer gradients match finite differences") {
  DeterministicRng rng(12, 0);
  SUBCASE("conv2d") {
    const std::vector<Tensor64> p{test::random_tensor(rng, {2, 2, 5, 5}), test::random_tensor(rng, {3, 2, 3, 3}),
                                  test::random_tensor(rng, {3})};
    const ScalarGraphFn f = [](Tape<double>&, std::span<const Var<double>> v) {
      auto y = conv2d(v[0], v[1], v[2], {2, 3, 3, 2, 1, false});
      return sum(mul(y, y));
    };
    CHECK(gradient_check(f, p, 1e-5).max_rel_error <= 1e-7);
  }
  SUBCASE("conv_transpose2d") {
    const std::vector<Tensor64> p{test::random_tensor(rng, {2, 3, 2, 2}), test::random_tensor(rng, {3, 2, 4, 4}),
                                  test::random_tensor(rng, {2})};
    const ScalarGraphFn f = [](Tape<double>&, std::span<const Var<double>> v) {
      auto y = conv_transpose2d(v[0], v[1], v[2], {3, 2, 4, 2, 1, true});
      return sum(mul(y, y));
    };
    CHECK(gradient_check(f, p, 1e-5).max_rel_error <= 1e-7);
  }
  SUBCASE("fully_connected with activations") {
    const std::vector<Tensor64> p{test::random_tensor(rng, {4, 5}), test::random_tensor(rng, {5, 3}),
                                  test::random_tensor(rng, {3})};
    const ScalarGraphFn f = [](Tape<double>&, std::span<const Var<double>> v) {
      auto y = fully_connected(v[0], v[1], v[2]);
      return add(sum(sigmoid(y)), sum(mul(tanh(y), y)));
    };
    CHECK(gradient_check(f, p, 1e-5).max_rel_error <= 1e-7);
  }
  SUBCASE("instance norms") {
    const std::vector<Tensor64> p{test::random_tensor(rng, {2, 3, 3, 3}), test::random_tensor(rng, {3, 6}),
                                  test::random_tensor(rng, {2, 3, 3, 3}), test::random_tensor(rng, {3, 6})};
    const ScalarGraphFn f = [](Tape<double>&, std::span<const Var<double>> v) {
      return add(sum(mul(instance_norm_2d(v[0]), v[2])), sum(mul(instance_norm_vec(v[1]), v[3])));
    };
    CHECK(gradient_check(f, p, 1e-5).max_rel_error <= 1e-7);
  }
  SUBCASE("relu and clamp away from their kinks") {
    Tensor64 x = test::random_tensor(rng, {20});
    for (auto& v : x.data()) {
      if (std::abs(v) < 0.05) v += 0.1;
      if (std::abs(std::abs(v) - 0.5) < 0.05) v += 0.1;
    }
    const std::vector<Tensor64> p{x};
    const ScalarGraphFn f = [](Tape<double>&, std::span<const Var<double>> v) {
      return add(sum(mul(relu(v[0]), v[0])), sum(mul(clamp(v[0], -0.5, 0.5), v[0])));
    };
    CHECK(gradient_check(f, p, 1e-6).max_rel_error <= 1e-7);
  }
}

}
