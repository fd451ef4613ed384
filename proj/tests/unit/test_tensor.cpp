#include <cmath>
#include <sstream>

#include "doctest.h"
#include "ocacnn/gradcheck.hpp"
#include "ocacnn/nn.hpp"
#include "ocacnn/ops.hpp"
#include "ocacnn/rng.hpp"
#include "ocacnn/tensor.hpp"
#include "support.hpp"

using namespace ocacnn;

TEST_SUITE("tensor-core") {

TEST_CASE("tensor construction") {
  Tensor z({2, 2}, 0.0f);
  CHECK(z.size() == 4);
  for (float v : z.data()) CHECK(v == 0.0f);

  Tensor v({3}, std::vector<float>{1, 2, 3});
  CHECK(v[0] == 1.0f);
  CHECK(v[1] == 2.0f);
  CHECK(v[2] == 3.0f);

  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<float>{1, 2, 3, 4, 5}), ShapeError);
  CHECK_THROWS_AS(Tensor({2, 0}), ShapeError);
  CHECK_THROWS_AS(v.reshaped({2, 2}), ShapeError);
  CHECK(v.reshaped({3, 1}).shape() == Shape{3, 1});
}

TEST_CASE("matmul examples") {
  const Tensor64 eye({2, 2}, std::vector<double>{1, 0, 0, 1});
  const Tensor64 m({2, 2}, std::vector<double>{1, 2, 3, 4});
  CHECK(bitwise_equal(matmul(eye, m), m));

  const Tensor64 row({1, 2}, std::vector<double>{1, 2});
  const Tensor64 col({2, 1}, std::vector<double>{3, 4});
  CHECK(matmul(row, col).item() == 11.0);

  CHECK_THROWS_AS(matmul(Tensor64({2, 3}), Tensor64({2, 3})), ShapeError);
}

TEST_CASE("matmul agrees with a naive triple loop") {
  DeterministicRng rng(7, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 1 + rng.uniform_index(9), k = 1 + rng.uniform_index(9), n = 1 + rng.uniform_index(9);
    const Tensor64 a = test::random_tensor(rng, {m, k});
    const Tensor64 b = test::random_tensor(rng, {k, n});
    const Tensor64 c = matmul(a, b);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
        CHECK(c[i * n + j] == doctest::Approx(s).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("backward examples") {
  SUBCASE("identity") {
    Tape<double> tape;
    auto x = tape.leaf(Tensor64::scalar(2.5));
    tape.backward(x);
    CHECK(tape.grad(x).item() == 1.0);
  }
  SUBCASE("fan-out product") {
    Tape<double> tape;
    auto x = tape.leaf(Tensor64::scalar(3.0));
    tape.backward(mul(x, x));
    CHECK(tape.grad(x).item() == 6.0);
  }
  SUBCASE("sum rule") {
    Tape<double> tape;
    auto x = tape.leaf(Tensor64::scalar(1.0));
    auto y = tape.leaf(Tensor64::scalar(-4.0));
    tape.backward(add(x, y));
    CHECK(tape.grad(x).item() == 1.0);
    CHECK(tape.grad(y).item() == 1.0);
  }
  SUBCASE("non-scalar root is rejected") {
    Tape<double> tape;
    auto x = tape.leaf(Tensor64({2}, 1.0));
    CHECK_THROWS_AS(tape.backward(x), ContractError);
  }
  SUBCASE("untouched leaf has zero gradient") {
    Tape<double> tape;
    auto x = tape.leaf(Tensor64({3}, 1.0));
    auto y = tape.leaf(Tensor64({3}, 2.0));
    tape.backward(sum(x));
    const Tensor64 gy = tape.grad(y);
    for (double g : gy.data()) CHECK(g == 0.0);
  }
}

TEST_CASE("gradient_check examples") {
  DeterministicRng rng(3, 0);
  const std::vector<Tensor64> params{test::random_tensor(rng, {4, 3})};

  const ScalarGraphFn f_sum = [](Tape<double>&, std::span<const Var<double>> p) { return sum(p[0]); };
  const auto grads = analytic_gradients(f_sum, params);
  for (double g : grads[0].data()) CHECK(g == 1.0);
  CHECK(gradient_check(f_sum, params, 1e-6).max_rel_error <= 1e-9);

  const std::vector<Tensor64> zeros{Tensor64({5}, 0.0)};
  const ScalarGraphFn f_sig = [](Tape<double>&, std::span<const Var<double>> p) { return sum(sigmoid(p[0])); };
  const auto sig_grads = analytic_gradients(f_sig, zeros);
  for (double g : sig_grads[0].data()) CHECK(g == 0.25);
  CHECK(gradient_check(f_sig, zeros, 1e-5).max_rel_error <= 1e-9);
}

TEST_CASE("elementwise op gradients") {
  DeterministicRng rng(11, 0);
  const std::vector<Tensor64> params{test::random_tensor(rng, {3, 4}), test::random_tensor(rng, {3, 4}),
                                     test::random_tensor(rng, {4, 2}), test::random_tensor(rng, {2, 4})};
  const ScalarGraphFn f = [](Tape<double>&, std::span<const Var<double>> p) {
    auto prod = mul(sub(p[0], scale(p[1], 0.5)), add(p[0], p[1]));
    auto mm = matmul(prod, p[2]);
    auto stacked = concat_rows(mm, matmul(p[3], p[2]));
    auto flat = reshape(stacked, {10});
    return add(mean(mul(flat, flat)), sum(tanh(prod)));
  };
  CHECK(gradient_check(f, params, 1e-6).max_rel_error <= 1e-7);
}

TEST_CASE("tensor serialization round-trips bitwise") {
  DeterministicRng rng(5, 0);
  const Tensor64 t = test::random_tensor(rng, {2, 3, 4});
  std::stringstream buffer;
  write_tensor(buffer, t);
  CHECK(bitwise_equal(read_tensor<double>(buffer), t));

  const Tensor f = t.cast<float>();
  std::stringstream fbuf;
  write_tensor(fbuf, f);
  CHECK(bitwise_equal(read_tensor<float>(fbuf), f));

  // A float record read at double precision widens exactly.
  std::stringstream widen;
  write_tensor(widen, f);
  CHECK(bitwise_equal(read_tensor<double>(widen), f.cast<double>()));

  std::stringstream junk("not a tensor");
  CHECK_THROWS_AS(read_tensor<float>(junk), FormatError);
}

}
