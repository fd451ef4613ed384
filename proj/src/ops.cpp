#include "ocacnn/ops.hpp"

#include <numeric>

#include "gemm.hpp"

namespace ocacnn {

namespace {

template <typename T>
void require_same_shape(const char* op, const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()) + " differ");
  }
}

template <typename T>
void check_matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: cannot multiply " + shape_str(a.shape()) + " by " +
                     shape_str(b.shape()));
  }
}

}  // namespace

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  check_matmul(a, b);
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  BasicTensor<T> out(Shape{m, n});
  detail::gemm<T>(false, false, m, n, k, T{1}, a.raw(), b.raw(), T{0}, out.raw());
  return out;
}

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  BasicTensor<T> out = matmul(a.value(), b.value());
  const std::size_t ia = a.index(), ib = b.index();
  return a.tape().record("matmul", {a, b}, std::move(out),
                         [ia, ib](Tape<T>& tape, const BasicTensor<T>& g) {
                           const auto& av = tape.value(ia);
                           const auto& bv = tape.value(ib);
                           const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
                           if (tape.requires_grad(ia)) {
                             detail::gemm<T>(false, true, m, k, n, T{1}, g.raw(), bv.raw(), T{1},
                                             tape.grad_buffer(ia).data());
                           }
                           if (tape.requires_grad(ib)) {
                             detail::gemm<T>(true, false, k, n, m, T{1}, av.raw(), g.raw(), T{1},
                                             tape.grad_buffer(ib).data());
                           }
                         });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  require_same_shape("add", a.value(), b.value());
  BasicTensor<T> out = a.value();
  const auto bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const std::size_t ia = a.index(), ib = b.index();
  return a.tape().record("add", {a, b}, std::move(out),
                         [ia, ib](Tape<T>& tape, const BasicTensor<T>& g) {
                           if (tape.requires_grad(ia)) tape.accumulate(ia, g.data());
                           if (tape.requires_grad(ib)) tape.accumulate(ib, g.data());
                         });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  require_same_shape("sub", a.value(), b.value());
  BasicTensor<T> out = a.value();
  const auto bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const std::size_t ia = a.index(), ib = b.index();
  return a.tape().record("sub", {a, b}, std::move(out),
                         [ia, ib](Tape<T>& tape, const BasicTensor<T>& g) {
                           if (tape.requires_grad(ia)) tape.accumulate(ia, g.data());
                           if (tape.requires_grad(ib)) {
                             auto dst = tape.grad_buffer(ib);
                             for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= g[i];
                           }
                         });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  require_same_shape("mul", a.value(), b.value());
  BasicTensor<T> out = a.value();
  const auto bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const std::size_t ia = a.index(), ib = b.index();
  return a.tape().record("mul", {a, b}, std::move(out),
                         [ia, ib](Tape<T>& tape, const BasicTensor<T>& g) {
                           const auto av = tape.value(ia).data();
                           const auto bv = tape.value(ib).data();
                           if (tape.requires_grad(ia)) {
                             auto dst = tape.grad_buffer(ia);
                             for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i] * bv[i];
                           }
                           if (tape.requires_grad(ib)) {
                             auto dst = tape.grad_buffer(ib);
                             for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i] * av[i];
                           }
                         });
}

template <typename T>
Var<T> scale(Var<T> a, T factor) {
  BasicTensor<T> out = a.value();
  for (T& v : out.data()) v *= factor;
  const std::size_t ia = a.index();
  return a.tape().record("scale", {a}, std::move(out),
                         [ia, factor](Tape<T>& tape, const BasicTensor<T>& g) {
                           auto dst = tape.grad_buffer(ia);
                           for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += factor * g[i];
                         });
}

template <typename T>
Var<T> sum(Var<T> a) {
  const auto values = a.value().data();
  const T total = std::accumulate(values.begin(), values.end(), T{0});
  const std::size_t ia = a.index();
  return a.tape().record("sum", {a}, BasicTensor<T>::scalar(total),
                         [ia](Tape<T>& tape, const BasicTensor<T>& g) {
                           const T gv = g[0];
                           for (T& d : tape.grad_buffer(ia)) d += gv;
                         });
}

template <typename T>
Var<T> mean(Var<T> a) {
  return scale(sum(a), T{1} / static_cast<T>(a.value().size()));
}

template <typename T>
Var<T> reshape(Var<T> a, Shape shape) {
  BasicTensor<T> out = a.value().reshaped(std::move(shape));
  const std::size_t ia = a.index();
  return a.tape().record("reshape", {a}, std::move(out),
                         [ia](Tape<T>& tape, const BasicTensor<T>& g) {
                           tape.accumulate(ia, g.data());
                         });
}

template <typename T>
Var<T> concat_rows(Var<T> a, Var<T> b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.rank() != bv.rank() ||
      !std::equal(av.shape().begin() + 1, av.shape().end(), bv.shape().begin() + 1)) {
    throw ShapeError("concat_rows: incompatible shapes " + shape_str(av.shape()) + " and " +
                     shape_str(bv.shape()));
  }
  Shape shape = av.shape();
  shape[0] += bv.dim(0);
  std::vector<T> values;
  values.reserve(av.size() + bv.size());
  values.insert(values.end(), av.data().begin(), av.data().end());
  values.insert(values.end(), bv.data().begin(), bv.data().end());
  const std::size_t ia = a.index(), ib = b.index(), split = av.size();
  return a.tape().record(
      "concat_rows", {a, b}, BasicTensor<T>(std::move(shape), std::move(values)),
      [ia, ib, split](Tape<T>& tape, const BasicTensor<T>& g) {
        const auto gs = g.data();
        if (tape.requires_grad(ia)) tape.accumulate(ia, gs.subspan(0, split));
        if (tape.requires_grad(ib)) tape.accumulate(ib, gs.subspan(split));
      });
}

#define OCACNN_INSTANTIATE(T)                                          \
  template BasicTensor<T> matmul(const BasicTensor<T>&, const BasicTensor<T>&); \
  template Var<T> matmul(Var<T>, Var<T>);                              \
  template Var<T> add(Var<T>, Var<T>);                                 \
  template Var<T> sub(Var<T>, Var<T>);                                 \
  template Var<T> mul(Var<T>, Var<T>);                                 \
  template Var<T> scale(Var<T>, T);                                    \
  template Var<T> sum(Var<T>);                                         \
  template Var<T> mean(Var<T>);                                        \
  template Var<T> reshape(Var<T>, Shape);                              \
  template Var<T> concat_rows(Var<T>, Var<T>);

OCACNN_INSTANTIATE(float)
OCACNN_INSTANTIATE(double)

#undef OCACNN_INSTANTIATE

}  // namespace ocacnn
