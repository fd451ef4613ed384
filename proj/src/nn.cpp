#include "ocacnn/nn.hpp"

#include <cmath>
#include <vector>

#include "gemm.hpp"

namespace ocacnn {

namespace {

struct Geometry {
  std::size_t channels, height, width;  // image side
  std::size_t out_height, out_width;    // sliding-window side
  std::size_t kernel, stride, padding;

  std::size_t col_rows() const { return channels * kernel * kernel; }
  std::size_t col_cols() const { return out_height * out_width; }
};

// image [C,H,W] -> cols [C*k*k, Ho*Wo]
template <typename T>
void im2col(const T* image, const Geometry& g, T* cols) {
  const std::size_t k = g.kernel, s = g.stride;
  const auto pad = static_cast<std::ptrdiff_t>(g.padding);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.channels; ++c) {
    const T* plane = image + c * g.height * g.width;
    for (std::size_t u = 0; u < k; ++u) {
      for (std::size_t v = 0; v < k; ++v, ++row) {
        T* dst = cols + row * g.col_cols();
        for (std::size_t i = 0; i < g.out_height; ++i) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(i * s + u) - pad;
          const bool row_ok = y >= 0 && y < static_cast<std::ptrdiff_t>(g.height);
          for (std::size_t j = 0; j < g.out_width; ++j) {
            const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(j * s + v) - pad;
            const bool ok = row_ok && x >= 0 && x < static_cast<std::ptrdiff_t>(g.width);
            dst[i * g.out_width + j] = ok ? plane[y * static_cast<std::ptrdiff_t>(g.width) + x] : T{0};
          }
        }
      }
    }
  }
}

// cols [C*k*k, Ho*Wo] accumulated into image [C,H,W]
template <typename T>
void col2im(const T* cols, const Geometry& g, T* image) {
  const std::size_t k = g.kernel, s = g.stride;
  const auto pad = static_cast<std::ptrdiff_t>(g.padding);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.channels; ++c) {
    T* plane = image + c * g.height * g.width;
    for (std::size_t u = 0; u < k; ++u) {
      for (std::size_t v = 0; v < k; ++v, ++row) {
        const T* src = cols + row * g.col_cols();
        for (std::size_t i = 0; i < g.out_height; ++i) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(i * s + u) - pad;
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(g.height)) continue;
          for (std::size_t j = 0; j < g.out_width; ++j) {
            const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(j * s + v) - pad;
            if (x < 0 || x >= static_cast<std::ptrdiff_t>(g.width)) continue;
            plane[y * static_cast<std::ptrdiff_t>(g.width) + x] += src[i * g.out_width + j];
          }
        }
      }
    }
  }
}

void check_spec(const ConvSpec& spec) {
  if (spec.in_channels == 0 || spec.out_channels == 0 || spec.kernel == 0 || spec.stride == 0) {
    throw ShapeError("conv spec: channels, kernel and stride must be positive");
  }
}

template <typename T>
void check_conv_operands(const char* op, const BasicTensor<T>& x, const BasicTensor<T>& w,
                         const BasicTensor<T>& b, const ConvSpec& spec, std::size_t w0,
                         std::size_t w1) {
  check_spec(spec);
  if (x.rank() != 4 || x.dim(1) != spec.in_channels) {
    throw ShapeError(std::string(op) + ": input " + shape_str(x.shape()) + " does not have " +
                     std::to_string(spec.in_channels) + " channels");
  }
  const Shape expected_w{w0, w1, spec.kernel, spec.kernel};
  if (w.shape() != expected_w) {
    throw ShapeError(std::string(op) + ": weight " + shape_str(w.shape()) + ", expected " +
                     shape_str(expected_w));
  }
  if (b.shape() != Shape{spec.out_channels}) {
    throw ShapeError(std::string(op) + ": bias " + shape_str(b.shape()) + ", expected [" +
                     std::to_string(spec.out_channels) + "]");
  }
}

template <typename T>
void add_channel_bias(T* y, const T* bias, std::size_t channels, std::size_t plane) {
  for (std::size_t o = 0; o < channels; ++o) {
    for (std::size_t i = 0; i < plane; ++i) y[o * plane + i] += bias[o];
  }
}

template <typename T>
void accumulate_channel_bias_grad(const T* g, std::span<T> db, std::size_t plane) {
  for (std::size_t o = 0; o < db.size(); ++o) {
    T acc{0};
    for (std::size_t i = 0; i < plane; ++i) acc += g[o * plane + i];
    db[o] += acc;
  }
}

template <typename T>
T sigmoid_value(T x) {
  if (x >= T{0}) return T{1} / (T{1} + std::exp(-x));
  const T e = std::exp(x);
  return e / (T{1} + e);
}

// Standardizes contiguous groups of `group` elements.
template <typename T>
Var<T> normalize_groups(const char* op, Var<T> x, std::size_t group, double eps) {
  const auto& xv = x.value();
  const std::size_t groups = xv.size() / group;
  BasicTensor<T> out(xv.shape());
  std::vector<T> inv_std(groups);
  for (std::size_t gi = 0; gi < groups; ++gi) {
    const T* src = xv.raw() + gi * group;
    T* dst = out.raw() + gi * group;
    double mean = 0.0;
    for (std::size_t i = 0; i < group; ++i) mean += src[i];
    mean /= static_cast<double>(group);
    double var = 0.0;
    for (std::size_t i = 0; i < group; ++i) {
      const double d = src[i] - mean;
      var += d * d;
    }
    var /= static_cast<double>(group);
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[gi] = static_cast<T>(inv);
    for (std::size_t i = 0; i < group; ++i) dst[i] = static_cast<T>((src[i] - mean) * inv);
  }
  const std::size_t ix = x.index();
  const std::size_t iy = x.tape().size();  // index the recorded node will receive
  return x.tape().record(
      op, {x}, std::move(out),
      [ix, iy, group, inv_std = std::move(inv_std)](Tape<T>& tape, const BasicTensor<T>& g) {
        const auto& y = tape.value(iy);
        auto dx = tape.grad_buffer(ix);
        for (std::size_t gi = 0; gi < inv_std.size(); ++gi) {
          const std::size_t base = gi * group;
          double g_mean = 0.0, gy_mean = 0.0;
          for (std::size_t i = 0; i < group; ++i) {
            g_mean += g[base + i];
            gy_mean += static_cast<double>(g[base + i]) * y[base + i];
          }
          g_mean /= static_cast<double>(group);
          gy_mean /= static_cast<double>(group);
          const double inv = inv_std[gi];
          for (std::size_t i = 0; i < group; ++i) {
            dx[base + i] += static_cast<T>(inv * (g[base + i] - g_mean - y[base + i] * gy_mean));
          }
        }
      });
}

}  // namespace

std::size_t ConvSpec::output_size(std::size_t input) const {
  check_spec(*this);
  const auto i = static_cast<std::ptrdiff_t>(input);
  const auto k = static_cast<std::ptrdiff_t>(kernel);
  const auto s = static_cast<std::ptrdiff_t>(stride);
  const auto p = static_cast<std::ptrdiff_t>(padding);
  std::ptrdiff_t out = 0;
  if (transposed) {
    out = (i - 1) * s - 2 * p + k;
  } else {
    const std::ptrdiff_t span = i + 2 * p - k;
    out = span < 0 ? 0 : span / s + 1;
  }
  if (input == 0 || out < 1) {
    throw ShapeError(std::string(transposed ? "transposed conv" : "conv") + ": input size " +
                     std::to_string(input) + " with kernel " + std::to_string(kernel) +
                     ", stride " + std::to_string(stride) + ", padding " +
                     std::to_string(padding) + " gives an empty output");
  }
  return static_cast<std::size_t>(out);
}

template <typename T>
Var<T> conv2d(Var<T> x, Var<T> w, Var<T> b, const ConvSpec& spec) {
  if (spec.transposed) throw ContractError("conv2d: spec is marked transposed");
  const auto& xv = x.value();
  check_conv_operands("conv2d", xv, w.value(), b.value(), spec, spec.out_channels,
                      spec.in_channels);
  const std::size_t n = xv.dim(0);
  const Geometry geo{spec.in_channels, xv.dim(2), xv.dim(3), spec.output_size(xv.dim(2)),
                     spec.output_size(xv.dim(3)), spec.kernel, spec.stride, spec.padding};
  const std::size_t in_plane = geo.channels * geo.height * geo.width;
  const std::size_t out_plane = geo.col_cols();

  BasicTensor<T> out(Shape{n, spec.out_channels, geo.out_height, geo.out_width});
  std::vector<T> cols(geo.col_rows() * geo.col_cols());
  for (std::size_t s = 0; s < n; ++s) {
    im2col(xv.raw() + s * in_plane, geo, cols.data());
    T* y = out.raw() + s * spec.out_channels * out_plane;
    detail::gemm<T>(false, false, spec.out_channels, out_plane, geo.col_rows(), T{1},
                    w.value().raw(), cols.data(), T{0}, y);
    add_channel_bias(y, b.value().raw(), spec.out_channels, out_plane);
  }

  const std::size_t ix = x.index(), iw = w.index(), ib = b.index();
  const std::size_t cout = spec.out_channels;
  return x.tape().record(
      "conv2d", {x, w, b}, std::move(out),
      [ix, iw, ib, geo, n, cout](Tape<T>& tape, const BasicTensor<T>& g) {
        const auto& xv = tape.value(ix);
        const auto& wv = tape.value(iw);
        const std::size_t in_plane = geo.channels * geo.height * geo.width;
        const std::size_t out_plane = geo.col_cols();
        std::vector<T> cols(geo.col_rows() * geo.col_cols());
        const bool need_x = tape.requires_grad(ix);
        const bool need_w = tape.requires_grad(iw);
        T* dw = need_w ? tape.grad_buffer(iw).data() : nullptr;
        T* dx = need_x ? tape.grad_buffer(ix).data() : nullptr;
        for (std::size_t s = 0; s < n; ++s) {
          const T* gy = g.raw() + s * cout * out_plane;
          if (need_w) {
            im2col(xv.raw() + s * in_plane, geo, cols.data());
            detail::gemm<T>(false, true, cout, geo.col_rows(), out_plane, T{1}, gy, cols.data(),
                            T{1}, dw);
          }
          if (need_x) {
            detail::gemm<T>(true, false, geo.col_rows(), out_plane, cout, T{1}, wv.raw(), gy,
                            T{0}, cols.data());
            col2im(cols.data(), geo, dx + s * in_plane);
          }
        }
        if (tape.requires_grad(ib)) {
          auto db = tape.grad_buffer(ib);
          for (std::size_t s = 0; s < n; ++s) {
            accumulate_channel_bias_grad(g.raw() + s * cout * out_plane, db, out_plane);
          }
        }
      });
}

template <typename T>
Var<T> conv_transpose2d(Var<T> x, Var<T> w, Var<T> b, const ConvSpec& spec) {
  if (!spec.transposed) throw ContractError("conv_transpose2d: spec is not marked transposed");
  const auto& xv = x.value();
  check_conv_operands("conv_transpose2d", xv, w.value(), b.value(), spec, spec.in_channels,
                      spec.out_channels);
  const std::size_t n = xv.dim(0);
  const std::size_t cin = spec.in_channels, cout = spec.out_channels;
  // The output image plays the role of a conv2d input whose sliding windows
  // land on the input grid.
  const Geometry geo{cout, spec.output_size(xv.dim(2)), spec.output_size(xv.dim(3)), xv.dim(2),
                     xv.dim(3), spec.kernel, spec.stride, spec.padding};
  const std::size_t in_plane = geo.col_cols();
  const std::size_t out_plane = geo.height * geo.width;

  BasicTensor<T> out(Shape{n, cout, geo.height, geo.width});
  std::vector<T> cols(geo.col_rows() * geo.col_cols());
  for (std::size_t s = 0; s < n; ++s) {
    detail::gemm<T>(true, false, geo.col_rows(), in_plane, cin, T{1}, w.value().raw(),
                    xv.raw() + s * cin * in_plane, T{0}, cols.data());
    T* y = out.raw() + s * cout * out_plane;
    col2im(cols.data(), geo, y);
    add_channel_bias(y, b.value().raw(), cout, out_plane);
  }

  const std::size_t ix = x.index(), iw = w.index(), ib = b.index();
  return x.tape().record(
      "conv_transpose2d", {x, w, b}, std::move(out),
      [ix, iw, ib, geo, n, cin, cout](Tape<T>& tape, const BasicTensor<T>& g) {
        const auto& xv = tape.value(ix);
        const auto& wv = tape.value(iw);
        const std::size_t in_plane = geo.col_cols();
        const std::size_t out_plane = geo.height * geo.width;
        std::vector<T> cols(geo.col_rows() * geo.col_cols());
        const bool need_x = tape.requires_grad(ix);
        const bool need_w = tape.requires_grad(iw);
        T* dw = need_w ? tape.grad_buffer(iw).data() : nullptr;
        T* dx = need_x ? tape.grad_buffer(ix).data() : nullptr;
        if (need_x || need_w) {
          for (std::size_t s = 0; s < n; ++s) {
            im2col(g.raw() + s * cout * out_plane, geo, cols.data());
            if (need_x) {
              detail::gemm<T>(false, false, cin, in_plane, geo.col_rows(), T{1}, wv.raw(),
                              cols.data(), T{1}, dx + s * cin * in_plane);
            }
            if (need_w) {
              detail::gemm<T>(false, true, cin, geo.col_rows(), in_plane, T{1},
                              xv.raw() + s * cin * in_plane, cols.data(), T{1}, dw);
            }
          }
        }
        if (tape.requires_grad(ib)) {
          auto db = tape.grad_buffer(ib);
          for (std::size_t s = 0; s < n; ++s) {
            accumulate_channel_bias_grad(g.raw() + s * cout * out_plane, db, out_plane);
          }
        }
      });
}

template <typename T>
Var<T> fully_connected(Var<T> x, Var<T> w, Var<T> b) {
  const auto& xv = x.value();
  const auto& wv = w.value();
  if (xv.rank() != 2 || wv.rank() != 2 || xv.dim(1) != wv.dim(0) ||
      b.value().shape() != Shape{wv.dim(1)}) {
    throw ShapeError("fully_connected: x " + shape_str(xv.shape()) + ", w " +
                     shape_str(wv.shape()) + ", b " + shape_str(b.value().shape()));
  }
  const std::size_t n = xv.dim(0), din = wv.dim(0), dout = wv.dim(1);
  BasicTensor<T> out(Shape{n, dout});
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(b.value().raw(), dout, out.raw() + r * dout);
  }
  detail::gemm<T>(false, false, n, dout, din, T{1}, xv.raw(), wv.raw(), T{1}, out.raw());

  const std::size_t ix = x.index(), iw = w.index(), ib = b.index();
  return x.tape().record(
      "fully_connected", {x, w, b}, std::move(out),
      [ix, iw, ib, n, din, dout](Tape<T>& tape, const BasicTensor<T>& g) {
        if (tape.requires_grad(ix)) {
          detail::gemm<T>(false, true, n, din, dout, T{1}, g.raw(), tape.value(iw).raw(), T{1},
                          tape.grad_buffer(ix).data());
        }
        if (tape.requires_grad(iw)) {
          detail::gemm<T>(true, false, din, dout, n, T{1}, tape.value(ix).raw(), g.raw(), T{1},
                          tape.grad_buffer(iw).data());
        }
        if (tape.requires_grad(ib)) {
          auto db = tape.grad_buffer(ib);
          for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < dout; ++c) db[c] += g[r * dout + c];
          }
        }
      });
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "sigmoid") return Activation::sigmoid;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(Activation kind) {
  switch (kind) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
  }
  return "?";
}

template <typename T>
Var<T> apply_activation(Activation kind, Var<T> x) {
  BasicTensor<T> out = x.value();
  switch (kind) {
    case Activation::relu:
      for (T& v : out.data()) v = v > T{0} ? v : T{0};
      break;
    case Activation::tanh:
      for (T& v : out.data()) v = std::tanh(v);
      break;
    case Activation::sigmoid:
      for (T& v : out.data()) v = sigmoid_value(v);
      break;
  }
  const std::size_t ix = x.index();
  const std::size_t iy = x.tape().size();
  return x.tape().record(to_string(kind), {x}, std::move(out),
                         [ix, iy, kind](Tape<T>& tape, const BasicTensor<T>& g) {
                           const auto in = tape.value(ix).data();
                           const auto y = tape.value(iy).data();
                           auto dx = tape.grad_buffer(ix);
                           switch (kind) {
                             case Activation::relu:
                               for (std::size_t i = 0; i < dx.size(); ++i) {
                                 if (in[i] > T{0}) dx[i] += g[i];
                               }
                               break;
                             case Activation::tanh:
                               for (std::size_t i = 0; i < dx.size(); ++i) {
                                 dx[i] += g[i] * (T{1} - y[i] * y[i]);
                               }
                               break;
                             case Activation::sigmoid:
                               for (std::size_t i = 0; i < dx.size(); ++i) {
                                 dx[i] += g[i] * y[i] * (T{1} - y[i]);
                               }
                               break;
                           }
                         });
}

template <typename T>
Var<T> instance_norm_2d(Var<T> x, double eps) {
  const auto& xv = x.value();
  if (xv.rank() != 4) throw ShapeError("instance_norm_2d: expected [N,C,H,W], got " + shape_str(xv.shape()));
  return normalize_groups("instance_norm_2d", x, xv.dim(2) * xv.dim(3), eps);
}

template <typename T>
Var<T> instance_norm_vec(Var<T> x, double eps) {
  const auto& xv = x.value();
  if (xv.rank() != 2 || xv.dim(1) < 2) {
    throw ShapeError("instance_norm_vec: expected [N,D] with D >= 2, got " + shape_str(xv.shape()));
  }
  return normalize_groups("instance_norm_vec", x, xv.dim(1), eps);
}

template <typename T>
Var<T> clamp(Var<T> x, T lo, T hi) {
  BasicTensor<T> out = x.value();
  for (T& v : out.data()) v = std::min(std::max(v, lo), hi);
  const std::size_t ix = x.index();
  return x.tape().record("clamp", {x}, std::move(out),
                         [ix, lo, hi](Tape<T>& tape, const BasicTensor<T>& g) {
                           const auto in = tape.value(ix).data();
                           auto dx = tape.grad_buffer(ix);
                           for (std::size_t i = 0; i < dx.size(); ++i) {
                             if (in[i] > lo && in[i] < hi) dx[i] += g[i];
                           }
                         });
}

#define OCACNN_INSTANTIATE(T)                                                   \
  template Var<T> conv2d(Var<T>, Var<T>, Var<T>, const ConvSpec&);            \
  template Var<T> conv_transpose2d(Var<T>, Var<T>, Var<T>, const ConvSpec&);  \
  template Var<T> fully_connected(Var<T>, Var<T>, Var<T>);                    \
  template Var<T> apply_activation(Activation, Var<T>);                       \
  template Var<T> instance_norm_2d(Var<T>, double);                           \
  template Var<T> instance_norm_vec(Var<T>, double);                          \
  template Var<T> clamp(Var<T>, T, T);

OCACNN_INSTANTIATE(float)
OCACNN_INSTANTIATE(double)

#undef OCACNN_INSTANTIATE

}  // namespace ocacnn
