#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "ocacnn/tape.hpp"

namespace ocacnn {

struct ConvSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  bool transposed = false;

  /// Spatial output size for an input of size `input`; throws ShapeError when
  /// the result would be < 1.
  std::size_t output_size(std::size_t input) const;

  bool operator==(const ConvSpec&) const = default;
};

/// Cross-correlation. x [N,Cin,H,W], w [Cout,Cin,k,k], b [Cout].
template <typename T>
Var<T> conv2d(Var<T> x, Var<T> w, Var<T> b, const ConvSpec& spec);

/// Adjoint of conv2d with the same kernel layout read as [Cin,Cout,k,k]:
/// each input element scatters a scaled kernel at stride s, then p is cropped
/// from every border. x [N,Cin,H,W], w [Cin,Cout,k,k], b [Cout].
template <typename T>
Var<T> conv_transpose2d(Var<T> x, Var<T> w, Var<T> b, const ConvSpec& spec);

/// y = x w + b with x [N,Din], w [Din,Dout], b [Dout].
template <typename T>
Var<T> fully_connected(Var<T> x, Var<T> w, Var<T> b);

enum class Activation { relu, tanh, sigmoid };

Activation parse_activation(std::string_view name);
std::string_view to_string(Activation kind);

template <typename T>
Var<T> apply_activation(Activation kind, Var<T> x);

template <typename T>
Var<T> relu(Var<T> x) { return apply_activation(Activation::relu, x); }
template <typename T>
Var<T> tanh(Var<T> x) { return apply_activation(Activation::tanh, x); }
template <typename T>
Var<T> sigmoid(Var<T> x) { return apply_activation(Activation::sigmoid, x); }

inline constexpr double kInstanceNormEps = 1e-5;

/// Per (n, c) standardization over H*W, no affine parameters.
template <typename T>
Var<T> instance_norm_2d(Var<T> x, double eps = kInstanceNormEps);

/// Per row standardization of x [N,D], D >= 2.
template <typename T>
Var<T> instance_norm_vec(Var<T> x, double eps = kInstanceNormEps);

/// Elementwise clamp; the gradient is zero where the input lies outside (lo, hi).
template <typename T>
Var<T> clamp(Var<T> x, T lo, T hi);

}  // namespace ocacnn
