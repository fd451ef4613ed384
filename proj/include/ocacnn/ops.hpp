#pragma once

#include "ocacnn/tape.hpp"
#include "ocacnn/tensor.hpp"

// Differentiable tensor primitives. Each function evaluates its output
// immediately and records a backward rule on the operands' tape.
namespace ocacnn {

/// Plain matrix product of [m,k] and [k,n].
template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b);

template <typename T>
Var<T> add(Var<T> a, Var<T> b);

template <typename T>
Var<T> sub(Var<T> a, Var<T> b);

/// Elementwise product.
template <typename T>
Var<T> mul(Var<T> a, Var<T> b);

template <typename T>
Var<T> scale(Var<T> a, T factor);

/// Sum of all elements, shape [1].
template <typename T>
Var<T> sum(Var<T> a);

template <typename T>
Var<T> mean(Var<T> a);

template <typename T>
Var<T> reshape(Var<T> a, Shape shape);

/// Concatenation along axis 0; trailing dimensions must agree.
template <typename T>
Var<T> concat_rows(Var<T> a, Var<T> b);

}  // namespace ocacnn
