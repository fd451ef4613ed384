#pragma once

#include <cstddef>

namespace ocacnn::detail {

// Row-major C[m,n] = alpha * op(A) * op(B) + beta * C, where op(A) is [m,k]
// and op(B) is [k,n]. Single-threaded with a fixed blocking, so results are
// reproducible for identical inputs.
template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, T alpha,
          const T* a, const T* b, T beta, T* c);

}  // namespace ocacnn::detail
