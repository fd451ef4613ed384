#include "gemm.hpp"

#include <Eigen/Core>

namespace ocacnn::detail {

template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, T alpha,
          const T* a, const T* b, T beta, T* c) {
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const auto M = static_cast<Eigen::Index>(m);
  const auto N = static_cast<Eigen::Index>(n);
  const auto K = static_cast<Eigen::Index>(k);
  Eigen::Map<const Mat> A(a, trans_a ? K : M, trans_a ? M : K);
  Eigen::Map<const Mat> B(b, trans_b ? N : K, trans_b ? K : N);
  Eigen::Map<Mat> C(c, M, N);

  if (beta == T{0}) {
    C.setZero();
  } else if (beta != T{1}) {
    C *= beta;
  }
  if (!trans_a && !trans_b) {
    C.noalias() += alpha * A * B;
  } else if (trans_a && !trans_b) {
    C.noalias() += alpha * A.transpose() * B;
  } else if (!trans_a && trans_b) {
    C.noalias() += alpha * A * B.transpose();
  } else {
    C.noalias() += alpha * A.transpose() * B.transpose();
  }
}

template void gemm<float>(bool, bool, std::size_t, std::size_t, std::size_t, float, const float*,
                          const float*, float, float*);
template void gemm<double>(bool, bool, std::size_t, std::size_t, std::size_t, double,
                           const double*, const double*, double, double*);

}  // namespace ocacnn::detail
