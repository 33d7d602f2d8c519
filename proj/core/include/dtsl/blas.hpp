#pragma once

#include <cstddef>

namespace dtsl::blas {

// Row-major C = alpha * op(A) * op(B) + beta * C.
// op(A) is m x k, op(B) is k x n, C is m x n; leading dimensions are the
// row strides of the stored (untransposed) matrices.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, double alpha, const double* a,
          std::size_t lda, const double* b, std::size_t ldb, double beta, double* c, std::size_t ldc);

}  // namespace dtsl::blas
