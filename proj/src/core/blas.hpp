#pragma once

#include <string>

namespace lfb::blas {

// Row-major C(m,n) = alpha * op(A) * op(B) + beta * C.
// op(A) is (m,k); lda/ldb/ldc are leading (row) strides of the stored arrays.
void dgemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
           const double* a, int lda, const double* b, int ldb,
           double beta, double* c, int ldc);

// "openblas:<corename>" when the system library was picked up, else "internal".
std::string backend();

// Worker threads the numeric kernels may use; resolved once from
// LFBNET_THREADS (default 1).
int threads();

}  // namespace lfb::blas
