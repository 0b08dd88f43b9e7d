#pragma once

#include <cstdint>

namespace xcnn {

// Row-major C[m,n] = alpha * op(A) * op(B) + beta * C.
// A is m x k before transposition, B is k x n.
void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k,
          float alpha, const float* a, const float* b, float beta, float* c);
void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k,
          double alpha, const double* a, const double* b, double beta, double* c);

void set_blas_threads(int n);

}  // namespace xcnn
