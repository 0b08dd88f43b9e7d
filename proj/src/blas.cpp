#include "xcnn/blas.hpp"

#include <cblas.h>

namespace xcnn {

namespace {
int lead(bool trans, int64_t rows_notrans, int64_t cols_notrans) {
  return static_cast<int>(trans ? rows_notrans : cols_notrans);
}
}  // namespace

void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k,
          float alpha, const float* a, const float* b, float beta, float* c) {
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, static_cast<int>(m),
              static_cast<int>(n), static_cast<int>(k), alpha, a,
              lead(trans_a, m, k), b, lead(trans_b, k, n), beta, c,
              static_cast<int>(n));
}

void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k,
          double alpha, const double* a, const double* b, double beta, double* c) {
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, static_cast<int>(m),
              static_cast<int>(n), static_cast<int>(k), alpha, a,
              lead(trans_a, m, k), b, lead(trans_b, k, n), beta, c,
              static_cast<int>(n));
}

void set_blas_threads(int n) {
  openblas_set_num_threads(n > 0 ? n : 1);
}

}  // namespace xcnn
