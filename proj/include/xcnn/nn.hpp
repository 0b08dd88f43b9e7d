#pragma once

#include <cstdint>
#include <vector>

#include "xcnn/ops.hpp"

namespace xcnn {

inline int64_t conv_out_size(int64_t in, int kernel, int stride, int pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

// x[N,Cin,H,W] * w[Cout,Cin,kh,kw] + b[Cout] -> [N,Cout,H',W'].
// Implemented as im2col + GEMM; the naive nested-loop form lives in the
// test oracles.
template <typename T>
Tensor<T> conv2d(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& w,
                 const Tensor<T>& b, int stride, int pad);

// Upsampling counterpart of a 2x2/stride-2 downsample. Only kernel 2,
// stride 2, no padding is supported; weight layout is [Cin,Cout,kh,kw].
// Output is [N,Cout,2H,2W].
template <typename T>
Tensor<T> transposed_conv2d(Tape<T>* tape, const Tensor<T>& x,
                            const Tensor<T>& w, const Tensor<T>& b,
                            int kernel = 2, int stride = 2);

// 2x2 window, stride 2. Odd trailing rows/columns are dropped (floor
// semantics).
template <typename T>
Tensor<T> avgpool2d(Tape<T>* tape, const Tensor<T>& x);

// 2x2 window, stride 2. Gradient routes to the first maximum in row-major
// window order on ties.
template <typename T>
Tensor<T> maxpool2d(Tape<T>* tape, const Tensor<T>& x);

// Train mode normalizes with batch statistics (requires N >= 2) and folds
// them into the running buffers; eval mode uses the running buffers.
// Variance is the biased (1/m) estimate throughout.
template <typename T>
Tensor<T> batchnorm2d(Tape<T>* tape, const Tensor<T>& x,
                      const Tensor<T>& gamma, const Tensor<T>& beta,
                      Tensor<T>& running_mean, Tensor<T>& running_var,
                      T momentum, T eps, bool train);

// x[N,F] * w[F,O] + b[O]
template <typename T>
Tensor<T> linear(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& w,
                 const Tensor<T>& b);

// Mean over the batch of -log softmax(logits)[label], stabilized by
// max-subtraction. Gradient is (softmax - onehot) / N.
template <typename T>
Tensor<T> softmax_cross_entropy(Tape<T>* tape, const Tensor<T>& logits,
                                const std::vector<int32_t>& labels);

// Row-wise softmax, no tape involvement.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits);

// Argmax per row; ties resolve to the lowest index.
template <typename T>
std::vector<int32_t> argmax_rows(const Tensor<T>& logits);

}  // namespace xcnn
