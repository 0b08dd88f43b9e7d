#pragma once

#include "xcnn/tape.hpp"
#include "xcnn/tensor.hpp"

namespace xcnn {

// Core differentiable primitives. Every op takes the active tape (or
// nullptr for inference) and records its own backward rule. Inputs whose
// gradients are not wanted are simply left unwatched; the recorded rule
// skips them.

template <typename T>
Tensor<T> add(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b);

// relu'(0) = 0 by convention.
template <typename T>
Tensor<T> relu(Tape<T>* tape, const Tensor<T>& a);
template <typename T>
Tensor<T> tanh_op(Tape<T>* tape, const Tensor<T>& a);

// a[M,K] * b[K,N] -> [M,N]
template <typename T>
Tensor<T> matmul(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> reshape(Tape<T>* tape, const Tensor<T>& a, Shape new_shape);

// Sum of all elements, as a [1] tensor.
template <typename T>
Tensor<T> sum(Tape<T>* tape, const Tensor<T>& a);

}  // namespace xcnn
