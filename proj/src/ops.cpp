#include "xcnn/ops.hpp"

#include <cmath>

#include "xcnn/blas.hpp"

namespace xcnn {

namespace {

// Shared body for add/sub/mul. Forward writes out; bwd_a/bwd_b accumulate
// the local gradient into the respective input.
template <typename T, typename Fwd, typename BwdA, typename BwdB>
Tensor<T> binary_op(const char* name, Tape<T>* tape, const Tensor<T>& a,
                    const Tensor<T>& b, Fwd fwd, BwdA bwd_a, BwdB bwd_b) {
  check_same_shape(name, a, b);
  Tensor<T> out(a.shape());
  const T* pa = a.data();
  const T* pb = b.data();
  T* po = out.data();
  int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) po[i] = fwd(pa[i], pb[i]);
  if (tape) {
    bool need_a = tape->tracked(a);
    bool need_b = tape->tracked(b);
    if (need_a || need_b) {
      out.ensure_grad();
      std::vector<int> ins;
      if (need_a) ins.push_back(a.node());
      if (need_b) ins.push_back(b.node());
      Tensor<T> ca = a, cb = b, co = out;
      tape->record(out, std::move(ins), [ca, cb, co, need_a, need_b, bwd_a, bwd_b, n]() mutable {
        const T* g = co.grad();
        if (need_a) {
          T* ga = ca.grad();
          for (int64_t i = 0; i < n; ++i) ga[i] += bwd_a(g[i], ca.data()[i], cb.data()[i]);
        }
        if (need_b) {
          T* gb = cb.grad();
          for (int64_t i = 0; i < n; ++i) gb[i] += bwd_b(g[i], ca.data()[i], cb.data()[i]);
        }
      });
    }
  }
  return out;
}

template <typename T, typename Fwd, typename Bwd>
Tensor<T> unary_op(Tape<T>* tape, const Tensor<T>& a, Fwd fwd, Bwd bwd) {
  Tensor<T> out(a.shape());
  const T* pa = a.data();
  T* po = out.data();
  int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) po[i] = fwd(pa[i]);
  if (tape && tape->tracked(a)) {
    out.ensure_grad();
    Tensor<T> ca = a, co = out;
    tape->record(out, {a.node()}, [ca, co, bwd, n]() mutable {
      const T* g = co.grad();
      T* ga = ca.grad();
      for (int64_t i = 0; i < n; ++i) ga[i] += bwd(g[i], ca.data()[i], co.data()[i]);
    });
  }
  return out;
}

}  // namespace

template <typename T>
Tensor<T> add(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(
      "add", tape, a, b, [](T x, T y) { return x + y; },
      [](T g, T, T) { return g; }, [](T g, T, T) { return g; });
}

template <typename T>
Tensor<T> sub(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(
      "sub", tape, a, b, [](T x, T y) { return x - y; },
      [](T g, T, T) { return g; }, [](T g, T, T) { return -g; });
}

template <typename T>
Tensor<T> mul(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(
      "mul", tape, a, b, [](T x, T y) { return x * y; },
      [](T g, T, T y) { return g * y; }, [](T g, T x, T) { return g * x; });
}

template <typename T>
Tensor<T> relu(Tape<T>* tape, const Tensor<T>& a) {
  return unary_op(
      tape, a, [](T x) { return x > T(0) ? x : T(0); },
      [](T g, T x, T) { return x > T(0) ? g : T(0); });
}

template <typename T>
Tensor<T> tanh_op(Tape<T>* tape, const Tensor<T>& a) {
  return unary_op(
      tape, a, [](T x) { return std::tanh(x); },
      [](T g, T, T y) { return g * (T(1) - y * y); });
}

template <typename T>
Tensor<T> matmul(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.ndim() != 2 || b.ndim() != 2)
    throw ShapeError(msg("matmul: expects rank-2 operands, got ", shape_str(a.shape()), " and ", shape_str(b.shape())));
  int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k)
    throw ShapeError(msg("matmul: inner dimensions differ, ", shape_str(a.shape()), " vs ", shape_str(b.shape())));
  Tensor<T> out(Shape{m, n});
  gemm(false, false, m, n, k, T(1), a.data(), b.data(), T(0), out.data());
  if (tape) {
    bool need_a = tape->tracked(a);
    bool need_b = tape->tracked(b);
    if (need_a || need_b) {
      out.ensure_grad();
      std::vector<int> ins;
      if (need_a) ins.push_back(a.node());
      if (need_b) ins.push_back(b.node());
      Tensor<T> ca = a, cb = b, co = out;
      tape->record(out, std::move(ins), [ca, cb, co, need_a, need_b, m, n, k]() mutable {
        // dA = dC * B^T, dB = A^T * dC (accumulated).
        if (need_a) gemm(false, true, m, k, n, T(1), co.grad(), cb.data(), T(1), ca.grad());
        if (need_b) gemm(true, false, k, n, m, T(1), ca.data(), co.grad(), T(1), cb.grad());
      });
    }
  }
  return out;
}

template <typename T>
Tensor<T> reshape(Tape<T>* tape, const Tensor<T>& a, Shape new_shape) {
  int64_t n = shape_numel(new_shape);
  if (n != a.numel())
    throw ShapeError(msg("reshape: cannot view ", shape_str(a.shape()), " as ", shape_str(new_shape), " (element count differs)"));
  Tensor<T> out(std::move(new_shape), a.vec());
  if (tape && tape->tracked(a)) {
    out.ensure_grad();
    Tensor<T> ca = a, co = out;
    tape->record(out, {a.node()}, [ca, co, n]() mutable {
      const T* g = co.grad();
      T* ga = ca.grad();
      for (int64_t i = 0; i < n; ++i) ga[i] += g[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> sum(Tape<T>* tape, const Tensor<T>& a) {
  Tensor<T> out(Shape{1});
  const T* pa = a.data();
  T acc = 0;
  int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) acc += pa[i];
  out.data()[0] = acc;
  if (tape && tape->tracked(a)) {
    out.ensure_grad();
    Tensor<T> ca = a, co = out;
    tape->record(out, {a.node()}, [ca, co, n]() mutable {
      T g = co.grad()[0];
      T* ga = ca.grad();
      for (int64_t i = 0; i < n; ++i) ga[i] += g;
    });
  }
  return out;
}

#define XCNN_INSTANTIATE(T)                                                  \
  template Tensor<T> add<T>(Tape<T>*, const Tensor<T>&, const Tensor<T>&);  \
  template Tensor<T> sub<T>(Tape<T>*, const Tensor<T>&, const Tensor<T>&);  \
  template Tensor<T> mul<T>(Tape<T>*, const Tensor<T>&, const Tensor<T>&);  \
  template Tensor<T> relu<T>(Tape<T>*, const Tensor<T>&);                   \
  template Tensor<T> tanh_op<T>(Tape<T>*, const Tensor<T>&);                \
  template Tensor<T> matmul<T>(Tape<T>*, const Tensor<T>&, const Tensor<T>&); \
  template Tensor<T> reshape<T>(Tape<T>*, const Tensor<T>&, Shape);         \
  template Tensor<T> sum<T>(Tape<T>*, const Tensor<T>&);

XCNN_INSTANTIATE(float)
XCNN_INSTANTIATE(double)
#undef XCNN_INSTANTIATE

}  // namespace xcnn
