#include "xcnn/tensor.hpp"

#include <algorithm>

namespace xcnn {

int64_t shape_numel(const Shape& shape) {
  if (shape.empty()) throw ShapeError("shape must have at least one dimension");
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d < 1) throw ShapeError(msg("dimension must be >= 1, got ", d, " in ", shape_str(shape)));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

template <typename T>
Tensor<T>::Tensor(Shape shape) : shape_(std::move(shape)) {
  int64_t n = shape_numel(shape_);
  data_ = std::make_shared<std::vector<T>>(static_cast<size_t>(n), T(0));
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)) {
  int64_t n = shape_numel(shape_);
  if (n != static_cast<int64_t>(values.size()))
    throw ShapeError(msg("value count ", values.size(), " does not match shape ", shape_str(shape_)));
  data_ = std::make_shared<std::vector<T>>(std::move(values));
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value) {
  Tensor t(std::move(shape));
  std::fill(t.data_->begin(), t.data_->end(), value);
  return t;
}

template <typename T>
Tensor<T> Tensor<T>::uniform(Shape shape, T lo, T hi, Rng& rng) {
  Tensor t(std::move(shape));
  for (T& v : *t.data_) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

template <typename T>
Tensor<T> Tensor<T>::gaussian(Shape shape, T mean, T stddev, Rng& rng) {
  Tensor t(std::move(shape));
  for (T& v : *t.data_) v = static_cast<T>(rng.gaussian(mean, stddev));
  return t;
}

template <typename T>
void Tensor<T>::ensure_grad() {
  if (!grad_) grad_ = std::make_shared<std::vector<T>>(data_->size(), T(0));
}

template <typename T>
void Tensor<T>::zero_grad() {
  if (grad_) std::fill(grad_->begin(), grad_->end(), T(0));
}

template <typename T>
T& Tensor<T>::at(std::initializer_list<int64_t> idx) {
  int64_t flat = 0;
  size_t i = 0;
  for (int64_t v : idx) flat = flat * shape_[i++] + v;
  return (*data_)[static_cast<size_t>(flat)];
}

template <typename T>
T Tensor<T>::at(std::initializer_list<int64_t> idx) const {
  return const_cast<Tensor<T>*>(this)->at(idx);
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  Tensor t;
  t.shape_ = shape_;
  t.data_ = std::make_shared<std::vector<T>>(*data_);
  return t;
}

template <typename T>
void check_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape())
    throw ShapeError(msg(op, ": shape mismatch ", shape_str(a.shape()), " vs ", shape_str(b.shape())));
}

template class Tensor<float>;
template class Tensor<double>;
template void check_same_shape<float>(const char*, const Tensor<float>&, const Tensor<float>&);
template void check_same_shape<double>(const char*, const Tensor<double>&, const Tensor<double>&);

}  // namespace xcnn
