#pragma once

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <vector>

#include "xcnn/errors.hpp"
#include "xcnn/rng.hpp"

namespace xcnn {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major tensor. Copies share storage (and the gradient buffer,
// once allocated), so a copy held by a tape closure sees in-place updates
// to parameter data. Element type is float for training, double for
// gradient checking.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<T> values);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, T value);
  static Tensor uniform(Shape shape, T lo, T hi, Rng& rng);
  static Tensor gaussian(Shape shape, T mean, T stddev, Rng& rng);

  bool defined() const { return static_cast<bool>(data_); }
  const Shape& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int64_t dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t numel() const { return data_ ? static_cast<int64_t>(data_->size()) : 0; }

  T* data() { return data_->data(); }
  const T* data() const { return data_->data(); }
  std::vector<T>& vec() { return *data_; }
  const std::vector<T>& vec() const { return *data_; }

  bool has_grad() const { return static_cast<bool>(grad_); }
  T* grad() { return grad_->data(); }
  const T* grad() const { return grad_->data(); }
  std::vector<T>& grad_vec() { return *grad_; }
  // Allocates a zero gradient buffer if absent.
  void ensure_grad();
  void zero_grad();
  void drop_grad() { grad_.reset(); }

  // Tape bookkeeping: which tape (by epoch counter) the tensor currently
  // lives on and under which node id. Stale bindings from freed tapes are
  // detected by epoch mismatch.
  int node() const { return node_; }
  uint64_t tape_epoch() const { return tape_epoch_; }
  void bind(uint64_t tape_epoch, int node) {
    tape_epoch_ = tape_epoch;
    node_ = node;
  }

  // Row-major element access, for tests and small utilities.
  T& at(std::initializer_list<int64_t> idx);
  T at(std::initializer_list<int64_t> idx) const;

  Tensor clone() const;

 private:
  Shape shape_;
  std::shared_ptr<std::vector<T>> data_;
  std::shared_ptr<std::vector<T>> grad_;
  uint64_t tape_epoch_ = 0;
  int node_ = -1;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

template <typename T>
void check_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b);

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace xcnn
