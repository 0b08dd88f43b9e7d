#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <vector>

#include "xcnn/tensor.hpp"

namespace xcnn {

// Dynamically recorded computation graph for one forward pass. A tape is
// single-owner: create one per training step, run backward, let it go out
// of scope. Inference runs with no tape at all (pass nullptr to ops).
//
// Node ids are assigned in recording order, so every op's inputs precede
// it. Gradient buffers live on the tensors themselves and accumulate;
// running backward twice doubles the gradients.
template <typename T>
class Tape {
 public:
  Tape() : tape_epoch_(++next_tape_epoch_) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Registers a leaf (parameter or input to differentiate). Idempotent.
  int watch(Tensor<T>& t) {
    if (tracked(t)) return t.node();
    t.ensure_grad();
    int id = next_node_++;
    t.bind(tape_epoch_, id);
    return id;
  }

  bool tracked(const Tensor<T>& t) const {
    return t.tape_epoch() == tape_epoch_ && t.node() >= 0;
  }

  // Records an op result. `backward` must add the op's contribution into
  // the input gradients; it runs exactly once per backward() call.
  int record(Tensor<T>& out, std::vector<int> input_nodes, std::function<void()> backward) {
    out.ensure_grad();
    int id = next_node_++;
    out.bind(tape_epoch_, id);
    ops_.push_back(Op{std::move(input_nodes), id, out, std::move(backward)});
    return id;
  }

  // Seeds d(loss)/d(loss) = 1 and walks the recorded ops in reverse.
  // Intermediate (op output) gradients are transient per pass; leaf
  // gradients accumulate, so a second backward() adds one more full
  // gradient.
  void backward(const Tensor<T>& loss) {
    if (!tracked(loss)) throw ContractError("backward: loss is not on the active tape");
    if (loss.numel() != 1) throw ContractError(msg("backward: loss must be scalar, got ", shape_str(loss.shape())));
    for (Op& op : ops_) op.output.zero_grad();
    const_cast<Tensor<T>&>(loss).grad()[0] += T(1);
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) it->backward();
  }

  size_t size() const { return ops_.size(); }

  void clear() {
    ops_.clear();
    next_node_ = 0;
    tape_epoch_ = ++next_tape_epoch_;
  }

  uint64_t tape_epoch() const { return tape_epoch_; }

  struct Op {
    std::vector<int> input_nodes;
    int output_node;
    Tensor<T> output;  // shares the grad buffer with the op's result
    std::function<void()> backward;
  };
  const std::vector<Op>& ops() const { return ops_; }

 private:
  std::vector<Op> ops_;
  int next_node_ = 0;
  uint64_t tape_epoch_;
  static std::atomic<uint64_t> next_tape_epoch_;
};

using TapeF = Tape<float>;
using TapeD = Tape<double>;

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace xcnn
