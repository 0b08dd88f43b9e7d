#pragma once

#include "xcnn/checkpoint.hpp"
#include "xcnn/data.hpp"
#include "xcnn/xcnn_model.hpp"

namespace xcnn {

// SGD with momentum:
//   v <- momentum * v + grad + weight_decay * param
//   param <- param - lr * v
// Gradients are zeroed after each step.
struct OptimState {
  float lr = 0.01f;
  float momentum = 0.9f;
  float weight_decay = 0.0f;
  std::vector<TensorF> velocity;  // parallel to the parameter list

  void init(const std::vector<std::pair<std::string, TensorF*>>& params);
};

void sgd_step(const std::vector<std::pair<std::string, TensorF*>>& params, OptimState& s);

// Step decay: base * gamma^(milestones passed). Milestones are epoch
// indices, ascending.
float lr_schedule(float base_lr, int epoch, const std::vector<int>& milestones, float gamma);

struct TrainMetrics {
  int epoch = 0;
  double train_loss = 0.0;  // mean cross-entropy, nats
  double train_acc = 0.0;
  double val_acc = 0.0;
  double seconds = 0.0;
};

// One pass over the training set: forward, cross-entropy, backward, SGD
// step per batch. val_acc is left at 0 for the caller to fill.
TrainMetrics train_epoch(XcnnModel& model, const Dataset& train, const BatchPlan& plan,
                         OptimState& opt, int epoch);

// Top-1 accuracy and mean loss, eval mode, no tape.
std::pair<double, double> evaluate(XcnnModel& model, const Dataset& ds, int batch_size = 256);

// Checkpoint glue. Tensor order: parameters, buffers, optimizer velocity,
// then meta (epoch counter and the run seed split into two 16-bit halves,
// which float32 stores exactly). Epoch streams are derived from
// (seed, epoch), so seed + epoch is the whole RNG state.
Checkpoint make_checkpoint(XcnnModel& model, const OptimState& opt, int epoch, uint32_t seed);

// Restores parameters, buffers and optimizer state into an existing model.
// The checkpoint manifest must match the model manifest exactly.
void apply_checkpoint(const Checkpoint& ck, XcnnModel& model, OptimState* opt,
                      int* epoch, uint32_t* seed);

// Builds a fresh model from the checkpoint's own manifest and loads it.
XcnnModel model_from_checkpoint(const Checkpoint& ck);

const std::string kMetricsCsvHeader = "epoch,train_loss,train_acc,val_acc,seconds";
std::string metrics_csv_row(const TrainMetrics& m);

}  // namespace xcnn
