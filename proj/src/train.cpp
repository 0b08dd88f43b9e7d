#include "xcnn/train.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace xcnn {

void OptimState::init(const std::vector<std::pair<std::string, TensorF*>>& params) {
  velocity.clear();
  velocity.reserve(params.size());
  for (const auto& [name, p] : params) velocity.emplace_back(TensorF::zeros(p->shape()));
}

void sgd_step(const std::vector<std::pair<std::string, TensorF*>>& params, OptimState& s) {
  if (s.velocity.size() != params.size())
    throw ContractError("sgd_step: optimizer state does not match parameter list");
  for (size_t i = 0; i < params.size(); ++i) {
    TensorF& p = *params[i].second;
    if (!p.has_grad())
      throw ContractError(msg("sgd_step: parameter ", params[i].first, " has no gradient"));
    const float* g = p.grad();
    int64_t n = p.numel();
    double norm_sq = 0.0;
    for (int64_t j = 0; j < n; ++j) norm_sq += double(g[j]) * double(g[j]);
    if (!std::isfinite(norm_sq))
      throw NumericalError(msg("non-finite gradient in ", params[i].first,
                               " (|g| = ", std::sqrt(norm_sq), ")"));
    float* v = s.velocity[i].data();
    float* w = p.data();
    for (int64_t j = 0; j < n; ++j) {
      v[j] = s.momentum * v[j] + g[j] + s.weight_decay * w[j];
      w[j] -= s.lr * v[j];
    }
    p.zero_grad();
  }
}

float lr_schedule(float base_lr, int epoch, const std::vector<int>& milestones, float gamma) {
  float lr = base_lr;
  for (size_t i = 0; i < milestones.size(); ++i) {
    if (i > 0 && milestones[i] <= milestones[i - 1])
      throw ContractError("lr_schedule: milestones must be ascending");
    if (epoch >= milestones[i]) lr *= gamma;
  }
  return lr;
}

TrainMetrics train_epoch(XcnnModel& model, const Dataset& train, const BatchPlan& plan,
                         OptimState& opt, int epoch) {
  auto t0 = std::chrono::steady_clock::now();
  auto params = model.named_parameters();
  if (opt.velocity.empty()) opt.init(params);

  BatchStream stream(train, plan, epoch);
  TensorF images;
  std::vector<int32_t> labels;
  double loss_sum = 0.0;
  int64_t seen = 0, correct = 0;

  while (stream.next(images, labels)) {
    Tape<float> tape;
    auto out = model.forward(&tape, images, /*train=*/true);
    TensorF loss = softmax_cross_entropy(&tape, out.logits, labels);
    tape.backward(loss);
    sgd_step(params, opt);

    int64_t bs = images.dim(0);
    loss_sum += double(loss.data()[0]) * double(bs);
    std::vector<int32_t> pred = argmax_rows(out.logits);
    for (size_t i = 0; i < labels.size(); ++i)
      if (pred[i] == labels[i]) ++correct;
    seen += bs;
  }

  TrainMetrics m;
  m.epoch = epoch;
  m.train_loss = seen ? loss_sum / double(seen) : 0.0;
  m.train_acc = seen ? double(correct) / double(seen) : 0.0;
  m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return m;
}

std::pair<double, double> evaluate(XcnnModel& model, const Dataset& ds, int batch_size) {
  BatchPlan plan;
  plan.batch_size = batch_size;
  plan.shuffle = false;
  plan.augment = false;
  BatchStream stream(ds, plan, 0);
  TensorF images;
  std::vector<int32_t> labels;
  double loss_sum = 0.0;
  int64_t seen = 0, correct = 0;
  while (stream.next(images, labels)) {
    auto out = model.forward(nullptr, images, /*train=*/false);
    TensorF loss = softmax_cross_entropy<float>(nullptr, out.logits, labels);
    int64_t bs = images.dim(0);
    loss_sum += double(loss.data()[0]) * double(bs);
    std::vector<int32_t> pred = argmax_rows(out.logits);
    for (size_t i = 0; i < labels.size(); ++i)
      if (pred[i] == labels[i]) ++correct;
    seen += bs;
  }
  if (!seen) return {0.0, 0.0};
  return {double(correct) / double(seen), loss_sum / double(seen)};
}

Checkpoint make_checkpoint(XcnnModel& model, const OptimState& opt, int epoch, uint32_t seed) {
  Checkpoint ck;
  ck.manifest = model.manifest();
  for (auto& [name, t] : model.named_parameters()) ck.tensors.emplace_back(name, t->clone());
  for (auto& [name, t] : model.named_buffers()) ck.tensors.emplace_back(name, t->clone());
  auto params = model.named_parameters();
  for (size_t i = 0; i < opt.velocity.size() && i < params.size(); ++i)
    ck.tensors.emplace_back("opt.v." + params[i].first, opt.velocity[i].clone());
  ck.tensors.emplace_back("meta.epoch", TensorF({1}, {static_cast<float>(epoch)}));
  ck.tensors.emplace_back(
      "meta.seed", TensorF({2}, {static_cast<float>(seed >> 16), static_cast<float>(seed & 0xFFFFu)}));
  return ck;
}

namespace {

void copy_into(const std::string& name, const TensorF& src, TensorF& dst) {
  if (src.shape() != dst.shape())
    throw ShapeError(msg("checkpoint tensor ", name, " has shape ", shape_str(src.shape()),
                         ", model expects ", shape_str(dst.shape())));
  std::copy(src.data(), src.data() + src.numel(), dst.data());
}

}  // namespace

void apply_checkpoint(const Checkpoint& ck, XcnnModel& model, OptimState* opt,
                      int* epoch, uint32_t* seed) {
  if (ck.manifest != model.manifest())
    throw ShapeError("checkpoint manifest does not match the target model");
  for (auto& [name, t] : model.named_parameters()) {
    const TensorF* src = ck.find(name);
    if (!src) throw FormatError(msg("checkpoint is missing tensor ", name));
    copy_into(name, *src, *t);
  }
  for (auto& [name, t] : model.named_buffers()) {
    const TensorF* src = ck.find(name);
    if (!src) throw FormatError(msg("checkpoint is missing buffer ", name));
    copy_into(name, *src, *t);
  }
  if (opt) {
    auto params = model.named_parameters();
    opt->init(params);
    for (size_t i = 0; i < params.size(); ++i) {
      const TensorF* src = ck.find("opt.v." + params[i].first);
      if (src) copy_into(params[i].first, *src, opt->velocity[i]);
    }
  }
  if (epoch) {
    const TensorF* e = ck.find("meta.epoch");
    *epoch = e ? static_cast<int>(e->data()[0]) : 0;
  }
  if (seed) {
    const TensorF* s = ck.find("meta.seed");
    *seed = s ? (static_cast<uint32_t>(s->data()[0]) << 16) | static_cast<uint32_t>(s->data()[1]) : 0;
  }
}

XcnnModel model_from_checkpoint(const Checkpoint& ck) {
  XcnnModel model = XcnnModel::from_manifest(ck.manifest);
  apply_checkpoint(ck, model, nullptr, nullptr, nullptr);
  return model;
}

std::string metrics_csv_row(const TrainMetrics& m) {
  std::ostringstream os;
  os << m.epoch << "," << m.train_loss << "," << m.train_acc << ","
     << m.val_acc << "," << m.seconds;
  return os.str();
}

}  // namespace xcnn
