#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "xcnn/train.hpp"

using namespace xcnn;
namespace fs = std::filesystem;

namespace {

Dataset tiny_mnist_like(int64_t n, uint32_t seed = 77) {
  // class-dependent blobs, separable enough to overfit quickly
  Dataset ds;
  ds.name = "tiny";
  ds.num_classes = 10;
  ds.images = TensorF::zeros({n, 1, 28, 28});
  ds.labels.resize(static_cast<size_t>(n));
  Rng rng(seed);
  for (int64_t i = 0; i < n; ++i) {
    int32_t y = static_cast<int32_t>(i % 10);
    ds.labels[static_cast<size_t>(i)] = y;
    float* img = ds.images.data() + i * 28 * 28;
    for (int64_t p = 0; p < 28 * 28; ++p) img[p] = -1.0f;
    int cy = 4 + (y / 5) * 14, cx = 4 + (y % 5) * 4;
    for (int dy = 0; dy < 6; ++dy)
      for (int dx = 0; dx < 4; ++dx)
        img[(cy + dy) * 28 + cx + dx] = 0.8f + 0.2f * static_cast<float>(rng.next_unit());
  }
  return ds;
}

std::vector<std::pair<std::string, TensorF*>> single_param(TensorF& t) {
  return {{"w", &t}};
}

}  // namespace

TEST_CASE("sgd_step: plain gradient descent") {
  TensorF w({2}, {1.0f, 2.0f});
  w.ensure_grad();
  w.grad()[0] = 0.5f;
  w.grad()[1] = -1.0f;
  OptimState opt;
  opt.lr = 0.1f;
  opt.momentum = 0.0f;
  auto params = single_param(w);
  opt.init(params);
  sgd_step(params, opt);
  CHECK(w.data()[0] == doctest::Approx(1.0f - 0.1f * 0.5f));
  CHECK(w.data()[1] == doctest::Approx(2.0f + 0.1f));
  CHECK(w.grad()[0] == 0.0f);  // grads zeroed after the step
  CHECK(w.grad()[1] == 0.0f);
}

TEST_CASE("sgd_step: momentum recurrence over two steps") {
  TensorF w({1}, {0.0f});
  w.ensure_grad();
  OptimState opt;
  opt.lr = 0.01f;
  opt.momentum = 0.9f;
  auto params = single_param(w);
  opt.init(params);
  const float g = 2.0f;
  w.grad()[0] = g;
  sgd_step(params, opt);
  w.grad()[0] = g;
  sgd_step(params, opt);
  // v1 = g, v2 = 0.9 g + g; total displacement lr*g*(1 + 1.9)
  CHECK(w.data()[0] == doctest::Approx(-0.01f * g * (1.0f + 1.9f)));
}

TEST_CASE("sgd_step: zero gradients leave parameters fixed") {
  TensorF w({3}, {1.f, 2.f, 3.f});
  w.ensure_grad();
  OptimState opt;
  auto params = single_param(w);
  opt.init(params);
  sgd_step(params, opt);
  CHECK(w.vec() == std::vector<float>{1.f, 2.f, 3.f});
}

TEST_CASE("sgd_step: non-finite gradient aborts with the parameter name") {
  TensorF w({2}, {1.f, 2.f});
  w.ensure_grad();
  w.grad()[0] = std::numeric_limits<float>::quiet_NaN();
  OptimState opt;
  auto params = single_param(w);
  opt.init(params);
  CHECK_THROWS_WITH_AS(sgd_step(params, opt),
                       doctest::Contains("non-finite gradient in w"), NumericalError);
}

TEST_CASE("lr_schedule: step decay") {
  CHECK(lr_schedule(0.1f, 0, {10, 15}, 0.1f) == doctest::Approx(0.1f));
  CHECK(lr_schedule(0.1f, 12, {10, 15}, 0.1f) == doctest::Approx(0.01f));
  CHECK(lr_schedule(0.1f, 20, {10, 15}, 0.1f) == doctest::Approx(0.001f));
  CHECK_THROWS_AS(lr_schedule(0.1f, 5, {15, 10}, 0.1f), ContractError);
}

TEST_CASE("evaluate: constant logits fall back to class 0; purity; perfect labels") {
  Rng rng(1);
  XcnnModel m = XcnnModel::build_baseline({DiscriminatorKind::kMnistCnn, 1, 10}, rng);
  // zero every parameter: logits become all equal, argmax tie-break -> index 0
  for (auto& [name, t] : m.named_parameters()) std::fill(t->vec().begin(), t->vec().end(), 0.0f);

  Dataset ds = tiny_mnist_like(50);  // balanced: exactly 1/10 of labels are class 0
  auto [acc, loss] = evaluate(m, ds, 16);
  CHECK(acc == doctest::Approx(0.1));
  CHECK(loss == doctest::Approx(std::log(10.0)).epsilon(1e-5));

  auto [acc2, loss2] = evaluate(m, ds, 16);
  CHECK(acc == acc2);
  CHECK(loss == loss2);
}

TEST_CASE("train_epoch: lr=0 computes metrics without touching parameters") {
  Rng rng(2);
  XcnnModel m = XcnnModel::build_xcnn({1, 4}, {DiscriminatorKind::kMnistCnn, 1, 10}, rng);
  Dataset ds = tiny_mnist_like(20);
  std::vector<float> before;
  for (auto& [name, t] : m.named_parameters())
    before.insert(before.end(), t->vec().begin(), t->vec().end());

  OptimState opt;
  opt.lr = 0.0f;
  BatchPlan plan;
  plan.batch_size = 10;
  TrainMetrics metrics = train_epoch(m, ds, plan, opt, 0);
  CHECK(metrics.train_loss == doctest::Approx(std::log(10.0)).epsilon(0.2));

  std::vector<float> after;
  for (auto& [name, t] : m.named_parameters())
    after.insert(after.end(), t->vec().begin(), t->vec().end());
  CHECK(before == after);
}

TEST_CASE("train_epoch: initial predictions are near chance, loss near ln(10)") {
  Rng rng(3);
  XcnnModel m = XcnnModel::build_xcnn({1, 8}, {DiscriminatorKind::kMnistCnn, 1, 10}, rng);
  Dataset ds = tiny_mnist_like(40);
  auto [acc, loss] = evaluate(m, ds, 20);
  CHECK(std::abs(loss - std::log(10.0)) < 1.0);
  CHECK(acc >= 0.0);
  CHECK(acc <= 0.35);  // 10 classes, untrained: close to chance
}

TEST_CASE("single-batch overfit: 8 images reach train accuracy 1.0") {
  Rng rng(4);
  XcnnModel m = XcnnModel::build_xcnn({1, 8}, {DiscriminatorKind::kMnistCnn, 1, 10}, rng);
  Dataset ds = tiny_mnist_like(8);
  OptimState opt;
  opt.lr = 0.05f;
  BatchPlan plan;
  plan.batch_size = 8;
  bool overfit = false;
  for (int step = 0; step < 200 && !overfit; ++step) {
    train_epoch(m, ds, plan, opt, step);
    auto [acc, loss] = evaluate(m, ds, 8);
    overfit = acc == 1.0;
  }
  CHECK(overfit);
}

TEST_CASE("training loss is non-increasing on a fixed tiny batch") {
  Rng rng(5);
  XcnnModel m = XcnnModel::build_xcnn({1, 4}, {DiscriminatorKind::kMnistCnn, 1, 10}, rng);
  Dataset ds = tiny_mnist_like(8);
  OptimState opt;
  opt.lr = 1e-3f;
  opt.momentum = 0.0f;
  BatchPlan plan;
  plan.batch_size = 8;
  plan.shuffle = false;
  double prev = 1e30;
  for (int step = 0; step < 50; ++step) {
    TrainMetrics metrics = train_epoch(m, ds, plan, opt, 0);
    CHECK(metrics.train_loss <= prev + 1e-6);
    prev = metrics.train_loss;
  }
}

TEST_CASE("checkpoint: round-trip bytes and corrupted magic") {
  fs::path dir = fs::temp_directory_path() / "xcnn_train_test";
  fs::create_directories(dir);
  Rng rng(6);
  XcnnModel m = XcnnModel::build_xcnn({1, 4}, {DiscriminatorKind::kMnistCnn, 1, 10}, rng);
  OptimState opt;
  opt.init(m.named_parameters());

  Checkpoint ck = make_checkpoint(m, opt, 3, 0xDEADBEEFu);
  fs::path p1 = dir / "a.xcnn", p2 = dir / "b.xcnn";
  save_checkpoint(p1.string(), ck);
  Checkpoint loaded = load_checkpoint(p1.string());
  save_checkpoint(p2.string(), loaded);

  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  std::string s1((std::istreambuf_iterator<char>(f1)), {});
  std::string s2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(s1 == s2);  // save -> load -> save is byte-identical

  int epoch = -1;
  uint32_t seed = 0;
  XcnnModel m2 = XcnnModel::from_manifest(loaded.manifest);
  apply_checkpoint(loaded, m2, &opt, &epoch, &seed);
  CHECK(epoch == 3);
  CHECK(seed == 0xDEADBEEFu);
  auto pa = m.named_parameters();
  auto pb = m2.named_parameters();
  for (size_t i = 0; i < pa.size(); ++i) CHECK(pa[i].second->vec() == pb[i].second->vec());

  // flip the magic: must be rejected before anything is applied
  std::string corrupted = s1;
  corrupted[0] = 'Y';
  fs::path p3 = dir / "c.xcnn";
  std::ofstream(p3, std::ios::binary).write(corrupted.data(), static_cast<std::streamsize>(corrupted.size()));
  CHECK_THROWS_AS(load_checkpoint(p3.string()), FormatError);

  // manifest mismatch with the target model
  Rng rng2(7);
  XcnnModel other = XcnnModel::build_baseline({DiscriminatorKind::kMnistCnn, 1, 10}, rng2);
  CHECK_THROWS_AS(apply_checkpoint(loaded, other, nullptr, nullptr, nullptr), ShapeError);
}

TEST_CASE("resume reproduces the uninterrupted loss sequence exactly") {
  Dataset ds = tiny_mnist_like(64);
  BatchPlan plan;
  plan.batch_size = 16;
  plan.seed = 9;

  auto fresh = [] {
    Rng rng(8);
    return XcnnModel::build_xcnn({1, 4}, {DiscriminatorKind::kMnistCnn, 1, 10}, rng);
  };

  // uninterrupted: 4 epochs
  XcnnModel a = fresh();
  OptimState opt_a;
  opt_a.lr = 0.01f;
  std::vector<double> losses_a;
  for (int e = 0; e < 4; ++e) losses_a.push_back(train_epoch(a, ds, plan, opt_a, e).train_loss);

  // interrupted: 2 epochs, checkpoint, restore into a fresh model, 2 more
  XcnnModel b = fresh();
  OptimState opt_b;
  opt_b.lr = 0.01f;
  std::vector<double> losses_b;
  for (int e = 0; e < 2; ++e) losses_b.push_back(train_epoch(b, ds, plan, opt_b, e).train_loss);

  fs::path dir = fs::temp_directory_path() / "xcnn_train_test";
  fs::create_directories(dir);
  fs::path ckpath = dir / "resume.xcnn";
  save_checkpoint(ckpath.string(), make_checkpoint(b, opt_b, 2, plan.seed));

  Checkpoint ck = load_checkpoint(ckpath.string());
  XcnnModel c = XcnnModel::from_manifest(ck.manifest);
  OptimState opt_c;
  opt_c.lr = 0.01f;
  int epoch = 0;
  uint32_t seed = 0;
  apply_checkpoint(ck, c, &opt_c, &epoch, &seed);
  CHECK(epoch == 2);
  BatchPlan plan_c = plan;
  plan_c.seed = seed;
  for (int e = epoch; e < 4; ++e) losses_b.push_back(train_epoch(c, ds, plan_c, opt_c, e).train_loss);

  REQUIRE(losses_a.size() == losses_b.size());
  for (size_t i = 0; i < losses_a.size(); ++i) CHECK(losses_a[i] == losses_b[i]);
}

TEST_CASE("metrics csv rows") {
  TrainMetrics m;
  m.epoch = 2;
  m.train_loss = 0.5;
  m.train_acc = 0.75;
  m.val_acc = 0.7;
  m.seconds = 1.25;
  CHECK(kMetricsCsvHeader == "epoch,train_loss,train_acc,val_acc,seconds");
  CHECK(metrics_csv_row(m) == "2,0.5,0.75,0.7,1.25");
}
