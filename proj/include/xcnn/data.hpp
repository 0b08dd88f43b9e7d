#pragma once

#include <string>
#include <vector>

#include "xcnn/tensor.hpp"

namespace xcnn {

// Images live in [-1,1] (byte b maps to b/127.5 - 1), matching the
// generator's tanh codomain.
struct Dataset {
  TensorF images;  // [N,C,H,W]
  std::vector<int32_t> labels;
  int num_classes = 10;
  std::string name;
  std::vector<std::string> class_names;

  int64_t size() const { return images.defined() ? images.dim(0) : 0; }
  int channels() const { return static_cast<int>(images.dim(1)); }
  int height() const { return static_cast<int>(images.dim(2)); }
  int width() const { return static_cast<int>(images.dim(3)); }

  // First-n subset; stratified takes the first n/num_classes occurrences
  // of each class (n rounded down to a multiple of num_classes).
  Dataset subset(int64_t n, bool stratified) const;

  // Per-channel mean over all images, in normalized units.
  std::vector<float> mean_pixel() const;

  // Copy of image i as [C,H,W].
  TensorF image(int64_t i) const;
};

// IDX files, big-endian: magic 0x00000803 for images (u32 count, rows,
// cols, u8 pixels) and 0x00000801 for labels (u32 count, u8 labels).
Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path);

// 3073-byte records: label byte, then 1024 bytes each of R, G, B planes,
// row-major.
Dataset load_cifar10_bin(const std::vector<std::string>& batch_paths);

struct BatchPlan {
  int batch_size = 64;
  uint32_t seed = 1;
  bool shuffle = true;
  bool augment = false;  // pad-4 random crop + horizontal flip
};

// One epoch's batch sequence. Deterministic for a fixed (plan.seed, epoch);
// every index appears exactly once; the final short batch is kept.
class BatchStream {
 public:
  BatchStream(const Dataset& ds, const BatchPlan& plan, int epoch);

  // Fills the next batch; false at end of epoch.
  bool next(TensorF& images, std::vector<int32_t>& labels);

  int64_t batches_total() const;

 private:
  const Dataset& ds_;
  BatchPlan plan_;
  std::vector<int64_t> order_;
  int64_t pos_ = 0;
  Rng rng_;
};

}  // namespace xcnn
