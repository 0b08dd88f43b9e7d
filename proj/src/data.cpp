#include "xcnn/data.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

namespace xcnn {

namespace {

std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError(msg("cannot open ", path));
  f.seekg(0, std::ios::end);
  auto size = static_cast<size_t>(f.tellg());
  f.seekg(0);
  std::vector<uint8_t> buf(size);
  f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(size));
  if (!f) throw FormatError(msg("read failed for ", path));
  return buf;
}

uint32_t read_be32(const uint8_t* p) {
  return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

// Double arithmetic so the endpoints land exactly on -1 and +1.
float normalize_byte(uint8_t b) { return static_cast<float>(b / 127.5 - 1.0); }

const std::vector<std::string> kMnistClasses = {"0", "1", "2", "3", "4",
                                                "5", "6", "7", "8", "9"};
const std::vector<std::string> kCifarClasses = {
    "airplane", "automobile", "bird", "cat",  "deer",
    "dog",      "frog",       "horse", "ship", "truck"};

}  // namespace

Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path) {
  std::vector<uint8_t> img = read_file(images_path);
  std::vector<uint8_t> lab = read_file(labels_path);

  if (img.size() < 16 || read_be32(img.data()) != 0x00000803u)
    throw FormatError(msg(images_path, ": bad IDX image magic"));
  if (lab.size() < 8 || read_be32(lab.data()) != 0x00000801u)
    throw FormatError(msg(labels_path, ": bad IDX label magic"));

  uint32_t n = read_be32(img.data() + 4);
  uint32_t rows = read_be32(img.data() + 8);
  uint32_t cols = read_be32(img.data() + 12);
  uint32_t n_lab = read_be32(lab.data() + 4);
  if (n != n_lab)
    throw FormatError(msg("image count ", n, " != label count ", n_lab));
  size_t want = 16 + size_t(n) * rows * cols;
  if (img.size() != want)
    throw FormatError(msg(images_path, ": payload is ", img.size(), " bytes, expected ", want));
  if (lab.size() != 8 + size_t(n))
    throw FormatError(msg(labels_path, ": payload is ", lab.size(), " bytes, expected ", 8 + size_t(n)));

  Dataset ds;
  ds.name = "mnist";
  ds.class_names = kMnistClasses;
  ds.images = TensorF({int64_t(n), 1, int64_t(rows), int64_t(cols)});
  float* dst = ds.images.data();
  const uint8_t* src = img.data() + 16;
  size_t total = size_t(n) * rows * cols;
  for (size_t i = 0; i < total; ++i) dst[i] = normalize_byte(src[i]);
  ds.labels.resize(n);
  for (uint32_t i = 0; i < n; ++i) {
    uint8_t y = lab[8 + i];
    if (y > 9) throw FormatError(msg(labels_path, ": label ", int(y), " out of range"));
    ds.labels[i] = y;
  }
  return ds;
}

Dataset load_cifar10_bin(const std::vector<std::string>& batch_paths) {
  constexpr size_t kRecord = 3073;
  constexpr size_t kPlane = 1024;
  if (batch_paths.empty()) throw FormatError("no CIFAR-10 batch files given");

  std::vector<std::vector<uint8_t>> files;
  size_t n_total = 0;
  for (const std::string& p : batch_paths) {
    files.push_back(read_file(p));
    if (files.back().size() % kRecord != 0)
      throw FormatError(msg(p, ": size ", files.back().size(), " is not a multiple of ", kRecord));
    n_total += files.back().size() / kRecord;
  }

  Dataset ds;
  ds.name = "cifar10";
  ds.class_names = kCifarClasses;
  ds.images = TensorF({int64_t(n_total), 3, 32, 32});
  ds.labels.resize(n_total);

  size_t idx = 0;
  for (size_t fi = 0; fi < files.size(); ++fi) {
    const std::vector<uint8_t>& buf = files[fi];
    size_t n = buf.size() / kRecord;
    for (size_t r = 0; r < n; ++r, ++idx) {
      const uint8_t* rec = buf.data() + r * kRecord;
      if (rec[0] > 9)
        throw FormatError(msg(batch_paths[fi], ": record ", r, " has label ", int(rec[0])));
      ds.labels[idx] = rec[0];
      float* img = ds.images.data() + int64_t(idx) * 3 * kPlane;
      for (size_t c = 0; c < 3; ++c) {
        const uint8_t* plane = rec + 1 + c * kPlane;
        float* out = img + c * kPlane;
        for (size_t p = 0; p < kPlane; ++p) out[p] = normalize_byte(plane[p]);
      }
    }
  }
  return ds;
}

Dataset Dataset::subset(int64_t n, bool stratified) const {
  n = std::min(n, size());
  std::vector<int64_t> keep;
  if (stratified) {
    int64_t per_class = n / num_classes;
    std::vector<int64_t> counts(static_cast<size_t>(num_classes), 0);
    for (int64_t i = 0; i < size() && static_cast<int64_t>(keep.size()) < per_class * num_classes; ++i) {
      int32_t y = labels[static_cast<size_t>(i)];
      if (counts[y] < per_class) {
        ++counts[y];
        keep.push_back(i);
      }
    }
  } else {
    keep.resize(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) keep[static_cast<size_t>(i)] = i;
  }

  Dataset out;
  out.name = name;
  out.class_names = class_names;
  out.num_classes = num_classes;
  int64_t c = images.dim(1), h = images.dim(2), w = images.dim(3);
  int64_t stride = c * h * w;
  out.images = TensorF({static_cast<int64_t>(keep.size()), c, h, w});
  out.labels.resize(keep.size());
  for (size_t i = 0; i < keep.size(); ++i) {
    std::memcpy(out.images.data() + int64_t(i) * stride,
                images.data() + keep[i] * stride, sizeof(float) * static_cast<size_t>(stride));
    out.labels[i] = labels[static_cast<size_t>(keep[i])];
  }
  return out;
}

std::vector<float> Dataset::mean_pixel() const {
  int64_t n = size(), c = images.dim(1), plane = images.dim(2) * images.dim(3);
  std::vector<double> acc(static_cast<size_t>(c), 0.0);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t ch = 0; ch < c; ++ch) {
      const float* p = images.data() + (i * c + ch) * plane;
      double s = 0;
      for (int64_t q = 0; q < plane; ++q) s += p[q];
      acc[static_cast<size_t>(ch)] += s;
    }
  std::vector<float> mean(static_cast<size_t>(c));
  for (int64_t ch = 0; ch < c; ++ch)
    mean[static_cast<size_t>(ch)] = static_cast<float>(acc[static_cast<size_t>(ch)] / double(n * plane));
  return mean;
}

TensorF Dataset::image(int64_t i) const {
  int64_t c = images.dim(1), h = images.dim(2), w = images.dim(3);
  TensorF out({c, h, w});
  std::memcpy(out.data(), images.data() + i * c * h * w, sizeof(float) * static_cast<size_t>(c * h * w));
  return out;
}

BatchStream::BatchStream(const Dataset& ds, const BatchPlan& plan, int epoch)
    : ds_(ds), plan_(plan), rng_(Rng::derive(plan.seed, 0xBA7C, static_cast<uint32_t>(epoch))) {
  if (plan.batch_size < 1) throw ContractError("batch_size must be >= 1");
  if (plan_.shuffle) {
    order_ = rng_.permutation(ds.size());
  } else {
    order_.resize(static_cast<size_t>(ds.size()));
    for (int64_t i = 0; i < ds.size(); ++i) order_[static_cast<size_t>(i)] = i;
  }
}

int64_t BatchStream::batches_total() const {
  return (ds_.size() + plan_.batch_size - 1) / plan_.batch_size;
}

bool BatchStream::next(TensorF& images, std::vector<int32_t>& labels) {
  int64_t n = static_cast<int64_t>(order_.size());
  if (pos_ >= n) return false;
  int64_t take = std::min<int64_t>(plan_.batch_size, n - pos_);
  int64_t c = ds_.images.dim(1), h = ds_.images.dim(2), w = ds_.images.dim(3);
  int64_t stride = c * h * w;
  images = TensorF({take, c, h, w});
  labels.resize(static_cast<size_t>(take));
  for (int64_t b = 0; b < take; ++b) {
    int64_t src_idx = order_[static_cast<size_t>(pos_ + b)];
    const float* src = ds_.images.data() + src_idx * stride;
    float* dst = images.data() + b * stride;
    labels[static_cast<size_t>(b)] = ds_.labels[static_cast<size_t>(src_idx)];
    if (!plan_.augment) {
      std::memcpy(dst, src, sizeof(float) * static_cast<size_t>(stride));
      continue;
    }
    // pad-4 random crop: shift in [-4,4]^2, zero fill outside; then
    // horizontal flip with probability 1/2
    int dy = static_cast<int>(rng_.below(9)) - 4;
    int dx = static_cast<int>(rng_.below(9)) - 4;
    bool flip = rng_.coin();
    for (int64_t ch = 0; ch < c; ++ch) {
      const float* sp = src + ch * h * w;
      float* dp = dst + ch * h * w;
      for (int64_t i = 0; i < h; ++i) {
        int64_t si = i + dy;
        for (int64_t j = 0; j < w; ++j) {
          int64_t sj = (flip ? w - 1 - j : j) + dx;
          dp[i * w + j] = (si >= 0 && si < h && sj >= 0 && sj < w) ? sp[si * w + sj] : 0.0f;
        }
      }
    }
  }
  pos_ += take;
  return true;
}

}  // namespace xcnn
