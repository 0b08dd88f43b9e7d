#include "xcnn/explain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "xcnn/nn.hpp"

namespace xcnn {

Heatmap heatmap_from_batch(const TensorF& maps, int64_t i) {
  if (maps.ndim() != 4 || maps.dim(1) != 1)
    throw ShapeError(msg("heatmap_from_batch: expected [N,1,H,W], got ", shape_str(maps.shape())));
  Heatmap h;
  h.height = static_cast<int>(maps.dim(2));
  h.width = static_cast<int>(maps.dim(3));
  const float* src = maps.data() + i * h.height * h.width;
  h.values.assign(src, src + h.height * h.width);
  h.source_index = i;
  return h;
}

RgbImage render_heatmap(const Heatmap& h) {
  RgbImage img;
  img.height = h.height;
  img.width = h.width;
  img.pixels.resize(static_cast<size_t>(h.height) * h.width * 3);
  for (size_t i = 0; i < h.values.size(); ++i) {
    float v = h.values[i];
    if (v < -1.0f || v > 1.0f)
      throw ContractError(msg("render_heatmap: value ", v, " outside [-1,1]"));
    uint8_t r, g, b;
    if (v <= 0.0f) {
      uint8_t level = static_cast<uint8_t>(std::lround(255.0 * (1.0 + v)));
      r = level, g = level, b = 255;
    } else {
      uint8_t level = static_cast<uint8_t>(std::lround(255.0 * (1.0 - v)));
      r = 255, g = level, b = level;
    }
    img.pixels[3 * i] = r;
    img.pixels[3 * i + 1] = g;
    img.pixels[3 * i + 2] = b;
  }
  return img;
}

namespace {

uint8_t byte_from_unit(float v) {
  float clamped = std::clamp(v, -1.0f, 1.0f);
  return static_cast<uint8_t>(std::lround((clamped + 1.0f) * 127.5f));
}

}  // namespace

GrayImage to_gray(const TensorF& image) {
  if (image.ndim() != 3 || image.dim(0) != 1)
    throw ShapeError(msg("to_gray: expected [1,H,W], got ", shape_str(image.shape())));
  GrayImage img;
  img.height = static_cast<int>(image.dim(1));
  img.width = static_cast<int>(image.dim(2));
  img.pixels.resize(image.numel());
  for (int64_t i = 0; i < image.numel(); ++i) img.pixels[i] = byte_from_unit(image.data()[i]);
  return img;
}

RgbImage to_rgb(const TensorF& image) {
  if (image.ndim() != 3 || image.dim(0) != 3)
    throw ShapeError(msg("to_rgb: expected [3,H,W], got ", shape_str(image.shape())));
  RgbImage img;
  img.height = static_cast<int>(image.dim(1));
  img.width = static_cast<int>(image.dim(2));
  int64_t plane = image.dim(1) * image.dim(2);
  img.pixels.resize(static_cast<size_t>(plane) * 3);
  for (int64_t p = 0; p < plane; ++p)
    for (int c = 0; c < 3; ++c)
      img.pixels[3 * p + c] = byte_from_unit(image.data()[c * plane + p]);
  return img;
}

std::optional<BoundingBox> localize(const Heatmap& h, float threshold) {
  if (threshold <= -1.0f || threshold >= 1.0f)
    throw ContractError("localize: threshold must lie in (-1,1)");
  int hh = h.height, ww = h.width;
  std::vector<uint8_t> mask(static_cast<size_t>(hh) * ww);
  for (size_t i = 0; i < mask.size(); ++i) mask[i] = h.values[i] >= threshold ? 1 : 0;

  std::vector<int32_t> comp(mask.size(), -1);
  int best_size = 0;
  int best_anchor = -1;  // smallest pixel index of the winning component
  BoundingBox best{};
  std::vector<int32_t> stack;
  int32_t next_id = 0;
  for (int start = 0; start < static_cast<int>(mask.size()); ++start) {
    if (!mask[start] || comp[start] >= 0) continue;
    // flood fill, 4-connectivity
    int size = 0;
    BoundingBox box{start % ww, start / ww, start % ww, start / ww};
    stack.push_back(start);
    comp[start] = next_id;
    while (!stack.empty()) {
      int p = stack.back();
      stack.pop_back();
      ++size;
      int y = p / ww, x = p % ww;
      box.x0 = std::min(box.x0, x);
      box.x1 = std::max(box.x1, x);
      box.y0 = std::min(box.y0, y);
      box.y1 = std::max(box.y1, y);
      const int dy[4] = {-1, 1, 0, 0};
      const int dx[4] = {0, 0, -1, 1};
      for (int d = 0; d < 4; ++d) {
        int ny = y + dy[d], nx = x + dx[d];
        if (ny < 0 || ny >= hh || nx < 0 || nx >= ww) continue;
        int np = ny * ww + nx;
        if (mask[np] && comp[np] < 0) {
          comp[np] = next_id;
          stack.push_back(np);
        }
      }
    }
    // `start` is the smallest row-major index of this component, so a
    // strictly-greater size comparison realizes the declared tie-break.
    if (size > best_size) {
      best_size = size;
      best_anchor = start;
      best = box;
    }
    ++next_id;
  }
  (void)best_anchor;
  if (best_size == 0) return std::nullopt;
  return best;
}

std::string bounding_box_csv_row(int64_t index, int32_t pred, int32_t label,
                                 const BoundingBox& box) {
  return msg(index, ",", pred, ",", label, ",", box.x0, ",", box.y0, ",", box.x1, ",", box.y1);
}

void draw_box(RgbImage& img, const BoundingBox& box, uint8_t r, uint8_t g, uint8_t b) {
  auto put = [&](int y, int x) {
    size_t p = (static_cast<size_t>(y) * img.width + x) * 3;
    img.pixels[p] = r;
    img.pixels[p + 1] = g;
    img.pixels[p + 2] = b;
  };
  for (int x = box.x0; x <= box.x1; ++x) {
    put(box.y0, x);
    put(box.y1, x);
  }
  for (int y = box.y0; y <= box.y1; ++y) {
    put(y, box.x0);
    put(y, box.x1);
  }
}

namespace {

double true_class_prob(XcnnModel& model, const TensorF& image, int32_t label) {
  TensorF batch({1, image.dim(0), image.dim(1), image.dim(2)}, image.vec());
  auto out = model.forward(nullptr, batch, /*train=*/false);
  TensorF probs = softmax_rows(out.logits);
  return probs.data()[label];
}

TensorF occlude(const TensorF& image, const std::vector<int32_t>& positions,
                const std::vector<float>& mean_pixel) {
  TensorF out = image.clone();
  int64_t c = image.dim(0), plane = image.dim(1) * image.dim(2);
  for (int32_t p : positions)
    for (int64_t ch = 0; ch < c; ++ch) out.data()[ch * plane + p] = mean_pixel[static_cast<size_t>(ch)];
  return out;
}

}  // namespace

DeletionResult deletion_score(XcnnModel& model, const TensorF& image, const Heatmap& h,
                              float q, int trials, uint32_t seed,
                              const std::vector<float>& mean_pixel) {
  if (image.ndim() != 3)
    throw ShapeError(msg("deletion_score: expected [C,H,W] image, got ", shape_str(image.shape())));
  if (q <= 0.0f || q >= 1.0f) throw ContractError("deletion_score: q must lie in (0,1)");
  if (h.label < 0) throw ContractError("deletion_score: heatmap must carry the true label");
  if (static_cast<size_t>(image.dim(0)) != mean_pixel.size())
    throw ShapeError("deletion_score: mean pixel channel count mismatch");

  int64_t plane = h.height * static_cast<int64_t>(h.width);
  auto count = static_cast<int64_t>(std::ceil(double(q) * double(plane)));
  count = std::min(count, plane);

  double p0 = true_class_prob(model, image, h.label);

  // top-count pixels by heatmap value, value descending then index ascending
  std::vector<int32_t> idx(static_cast<size_t>(plane));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int32_t a, int32_t b) {
    return h.values[static_cast<size_t>(a)] > h.values[static_cast<size_t>(b)];
  });
  std::vector<int32_t> targeted(idx.begin(), idx.begin() + count);

  DeletionResult res;
  res.targeted_drop = p0 - true_class_prob(model, occlude(image, targeted, mean_pixel), h.label);

  double random_acc = 0.0;
  for (int t = 0; t < trials; ++t) {
    Rng rng = Rng::derive(seed, 0xDE1E, static_cast<uint32_t>(t));
    // partial Fisher-Yates for `count` distinct positions
    std::vector<int32_t> pool(static_cast<size_t>(plane));
    std::iota(pool.begin(), pool.end(), 0);
    for (int64_t i = 0; i < count; ++i) {
      int64_t j = i + rng.below(static_cast<uint32_t>(plane - i));
      std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(j)]);
    }
    std::vector<int32_t> positions(pool.begin(), pool.begin() + count);
    random_acc += p0 - true_class_prob(model, occlude(image, positions, mean_pixel), h.label);
  }
  res.random_drop = trials > 0 ? random_acc / trials : 0.0;
  return res;
}

double mutual_information_nats(const std::vector<uint32_t>& codes,
                               const std::vector<int32_t>& labels) {
  if (codes.size() != labels.size() || codes.empty())
    throw ContractError("mutual_information: need equal-length, non-empty code/label arrays");
  double n = static_cast<double>(codes.size());
  std::map<uint32_t, std::map<int32_t, int64_t>> joint;
  std::map<uint32_t, int64_t> pc;
  std::map<int32_t, int64_t> py;
  for (size_t i = 0; i < codes.size(); ++i) {
    ++joint[codes[i]][labels[i]];
    ++pc[codes[i]];
    ++py[labels[i]];
  }
  double mi = 0.0;
  for (const auto& [c, row] : joint)
    for (const auto& [y, cnt] : row) {
      double pxy = cnt / n;
      mi += pxy * std::log(pxy * n * n / (double(pc[c]) * double(py[y])));
    }
  return std::max(mi, 0.0);
}

namespace {

// Average-pools a [H,W] plane to grid x grid. H and W must divide evenly.
void pool_to_grid(const float* plane, int h, int w, int grid, float* out) {
  int bh = h / grid, bw = w / grid;
  for (int gy = 0; gy < grid; ++gy)
    for (int gx = 0; gx < grid; ++gx) {
      double acc = 0.0;
      for (int i = 0; i < bh; ++i)
        for (int j = 0; j < bw; ++j) acc += plane[(gy * bh + i) * w + (gx * bw + j)];
      out[gy * grid + gx] = static_cast<float>(acc / (bh * bw));
    }
}

// Binarizes each cell at its own median (upper median for even counts)
// across the sample set and packs row-major cells into code bits.
std::vector<uint32_t> codes_from_cells(const std::vector<float>& cells, int64_t n, int ncell) {
  std::vector<uint32_t> codes(static_cast<size_t>(n), 0);
  std::vector<float> column(static_cast<size_t>(n));
  for (int cell = 0; cell < ncell; ++cell) {
    for (int64_t i = 0; i < n; ++i) column[static_cast<size_t>(i)] = cells[i * ncell + cell];
    std::vector<float> sorted = column;
    std::nth_element(sorted.begin(), sorted.begin() + n / 2, sorted.end());
    float median = sorted[static_cast<size_t>(n / 2)];
    for (int64_t i = 0; i < n; ++i)
      if (column[static_cast<size_t>(i)] >= median)
        codes[static_cast<size_t>(i)] |= (1u << cell);
  }
  return codes;
}

}  // namespace

MIReport mi_diagnostic(XcnnModel& model, const Dataset& ds, int grid, int batch_size) {
  if (ds.size() < 1000)
    throw ContractError(msg("mi_diagnostic: needs >= 1000 samples, got ", ds.size()));
  if (grid < 1 || grid * grid > 31)
    throw ContractError("mi_diagnostic: grid must be in [1,5]");
  if (ds.height() % grid != 0 || ds.width() % grid != 0)
    throw ContractError(msg("mi_diagnostic: image size ", ds.height(), "x", ds.width(),
                            " is not divisible by grid ", grid));
  {
    int32_t first = ds.labels[0];
    bool varied = false;
    for (int32_t y : ds.labels)
      if (y != first) {
        varied = true;
        break;
      }
    if (!varied) throw ContractError("mi_diagnostic: labels are degenerate (single class)");
  }

  int64_t n = ds.size();
  int ncell = grid * grid;
  int h = ds.height(), w = ds.width();
  std::vector<float> heat_cells(static_cast<size_t>(n) * ncell);
  std::vector<float> input_cells(static_cast<size_t>(n) * ncell);

  BatchPlan plan;
  plan.batch_size = batch_size;
  plan.shuffle = false;
  BatchStream stream(ds, plan, 0);
  TensorF images;
  std::vector<int32_t> labels;
  int64_t base = 0;
  std::vector<float> gray(static_cast<size_t>(h) * w);
  while (stream.next(images, labels)) {
    auto out = model.forward(nullptr, images, /*train=*/false);
    if (!out.heatmap.defined())
      throw ContractError("mi_diagnostic: model has no heatmap output");
    int64_t bs = images.dim(0);
    int64_t c = images.dim(1);
    int64_t plane = static_cast<int64_t>(h) * w;
    for (int64_t i = 0; i < bs; ++i) {
      pool_to_grid(out.heatmap.data() + i * plane, h, w, grid,
                   heat_cells.data() + (base + i) * ncell);
      // channel-averaged input
      const float* img = images.data() + i * c * plane;
      for (int64_t p = 0; p < plane; ++p) {
        float acc = 0.0f;
        for (int64_t ch = 0; ch < c; ++ch) acc += img[ch * plane + p];
        gray[static_cast<size_t>(p)] = acc / static_cast<float>(c);
      }
      pool_to_grid(gray.data(), h, w, grid, input_cells.data() + (base + i) * ncell);
    }
    base += bs;
  }

  MIReport report;
  report.grid = grid;
  report.sample_count = n;
  report.mi_heatmap_label = mutual_information_nats(codes_from_cells(heat_cells, n, ncell), ds.labels);
  report.mi_input_label = mutual_information_nats(codes_from_cells(input_cells, n, ncell), ds.labels);
  return report;
}

void write_ppm(const std::string& path, const RgbImage& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(msg("cannot open ", path, " for writing"));
  os << "P6\n" << img.width << " " << img.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.pixels.data()),
           static_cast<std::streamsize>(img.pixels.size()));
  if (!os) throw Error(msg("write failed for ", path));
}

void write_pgm(const std::string& path, const GrayImage& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(msg("cannot open ", path, " for writing"));
  os << "P5\n" << img.width << " " << img.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.pixels.data()),
           static_cast<std::streamsize>(img.pixels.size()));
  if (!os) throw Error(msg("write failed for ", path));
}

}  // namespace xcnn
