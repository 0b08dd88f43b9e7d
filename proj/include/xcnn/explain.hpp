#pragma once

#include <optional>
#include <string>
#include <vector>

#include "xcnn/data.hpp"
#include "xcnn/xcnn_model.hpp"

namespace xcnn {

struct Heatmap {
  int height = 0;
  int width = 0;
  std::vector<float> values;  // row-major, in [-1,1]
  int64_t source_index = -1;
  int32_t predicted = -1;
  int32_t label = -1;

  float at(int y, int x) const { return values[static_cast<size_t>(y) * width + x]; }
};

// View of heatmap i from a forward output [N,1,H,W].
Heatmap heatmap_from_batch(const TensorF& maps, int64_t i);

struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> pixels;  // H*W*3, row-major RGB
};

struct GrayImage {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> pixels;
};

// Diverging blue-white-red map: -1 -> (0,0,255), 0 -> (255,255,255),
// +1 -> (255,0,0). Values outside [-1,1] are a contract violation.
RgbImage render_heatmap(const Heatmap& h);

// [C,H,W] image in [-1,1] to gray (C=1) or RGB bytes.
GrayImage to_gray(const TensorF& image);
RgbImage to_rgb(const TensorF& image);

struct BoundingBox {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive pixel bounds
  bool contains(double x, double y) const {
    return x >= x0 && x <= x1 && y >= y0 && y <= y1;
  }
};

// Thresholds at `threshold`, labels 4-connected components, and returns
// the bounding box of the largest one (ties go to the component holding
// the smallest row-major pixel index). Empty mask -> nullopt.
std::optional<BoundingBox> localize(const Heatmap& h, float threshold = 0.5f);

std::string bounding_box_csv_row(int64_t index, int32_t pred, int32_t label,
                                 const BoundingBox& box);
const std::string kBoxCsvHeader = "index,pred,true,x0,y0,x1,y1";

void draw_box(RgbImage& img, const BoundingBox& box, uint8_t r, uint8_t g, uint8_t b);

struct DeletionResult {
  double targeted_drop = 0.0;
  double random_drop = 0.0;
};

// Occludes ceil(q*H*W) pixels with the dataset mean pixel: once the
// highest-heatmap pixels, and `trials` times random positions. Reports the
// mean drop in the true-class softmax probability.
DeletionResult deletion_score(XcnnModel& model, const TensorF& image, const Heatmap& h,
                              float q, int trials, uint32_t seed,
                              const std::vector<float>& mean_pixel);

// Plug-in mutual information (nats) between discrete codes and labels.
double mutual_information_nats(const std::vector<uint32_t>& codes,
                               const std::vector<int32_t>& labels);

struct MIReport {
  double mi_heatmap_label = 0.0;  // nats
  double mi_input_label = 0.0;
  int grid = 4;
  int64_t sample_count = 0;
};

// Pools heatmaps and grayscale inputs to grid x grid, binarizes each cell
// at its per-cell median over the set, and estimates MI(code; label) for
// both. Needs >= 1000 samples and at least two classes present.
MIReport mi_diagnostic(XcnnModel& model, const Dataset& ds, int grid = 4,
                       int batch_size = 256);

// Binary PPM (P6) / PGM (P5) writers, byte-exact:
//   "P6\n<w> <h>\n255\n" + RGB triples, "P5\n<w> <h>\n255\n" + gray bytes.
void write_ppm(const std::string& path, const RgbImage& img);
void write_pgm(const std::string& path, const GrayImage& img);

}  // namespace xcnn
