#pragma once

// Independent reference implementations used to anchor the fast paths.
// Everything here is deliberately written the slow, obvious way and stays
// clear of im2col/GEMM and the flood-fill code in the library.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <vector>

#include "xcnn/explain.hpp"
#include "xcnn/tensor.hpp"

namespace oracle {

// Direct nested-loop convolution: x[N,Cin,H,W], w[Cout,Cin,kh,kw], b[Cout].
template <typename T>
xcnn::Tensor<T> naive_conv2d(const xcnn::Tensor<T>& x, const xcnn::Tensor<T>& w,
                             const xcnn::Tensor<T>& b, int stride, int pad) {
  int64_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  int64_t cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  int64_t oh = (h + 2 * pad - kh) / stride + 1;
  int64_t ow = (wd + 2 * pad - kw) / stride + 1;
  xcnn::Tensor<T> out({n, cout, oh, ow});
  for (int64_t ni = 0; ni < n; ++ni)
    for (int64_t co = 0; co < cout; ++co)
      for (int64_t i = 0; i < oh; ++i)
        for (int64_t j = 0; j < ow; ++j) {
          T acc = b.data()[co];
          for (int64_t ci = 0; ci < cin; ++ci)
            for (int64_t ki = 0; ki < kh; ++ki)
              for (int64_t kj = 0; kj < kw; ++kj) {
                int64_t ih = i * stride + ki - pad;
                int64_t iw = j * stride + kj - pad;
                if (ih < 0 || ih >= h || iw < 0 || iw >= wd) continue;
                acc += x.data()[((ni * cin + ci) * h + ih) * wd + iw] *
                       w.data()[((co * cin + ci) * kh + ki) * kw + kj];
              }
          out.data()[((ni * cout + co) * oh + i) * ow + j] = acc;
        }
  return out;
}

// Transposed convolution (kernel 2, stride 2) as zero-interleaving followed
// by a valid convolution with the flipped kernel. Input pixels land at odd
// coordinates of a (2H+1)x(2W+1) canvas; weight layout is [Cin,Cout,2,2].
template <typename T>
xcnn::Tensor<T> interleave_tconv2d(const xcnn::Tensor<T>& x, const xcnn::Tensor<T>& w,
                                   const xcnn::Tensor<T>& b) {
  int64_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  int64_t cout = w.dim(1);
  xcnn::Tensor<T> canvas({n, cin, 2 * h + 1, 2 * wd + 1});
  for (int64_t ni = 0; ni < n; ++ni)
    for (int64_t ci = 0; ci < cin; ++ci)
      for (int64_t i = 0; i < h; ++i)
        for (int64_t j = 0; j < wd; ++j)
          canvas.data()[((ni * cin + ci) * (2 * h + 1) + 2 * i + 1) * (2 * wd + 1) + 2 * j + 1] =
              x.data()[((ni * cin + ci) * h + i) * wd + j];
  xcnn::Tensor<T> flipped({cout, cin, 2, 2});
  for (int64_t ci = 0; ci < cin; ++ci)
    for (int64_t co = 0; co < cout; ++co)
      for (int64_t i = 0; i < 2; ++i)
        for (int64_t j = 0; j < 2; ++j)
          flipped.data()[((co * cin + ci) * 2 + (1 - i)) * 2 + (1 - j)] =
              w.data()[((ci * cout + co) * 2 + i) * 2 + j];
  return naive_conv2d(canvas, flipped, b, /*stride=*/1, /*pad=*/0);
}

// Pool window oracle: exhaustive scan over 2x2 windows.
template <typename T>
xcnn::Tensor<T> window_maxpool(const xcnn::Tensor<T>& x) {
  int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  int64_t oh = h / 2, ow = w / 2;
  xcnn::Tensor<T> out({n, c, oh, ow});
  for (int64_t p = 0; p < n * c; ++p)
    for (int64_t i = 0; i < oh; ++i)
      for (int64_t j = 0; j < ow; ++j) {
        T best = x.data()[p * h * w + (2 * i) * w + 2 * j];
        for (int di = 0; di < 2; ++di)
          for (int dj = 0; dj < 2; ++dj)
            best = std::max(best, x.data()[p * h * w + (2 * i + di) * w + 2 * j + dj]);
        out.data()[p * oh * ow + i * ow + j] = best;
      }
  return out;
}

// Connected-component bounding box by iterative label propagation (min
// label over 4-neighbours until fixpoint), independent of the flood fill
// in the library.
inline std::optional<xcnn::BoundingBox> propagate_largest_box(
    const std::vector<uint8_t>& mask, int h, int w) {
  std::vector<int> label(mask.size());
  for (size_t i = 0; i < mask.size(); ++i) label[i] = mask[i] ? static_cast<int>(i) : -1;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        int p = y * w + x;
        if (label[p] < 0) continue;
        const int dy[4] = {-1, 1, 0, 0};
        const int dx[4] = {0, 0, -1, 1};
        for (int d = 0; d < 4; ++d) {
          int ny = y + dy[d], nx = x + dx[d];
          if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
          int q = ny * w + nx;
          if (label[q] >= 0 && label[q] < label[p]) {
            label[p] = label[q];
            changed = true;
          }
        }
      }
  }
  // size per root; roots are minimal pixel indices, so picking the
  // smallest root among maximal sizes matches the declared tie-break
  std::vector<int> roots;
  for (size_t i = 0; i < label.size(); ++i)
    if (label[i] == static_cast<int>(i)) roots.push_back(label[i]);
  if (roots.empty()) return std::nullopt;
  int best_root = -1, best_size = 0;
  for (int r : roots) {
    int size = 0;
    for (int l : label)
      if (l == r) ++size;
    if (size > best_size) {
      best_size = size;
      best_root = r;
    }
  }
  xcnn::BoundingBox box{w, h, -1, -1};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (label[y * w + x] == best_root) {
        box.x0 = std::min(box.x0, x);
        box.x1 = std::max(box.x1, x);
        box.y0 = std::min(box.y0, y);
        box.y1 = std::max(box.y1, y);
      }
  return box;
}

// Cross-entropy straight from the definition, no stabilization.
inline double direct_cross_entropy(const std::vector<double>& logits_row, int label) {
  double denom = 0.0;
  for (double v : logits_row) denom += std::exp(v);
  return -std::log(std::exp(logits_row[static_cast<size_t>(label)]) / denom);
}

}  // namespace oracle
