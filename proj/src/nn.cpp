#include "xcnn/nn.hpp"

#include <algorithm>
#include <cmath>

#include "xcnn/blas.hpp"

namespace xcnn {

namespace {

// col has K = Cin*kh*kw rows and N*OH*OW columns; column index is
// ((n*OH + oh)*OW + ow), so each output row of the GEMM holds the batch's
// feature maps back to back.
template <typename T>
void im2col(const T* x, int64_t n_imgs, int64_t cin, int64_t h, int64_t w,
            int kh, int kw, int stride, int pad, int64_t oh, int64_t ow, T* col) {
  int64_t cols = n_imgs * oh * ow;
  for (int64_t ci = 0; ci < cin; ++ci) {
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        T* dst = col + ((ci * kh + ki) * kw + kj) * cols;
        for (int64_t n = 0; n < n_imgs; ++n) {
          const T* img = x + (n * cin + ci) * h * w;
          for (int64_t i = 0; i < oh; ++i) {
            int64_t ih = i * stride + ki - pad;
            if (ih < 0 || ih >= h) {
              for (int64_t j = 0; j < ow; ++j) *dst++ = T(0);
              continue;
            }
            const T* row = img + ih * w;
            for (int64_t j = 0; j < ow; ++j) {
              int64_t iw = j * stride + kj - pad;
              *dst++ = (iw >= 0 && iw < w) ? row[iw] : T(0);
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_accumulate(const T* col, int64_t n_imgs, int64_t cin, int64_t h,
                       int64_t w, int kh, int kw, int stride, int pad,
                       int64_t oh, int64_t ow, T* dx) {
  int64_t cols = n_imgs * oh * ow;
  for (int64_t ci = 0; ci < cin; ++ci) {
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        const T* src = col + ((ci * kh + ki) * kw + kj) * cols;
        for (int64_t n = 0; n < n_imgs; ++n) {
          T* img = dx + (n * cin + ci) * h * w;
          for (int64_t i = 0; i < oh; ++i) {
            int64_t ih = i * stride + ki - pad;
            if (ih < 0 || ih >= h) {
              src += ow;
              continue;
            }
            T* row = img + ih * w;
            for (int64_t j = 0; j < ow; ++j) {
              int64_t iw = j * stride + kj - pad;
              if (iw >= 0 && iw < w) row[iw] += src[j];
            }
            src += ow;
          }
        }
      }
    }
  }
}

template <typename T>
void require_rank(const char* op, const Tensor<T>& t, int rank) {
  if (t.ndim() != rank)
    throw ShapeError(msg(op, ": expected rank-", rank, " tensor, got ", shape_str(t.shape())));
}

}  // namespace

template <typename T>
Tensor<T> conv2d(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& w,
                 const Tensor<T>& b, int stride, int pad) {
  require_rank("conv2d", x, 4);
  require_rank("conv2d", w, 4);
  if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");
  if (pad < 0) throw ShapeError("conv2d: padding must be >= 0");
  int64_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), wdt = x.dim(3);
  int64_t cout = w.dim(0);
  int kh = static_cast<int>(w.dim(2)), kw = static_cast<int>(w.dim(3));
  if (w.dim(1) != cin)
    throw ShapeError(msg("conv2d: input has ", cin, " channels but weight expects ", w.dim(1)));
  if (b.numel() != cout)
    throw ShapeError(msg("conv2d: bias size ", b.numel(), " != out channels ", cout));
  if (h + 2 * pad < kh || wdt + 2 * pad < kw)
    throw ShapeError(msg("conv2d: kernel ", kh, "x", kw, " larger than padded input ",
                         h + 2 * pad, "x", wdt + 2 * pad));

  int64_t oh = conv_out_size(h, kh, stride, pad);
  int64_t ow = conv_out_size(wdt, kw, stride, pad);
  int64_t k = cin * kh * kw;
  int64_t cols = n * oh * ow;

  Tensor<T> col(Shape{k, cols});
  im2col(x.data(), n, cin, h, wdt, kh, kw, stride, pad, oh, ow, col.data());

  // out_mat[co, n*oh*ow] then scattered to [n, co, oh, ow] with bias.
  std::vector<T> out_mat(static_cast<size_t>(cout * cols));
  gemm(false, false, cout, cols, k, T(1), w.data(), col.data(), T(0), out_mat.data());

  Tensor<T> out(Shape{n, cout, oh, ow});
  int64_t plane = oh * ow;
  for (int64_t co = 0; co < cout; ++co) {
    T bias = b.data()[co];
    const T* src = out_mat.data() + co * cols;
    for (int64_t ni = 0; ni < n; ++ni) {
      T* dst = out.data() + (ni * cout + co) * plane;
      const T* s = src + ni * plane;
      for (int64_t p = 0; p < plane; ++p) dst[p] = s[p] + bias;
    }
  }

  if (tape) {
    bool need_x = tape->tracked(x);
    bool need_w = tape->tracked(w);
    bool need_b = tape->tracked(b);
    if (need_x || need_w || need_b) {
      out.ensure_grad();
      std::vector<int> ins;
      for (const Tensor<T>* t : {&x, &w, &b})
        if (tape->tracked(*t)) ins.push_back(t->node());
      Tensor<T> cx = x, cw = w, cb = b, co_t = out, ccol = col;
      tape->record(out, std::move(ins), [cx, cw, cb, co_t, ccol, need_x, need_w,
                                         need_b, n, cin, h, wdt, kh, kw, stride,
                                         pad, oh, ow, cout, k, cols]() mutable {
        int64_t plane = oh * ow;
        std::vector<T> gout_mat(static_cast<size_t>(cout * cols));
        for (int64_t co = 0; co < cout; ++co) {
          T* dst = gout_mat.data() + co * cols;
          for (int64_t ni = 0; ni < n; ++ni) {
            const T* g = co_t.grad() + (ni * cout + co) * plane;
            std::copy(g, g + plane, dst + ni * plane);
          }
        }
        if (need_b) {
          T* gb = cb.grad();
          for (int64_t co = 0; co < cout; ++co) {
            T acc = 0;
            const T* g = gout_mat.data() + co * cols;
            for (int64_t c = 0; c < cols; ++c) acc += g[c];
            gb[co] += acc;
          }
        }
        if (need_w)
          gemm(false, true, cout, k, cols, T(1), gout_mat.data(), ccol.data(), T(1), cw.grad());
        if (need_x) {
          std::vector<T> gcol(static_cast<size_t>(k * cols));
          gemm(true, false, k, cols, cout, T(1), cw.data(), gout_mat.data(), T(0), gcol.data());
          col2im_accumulate(gcol.data(), n, cin, h, wdt, kh, kw, stride, pad, oh, ow, cx.grad());
        }
      });
    }
  }
  return out;
}

template <typename T>
Tensor<T> transposed_conv2d(Tape<T>* tape, const Tensor<T>& x,
                            const Tensor<T>& w, const Tensor<T>& b,
                            int kernel, int stride) {
  require_rank("transposed_conv2d", x, 4);
  require_rank("transposed_conv2d", w, 4);
  if (kernel != 2 || stride != 2)
    throw ConfigError(msg("transposed_conv2d: only kernel 2 / stride 2 is supported, got kernel ",
                          kernel, " stride ", stride));
  int64_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), wdt = x.dim(3);
  if (w.dim(0) != cin)
    throw ShapeError(msg("transposed_conv2d: input has ", cin, " channels but weight expects ", w.dim(0)));
  if (w.dim(2) != 2 || w.dim(3) != 2)
    throw ConfigError("transposed_conv2d: weight kernel must be 2x2");
  int64_t cout = w.dim(1);
  if (b.numel() != cout)
    throw ShapeError(msg("transposed_conv2d: bias size ", b.numel(), " != out channels ", cout));

  int64_t oh = 2 * h, ow = 2 * wdt;
  Tensor<T> out(Shape{n, cout, oh, ow});
  for (int64_t ni = 0; ni < n; ++ni) {
    for (int64_t co = 0; co < cout; ++co) {
      T* o = out.data() + (ni * cout + co) * oh * ow;
      std::fill(o, o + oh * ow, b.data()[co]);
      for (int64_t ci = 0; ci < cin; ++ci) {
        const T* xp = x.data() + (ni * cin + ci) * h * wdt;
        const T* wk = w.data() + (ci * cout + co) * 4;
        for (int64_t i = 0; i < h; ++i) {
          T* top = o + (2 * i) * ow;
          T* bot = top + ow;
          const T* xr = xp + i * wdt;
          for (int64_t j = 0; j < wdt; ++j) {
            T v = xr[j];
            top[2 * j] += v * wk[0];
            top[2 * j + 1] += v * wk[1];
            bot[2 * j] += v * wk[2];
            bot[2 * j + 1] += v * wk[3];
          }
        }
      }
    }
  }

  if (tape) {
    bool need_x = tape->tracked(x);
    bool need_w = tape->tracked(w);
    bool need_b = tape->tracked(b);
    if (need_x || need_w || need_b) {
      out.ensure_grad();
      std::vector<int> ins;
      for (const Tensor<T>* t : {&x, &w, &b})
        if (tape->tracked(*t)) ins.push_back(t->node());
      Tensor<T> cx = x, cw = w, cb = b, co_t = out;
      tape->record(out, std::move(ins), [cx, cw, cb, co_t, need_x, need_w, need_b,
                                         n, cin, h, wdt, cout, oh, ow]() mutable {
        for (int64_t ni = 0; ni < n; ++ni) {
          for (int64_t co = 0; co < cout; ++co) {
            const T* g = co_t.grad() + (ni * cout + co) * oh * ow;
            if (need_b) {
              T acc = 0;
              for (int64_t p = 0; p < oh * ow; ++p) acc += g[p];
              cb.grad()[co] += acc;
            }
            for (int64_t ci = 0; ci < cin; ++ci) {
              const T* wk = cw.data() + (ci * cout + co) * 4;
              T* gw = need_w ? cw.grad() + (ci * cout + co) * 4 : nullptr;
              const T* xp = cx.data() + (ni * cin + ci) * h * wdt;
              T* gx = need_x ? cx.grad() + (ni * cin + ci) * h * wdt : nullptr;
              for (int64_t i = 0; i < h; ++i) {
                const T* top = g + (2 * i) * ow;
                const T* bot = top + ow;
                for (int64_t j = 0; j < wdt; ++j) {
                  T g00 = top[2 * j], g01 = top[2 * j + 1];
                  T g10 = bot[2 * j], g11 = bot[2 * j + 1];
                  if (need_x)
                    gx[i * wdt + j] += g00 * wk[0] + g01 * wk[1] + g10 * wk[2] + g11 * wk[3];
                  if (need_w) {
                    T v = xp[i * wdt + j];
                    gw[0] += v * g00;
                    gw[1] += v * g01;
                    gw[2] += v * g10;
                    gw[3] += v * g11;
                  }
                }
              }
            }
          }
        }
      });
    }
  }
  return out;
}

template <typename T>
Tensor<T> avgpool2d(Tape<T>* tape, const Tensor<T>& x) {
  require_rank("avgpool2d", x, 4);
  int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  int64_t oh = h / 2, ow = w / 2;
  if (oh < 1 || ow < 1) throw ShapeError(msg("avgpool2d: input ", h, "x", w, " too small"));
  Tensor<T> out(Shape{n, c, oh, ow});
  int64_t planes = n * c;
  for (int64_t p = 0; p < planes; ++p) {
    const T* src = x.data() + p * h * w;
    T* dst = out.data() + p * oh * ow;
    for (int64_t i = 0; i < oh; ++i) {
      const T* r0 = src + (2 * i) * w;
      const T* r1 = r0 + w;
      for (int64_t j = 0; j < ow; ++j)
        dst[i * ow + j] = (r0[2 * j] + r0[2 * j + 1] + r1[2 * j] + r1[2 * j + 1]) * T(0.25);
    }
  }
  if (tape && tape->tracked(x)) {
    out.ensure_grad();
    Tensor<T> cx = x, co = out;
    tape->record(out, {x.node()}, [cx, co, planes, h, w, oh, ow]() mutable {
      for (int64_t p = 0; p < planes; ++p) {
        const T* g = co.grad() + p * oh * ow;
        T* gx = cx.grad() + p * h * w;
        for (int64_t i = 0; i < oh; ++i) {
          T* r0 = gx + (2 * i) * w;
          T* r1 = r0 + w;
          for (int64_t j = 0; j < ow; ++j) {
            T q = g[i * ow + j] * T(0.25);
            r0[2 * j] += q;
            r0[2 * j + 1] += q;
            r1[2 * j] += q;
            r1[2 * j + 1] += q;
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> maxpool2d(Tape<T>* tape, const Tensor<T>& x) {
  require_rank("maxpool2d", x, 4);
  int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  int64_t oh = h / 2, ow = w / 2;
  if (oh < 1 || ow < 1) throw ShapeError(msg("maxpool2d: input ", h, "x", w, " too small"));
  Tensor<T> out(Shape{n, c, oh, ow});
  int64_t planes = n * c;
  auto argmax = std::make_shared<std::vector<int32_t>>(static_cast<size_t>(planes * oh * ow));
  for (int64_t p = 0; p < planes; ++p) {
    const T* src = x.data() + p * h * w;
    T* dst = out.data() + p * oh * ow;
    int32_t* am = argmax->data() + p * oh * ow;
    for (int64_t i = 0; i < oh; ++i) {
      for (int64_t j = 0; j < ow; ++j) {
        // row-major window scan; strict > keeps the first maximum on ties
        int64_t base = (2 * i) * w + 2 * j;
        int64_t cand[4] = {base, base + 1, base + w, base + w + 1};
        int64_t best = cand[0];
        for (int t = 1; t < 4; ++t)
          if (src[cand[t]] > src[best]) best = cand[t];
        dst[i * ow + j] = src[best];
        am[i * ow + j] = static_cast<int32_t>(best);
      }
    }
  }
  if (tape && tape->tracked(x)) {
    out.ensure_grad();
    Tensor<T> cx = x, co = out;
    tape->record(out, {x.node()}, [cx, co, argmax, planes, h, w, oh, ow]() mutable {
      for (int64_t p = 0; p < planes; ++p) {
        const T* g = co.grad() + p * oh * ow;
        T* gx = cx.grad() + p * h * w;
        const int32_t* am = argmax->data() + p * oh * ow;
        for (int64_t q = 0; q < oh * ow; ++q) gx[am[q]] += g[q];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> batchnorm2d(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& gamma,
                      const Tensor<T>& beta, Tensor<T>& running_mean,
                      Tensor<T>& running_var, T momentum, T eps, bool train) {
  require_rank("batchnorm2d", x, 4);
  int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (gamma.numel() != c || beta.numel() != c || running_mean.numel() != c || running_var.numel() != c)
    throw ShapeError(msg("batchnorm2d: parameter size must match ", c, " channels"));
  if (train && n < 2)
    throw ContractError("batchnorm2d: train mode needs batch size >= 2");

  int64_t plane = h * w;
  int64_t m = n * plane;
  std::vector<T> mean(c), invstd(c);
  if (train) {
    for (int64_t ci = 0; ci < c; ++ci) {
      T acc = 0;
      for (int64_t ni = 0; ni < n; ++ni) {
        const T* src = x.data() + (ni * c + ci) * plane;
        for (int64_t p = 0; p < plane; ++p) acc += src[p];
      }
      T mu = acc / static_cast<T>(m);
      T var_acc = 0;
      for (int64_t ni = 0; ni < n; ++ni) {
        const T* src = x.data() + (ni * c + ci) * plane;
        for (int64_t p = 0; p < plane; ++p) {
          T d = src[p] - mu;
          var_acc += d * d;
        }
      }
      T var = var_acc / static_cast<T>(m);
      mean[ci] = mu;
      invstd[ci] = T(1) / std::sqrt(var + eps);
      running_mean.data()[ci] = (T(1) - momentum) * running_mean.data()[ci] + momentum * mu;
      running_var.data()[ci] = (T(1) - momentum) * running_var.data()[ci] + momentum * var;
    }
  } else {
    for (int64_t ci = 0; ci < c; ++ci) {
      mean[ci] = running_mean.data()[ci];
      invstd[ci] = T(1) / std::sqrt(running_var.data()[ci] + eps);
    }
  }

  Tensor<T> out(x.shape());
  for (int64_t ni = 0; ni < n; ++ni) {
    for (int64_t ci = 0; ci < c; ++ci) {
      const T* src = x.data() + (ni * c + ci) * plane;
      T* dst = out.data() + (ni * c + ci) * plane;
      T g = gamma.data()[ci], bb = beta.data()[ci], mu = mean[ci], is = invstd[ci];
      for (int64_t p = 0; p < plane; ++p) dst[p] = (src[p] - mu) * is * g + bb;
    }
  }

  if (tape) {
    bool need_x = tape->tracked(x);
    bool need_g = tape->tracked(gamma);
    bool need_b = tape->tracked(beta);
    if (need_x || need_g || need_b) {
      out.ensure_grad();
      std::vector<int> ins;
      for (const Tensor<T>* t : {&x, &gamma, &beta})
        if (tape->tracked(*t)) ins.push_back(t->node());
      auto mean_s = std::make_shared<std::vector<T>>(std::move(mean));
      auto invstd_s = std::make_shared<std::vector<T>>(std::move(invstd));
      Tensor<T> cx = x, cg = gamma, cb = beta, co = out;
      tape->record(out, std::move(ins), [cx, cg, cb, co, mean_s, invstd_s, need_x,
                                         need_g, need_b, n, c, plane, m, train]() mutable {
        for (int64_t ci = 0; ci < c; ++ci) {
          T mu = (*mean_s)[ci], is = (*invstd_s)[ci], gam = cg.data()[ci];
          // per-channel sums of g and g*xhat
          T sum_g = 0, sum_gx = 0;
          for (int64_t ni = 0; ni < n; ++ni) {
            const T* g = co.grad() + (ni * c + ci) * plane;
            const T* src = cx.data() + (ni * c + ci) * plane;
            for (int64_t p = 0; p < plane; ++p) {
              sum_g += g[p];
              sum_gx += g[p] * (src[p] - mu) * is;
            }
          }
          if (need_b) cb.grad()[ci] += sum_g;
          if (need_g) cg.grad()[ci] += sum_gx;
          if (need_x) {
            if (train) {
              T inv_m = T(1) / static_cast<T>(m);
              for (int64_t ni = 0; ni < n; ++ni) {
                const T* g = co.grad() + (ni * c + ci) * plane;
                const T* src = cx.data() + (ni * c + ci) * plane;
                T* gx = cx.grad() + (ni * c + ci) * plane;
                for (int64_t p = 0; p < plane; ++p) {
                  T xhat = (src[p] - mu) * is;
                  gx[p] += gam * is * (g[p] - sum_g * inv_m - xhat * sum_gx * inv_m);
                }
              }
            } else {
              // running statistics are constants in eval mode
              for (int64_t ni = 0; ni < n; ++ni) {
                const T* g = co.grad() + (ni * c + ci) * plane;
                T* gx = cx.grad() + (ni * c + ci) * plane;
                for (int64_t p = 0; p < plane; ++p) gx[p] += gam * is * g[p];
              }
            }
          }
        }
      });
    }
  }
  return out;
}

template <typename T>
Tensor<T> linear(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& w,
                 const Tensor<T>& b) {
  require_rank("linear", x, 2);
  require_rank("linear", w, 2);
  int64_t n = x.dim(0), f = x.dim(1), o = w.dim(1);
  if (w.dim(0) != f)
    throw ShapeError(msg("linear: input features ", f, " != weight rows ", w.dim(0)));
  if (b.numel() != o)
    throw ShapeError(msg("linear: bias size ", b.numel(), " != out features ", o));
  Tensor<T> out(Shape{n, o});
  gemm(false, false, n, o, f, T(1), x.data(), w.data(), T(0), out.data());
  for (int64_t i = 0; i < n; ++i) {
    T* row = out.data() + i * o;
    for (int64_t j = 0; j < o; ++j) row[j] += b.data()[j];
  }
  if (tape) {
    bool need_x = tape->tracked(x);
    bool need_w = tape->tracked(w);
    bool need_b = tape->tracked(b);
    if (need_x || need_w || need_b) {
      out.ensure_grad();
      std::vector<int> ins;
      for (const Tensor<T>* t : {&x, &w, &b})
        if (tape->tracked(*t)) ins.push_back(t->node());
      Tensor<T> cx = x, cw = w, cb = b, co = out;
      tape->record(out, std::move(ins), [cx, cw, cb, co, need_x, need_w, need_b, n, f, o]() mutable {
        if (need_x) gemm(false, true, n, f, o, T(1), co.grad(), cw.data(), T(1), cx.grad());
        if (need_w) gemm(true, false, f, o, n, T(1), cx.data(), co.grad(), T(1), cw.grad());
        if (need_b) {
          T* gb = cb.grad();
          for (int64_t i = 0; i < n; ++i) {
            const T* g = co.grad() + i * o;
            for (int64_t j = 0; j < o; ++j) gb[j] += g[j];
          }
        }
      });
    }
  }
  return out;
}

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits) {
  if (logits.ndim() != 2) throw ShapeError("softmax_rows: expects [N,K] logits");
  int64_t n = logits.dim(0), k = logits.dim(1);
  Tensor<T> probs(logits.shape());
  for (int64_t i = 0; i < n; ++i) {
    const T* row = logits.data() + i * k;
    T* p = probs.data() + i * k;
    T mx = row[0];
    for (int64_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    T s = 0;
    for (int64_t j = 0; j < k; ++j) {
      p[j] = std::exp(row[j] - mx);
      s += p[j];
    }
    T inv = T(1) / s;
    for (int64_t j = 0; j < k; ++j) p[j] *= inv;
  }
  return probs;
}

template <typename T>
std::vector<int32_t> argmax_rows(const Tensor<T>& logits) {
  if (logits.ndim() != 2) throw ShapeError("argmax_rows: expects [N,K]");
  int64_t n = logits.dim(0), k = logits.dim(1);
  std::vector<int32_t> out(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const T* row = logits.data() + i * k;
    int32_t best = 0;
    for (int64_t j = 1; j < k; ++j)
      if (row[j] > row[best]) best = static_cast<int32_t>(j);
    out[static_cast<size_t>(i)] = best;
  }
  return out;
}

template <typename T>
Tensor<T> softmax_cross_entropy(Tape<T>* tape, const Tensor<T>& logits,
                                const std::vector<int32_t>& labels) {
  if (logits.ndim() != 2) throw ShapeError("softmax_cross_entropy: expects [N,K] logits");
  int64_t n = logits.dim(0), k = logits.dim(1);
  if (static_cast<int64_t>(labels.size()) != n)
    throw ShapeError(msg("softmax_cross_entropy: ", labels.size(), " labels for ", n, " rows"));
  for (int32_t y : labels)
    if (y < 0 || y >= k)
      throw ContractError(msg("softmax_cross_entropy: label ", y, " outside [0,", k, ")"));

  Tensor<T> probs = softmax_rows(logits);
  T loss_acc = 0;
  for (int64_t i = 0; i < n; ++i) {
    T p = probs.data()[i * k + labels[static_cast<size_t>(i)]];
    loss_acc -= std::log(std::max(p, std::numeric_limits<T>::min()));
  }
  Tensor<T> loss(Shape{1});
  loss.data()[0] = loss_acc / static_cast<T>(n);

  if (tape && tape->tracked(logits)) {
    loss.ensure_grad();
    auto labels_s = std::make_shared<std::vector<int32_t>>(labels);
    Tensor<T> cl = logits, cp = probs, co = loss;
    tape->record(loss, {logits.node()}, [cl, cp, co, labels_s, n, k]() mutable {
      T gscale = co.grad()[0] / static_cast<T>(n);
      T* gl = cl.grad();
      for (int64_t i = 0; i < n; ++i) {
        const T* p = cp.data() + i * k;
        T* g = gl + i * k;
        int32_t y = (*labels_s)[static_cast<size_t>(i)];
        for (int64_t j = 0; j < k; ++j) g[j] += gscale * (p[j] - (j == y ? T(1) : T(0)));
      }
    });
  }
  return loss;
}

#define XCNN_INSTANTIATE(T)                                                              \
  template Tensor<T> conv2d<T>(Tape<T>*, const Tensor<T>&, const Tensor<T>&,            \
                               const Tensor<T>&, int, int);                             \
  template Tensor<T> transposed_conv2d<T>(Tape<T>*, const Tensor<T>&, const Tensor<T>&, \
                                          const Tensor<T>&, int, int);                  \
  template Tensor<T> avgpool2d<T>(Tape<T>*, const Tensor<T>&);                          \
  template Tensor<T> maxpool2d<T>(Tape<T>*, const Tensor<T>&);                          \
  template Tensor<T> batchnorm2d<T>(Tape<T>*, const Tensor<T>&, const Tensor<T>&,       \
                                    const Tensor<T>&, Tensor<T>&, Tensor<T>&, T, T, bool); \
  template Tensor<T> linear<T>(Tape<T>*, const Tensor<T>&, const Tensor<T>&,            \
                               const Tensor<T>&);                                       \
  template Tensor<T> softmax_rows<T>(const Tensor<T>&);                                 \
  template std::vector<int32_t> argmax_rows<T>(const Tensor<T>&);                       \
  template Tensor<T> softmax_cross_entropy<T>(Tape<T>*, const Tensor<T>&,               \
                                              const std::vector<int32_t>&);

XCNN_INSTANTIATE(float)
XCNN_INSTANTIATE(double)
#undef XCNN_INSTANTIATE

}  // namespace xcnn
