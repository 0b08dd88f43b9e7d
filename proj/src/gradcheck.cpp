#include "xcnn/gradcheck.hpp"

#include <cmath>

#include "xcnn/nn.hpp"

namespace xcnn {

namespace {

double eval_scalar(const ScalarFn& f, Tensor<double>& x) {
  Tensor<double> out = f(nullptr, x);
  if (out.numel() != 1) throw ContractError("gradcheck: f must be scalar-valued");
  return out.data()[0];
}

}  // namespace

GradcheckReport gradcheck(const ScalarFn& f, Tensor<double> x, double eps, double tol) {
  GradcheckReport report;

  Tape<double> tape;
  tape.watch(x);
  x.zero_grad();
  Tensor<double> loss = f(&tape, x);
  if (loss.numel() != 1) throw ContractError("gradcheck: f must be scalar-valued");
  tape.backward(loss);

  std::vector<double> autodiff(x.grad(), x.grad() + x.numel());
  double f0 = loss.data()[0];
  if (!std::isfinite(f0)) {
    report.nonfinite = true;
    report.note = "forward value is not finite";
    return report;
  }

  double* px = x.data();
  for (int64_t i = 0; i < x.numel(); ++i) {
    double saved = px[i];
    px[i] = saved + eps;
    double fp = eval_scalar(f, x);
    px[i] = saved - eps;
    double fm = eval_scalar(f, x);
    px[i] = saved;

    if (!std::isfinite(fp) || !std::isfinite(fm) || !std::isfinite(autodiff[i])) {
      report.nonfinite = true;
      report.note = msg("non-finite value at coordinate ", i);
      return report;
    }

    // One-sided slopes disagreeing by more than curvature could explain
    // marks a kink; the coordinate has no two-sided derivative there.
    double right = (fp - f0) / eps;
    double left = (f0 - fm) / eps;
    double scale = std::max({std::abs(right), std::abs(left), 1.0});
    if (std::abs(right - left) > 1e-2 * scale) {
      ++report.excluded;
      continue;
    }

    double central = (fp - fm) / (2.0 * eps);
    double denom = std::max({std::abs(central), std::abs(autodiff[i]), 1.0});
    double rel = std::abs(autodiff[i] - central) / denom;
    if (rel > report.max_rel_err) report.max_rel_err = rel;
    ++report.checked;
  }

  report.pass = !report.nonfinite && report.max_rel_err < tol;
  return report;
}

std::vector<SuiteEntry> run_gradient_suite(int shapes_per_case, uint32_t seed,
                                           double eps, double tol) {
  std::vector<SuiteEntry> results;
  Rng rng(seed);

  auto run = [&](const std::string& name, auto make_fn_and_x) {
    GradcheckReport worst;
    worst.pass = true;
    for (int t = 0; t < shapes_per_case; ++t) {
      auto [fn, x] = make_fn_and_x();
      GradcheckReport r = gradcheck(fn, x, eps, tol);
      if (!r.pass) worst.pass = false;
      worst.nonfinite = worst.nonfinite || r.nonfinite;
      worst.max_rel_err = std::max(worst.max_rel_err, r.max_rel_err);
      worst.checked += r.checked;
      worst.excluded += r.excluded;
    }
    results.push_back({name, worst});
  };

  auto rand_hw = [&](int lo, int hi) {
    return static_cast<int64_t>(lo + rng.below(static_cast<uint32_t>(hi - lo + 1)));
  };

  run("add", [&]() {
    int64_t n = rand_hw(1, 8), m = rand_hw(1, 8);
    TensorD other = TensorD::uniform({n, m}, -2.0, 2.0, rng);
    ScalarFn fn = [other](Tape<double>* t, TensorD& v) { return sum(t, add(t, v, other)); };
    return std::pair(fn, TensorD::uniform({n, m}, -2.0, 2.0, rng));
  });
  run("sub", [&]() {
    int64_t n = rand_hw(1, 8), m = rand_hw(1, 8);
    TensorD other = TensorD::uniform({n, m}, -2.0, 2.0, rng);
    ScalarFn fn = [other](Tape<double>* t, TensorD& v) { return sum(t, sub(t, other, v)); };
    return std::pair(fn, TensorD::uniform({n, m}, -2.0, 2.0, rng));
  });
  run("mul", [&]() {
    int64_t n = rand_hw(1, 8), m = rand_hw(1, 8);
    TensorD other = TensorD::uniform({n, m}, -2.0, 2.0, rng);
    ScalarFn fn = [other](Tape<double>* t, TensorD& v) { return sum(t, mul(t, v, other)); };
    return std::pair(fn, TensorD::uniform({n, m}, -2.0, 2.0, rng));
  });
  run("relu", [&]() {
    int64_t n = rand_hw(1, 8), m = rand_hw(1, 8);
    ScalarFn fn = [](Tape<double>* t, TensorD& v) { return sum(t, relu(t, v)); };
    return std::pair(fn, TensorD::uniform({n, m}, -2.0, 2.0, rng));
  });
  run("tanh", [&]() {
    int64_t n = rand_hw(1, 8), m = rand_hw(1, 8);
    ScalarFn fn = [](Tape<double>* t, TensorD& v) { return sum(t, tanh_op(t, v)); };
    return std::pair(fn, TensorD::uniform({n, m}, -2.0, 2.0, rng));
  });
  run("matmul", [&]() {
    int64_t n = rand_hw(1, 6), k = rand_hw(1, 6), m = rand_hw(1, 3);
    TensorD rhs = TensorD::uniform({k, m}, -1.0, 1.0, rng);
    ScalarFn fn = [rhs](Tape<double>* t, TensorD& v) { return sum(t, matmul(t, v, rhs)); };
    return std::pair(fn, TensorD::uniform({n, k}, -1.0, 1.0, rng));
  });
  run("reshape", [&]() {
    int64_t n = rand_hw(1, 8), m = rand_hw(1, 8);
    ScalarFn fn = [n, m](Tape<double>* t, TensorD& v) {
      TensorD r = reshape(t, v, {m, n});
      return sum(t, mul(t, r, r));
    };
    return std::pair(fn, TensorD::uniform({n, m}, -1.0, 1.0, rng));
  });
  run("conv2d/x", [&]() {
    int64_t cin = rand_hw(1, 3), cout = rand_hw(1, 3), hw = rand_hw(3, 6);
    TensorD w = TensorD::uniform({cout, cin, 3, 3}, -0.6, 0.6, rng);
    TensorD b = TensorD::uniform({cout}, -0.2, 0.2, rng);
    ScalarFn fn = [w, b](Tape<double>* t, TensorD& v) { return sum(t, conv2d(t, v, w, b, 1, 1)); };
    return std::pair(fn, TensorD::uniform({2, cin, hw, hw}, -1.0, 1.0, rng));
  });
  run("conv2d/w", [&]() {
    int64_t cin = rand_hw(1, 3), cout = rand_hw(1, 3), hw = rand_hw(3, 6);
    TensorD x = TensorD::uniform({2, cin, hw, hw}, -1.0, 1.0, rng);
    TensorD b = TensorD::uniform({cout}, -0.2, 0.2, rng);
    ScalarFn fn = [x, b](Tape<double>* t, TensorD& v) { return sum(t, conv2d(t, x, v, b, 1, 1)); };
    return std::pair(fn, TensorD::uniform({cout, cin, 3, 3}, -0.6, 0.6, rng));
  });
  run("tconv2d/x", [&]() {
    int64_t cin = rand_hw(1, 4), cout = rand_hw(1, 2), hw = rand_hw(2, 5);
    TensorD w = TensorD::uniform({cin, cout, 2, 2}, -0.6, 0.6, rng);
    TensorD b = TensorD::uniform({cout}, -0.2, 0.2, rng);
    ScalarFn fn = [w, b](Tape<double>* t, TensorD& v) { return sum(t, transposed_conv2d(t, v, w, b)); };
    return std::pair(fn, TensorD::uniform({2, cin, hw, hw}, -1.0, 1.0, rng));
  });
  run("tconv2d/w", [&]() {
    int64_t cin = rand_hw(1, 4), cout = rand_hw(1, 2), hw = rand_hw(2, 5);
    TensorD x = TensorD::uniform({2, cin, hw, hw}, -1.0, 1.0, rng);
    TensorD b = TensorD::uniform({cout}, -0.2, 0.2, rng);
    ScalarFn fn = [x, b](Tape<double>* t, TensorD& v) { return sum(t, transposed_conv2d(t, x, v, b)); };
    return std::pair(fn, TensorD::uniform({cin, cout, 2, 2}, -0.6, 0.6, rng));
  });
  run("avgpool2d", [&]() {
    int64_t c = rand_hw(1, 3), hw = 2 * rand_hw(1, 3);
    ScalarFn fn = [](Tape<double>* t, TensorD& v) {
      TensorD p = avgpool2d(t, v);
      return sum(t, mul(t, p, p));
    };
    return std::pair(fn, TensorD::uniform({2, c, hw, hw}, -1.0, 1.0, rng));
  });
  run("maxpool2d", [&]() {
    int64_t c = rand_hw(1, 3), hw = 2 * rand_hw(1, 3);
    ScalarFn fn = [](Tape<double>* t, TensorD& v) { return sum(t, maxpool2d(t, v)); };
    return std::pair(fn, TensorD::uniform({2, c, hw, hw}, -1.0, 1.0, rng));
  });
  run("batchnorm2d/x", [&]() {
    int64_t c = rand_hw(1, 3), hw = rand_hw(2, 4);
    TensorD gamma = TensorD::uniform({c}, 0.5, 1.5, rng);
    TensorD beta = TensorD::uniform({c}, -0.5, 0.5, rng);
    ScalarFn fn = [gamma, beta, c](Tape<double>* t, TensorD& v) {
      TensorD rm = TensorD::zeros({c}), rv = TensorD::full({c}, 1.0);
      TensorD y = batchnorm2d(t, v, gamma, beta, rm, rv, 0.1, 1e-5, true);
      return sum(t, mul(t, y, y));
    };
    return std::pair(fn, TensorD::uniform({3, c, hw, hw}, -1.0, 1.0, rng));
  });
  run("batchnorm2d/gamma", [&]() {
    int64_t c = rand_hw(1, 3), hw = rand_hw(2, 4);
    TensorD x = TensorD::uniform({3, c, hw, hw}, -1.0, 1.0, rng);
    TensorD beta = TensorD::uniform({c}, -0.5, 0.5, rng);
    ScalarFn fn = [x, beta, c](Tape<double>* t, TensorD& v) {
      TensorD rm = TensorD::zeros({c}), rv = TensorD::full({c}, 1.0);
      TensorD y = batchnorm2d(t, x, v, beta, rm, rv, 0.1, 1e-5, true);
      return sum(t, mul(t, y, y));
    };
    return std::pair(fn, TensorD::uniform({c}, 0.5, 1.5, rng));
  });
  run("linear/w", [&]() {
    int64_t n = rand_hw(1, 5), f = rand_hw(1, 6), o = rand_hw(1, 4);
    TensorD x = TensorD::uniform({n, f}, -1.0, 1.0, rng);
    TensorD b = TensorD::uniform({o}, -0.2, 0.2, rng);
    ScalarFn fn = [x, b](Tape<double>* t, TensorD& v) {
      TensorD y = linear(t, x, v, b);
      return sum(t, mul(t, y, y));
    };
    return std::pair(fn, TensorD::uniform({f, o}, -0.6, 0.6, rng));
  });
  run("softmax_xent", [&]() {
    int64_t n = rand_hw(1, 5), k = rand_hw(2, 10);
    std::vector<int32_t> labels;
    for (int64_t i = 0; i < n; ++i) labels.push_back(static_cast<int32_t>(rng.below(static_cast<uint32_t>(k))));
    ScalarFn fn = [labels](Tape<double>* t, TensorD& v) {
      return softmax_cross_entropy(t, v, labels);
    };
    return std::pair(fn, TensorD::uniform({n, k}, -2.0, 2.0, rng));
  });

  return results;
}

}  // namespace xcnn
