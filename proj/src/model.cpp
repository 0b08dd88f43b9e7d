#include "xcnn/model.hpp"

#include <cmath>
#include <map>
#include <sstream>

namespace xcnn {

LayerSpec LayerSpec::conv2d(int in, int out, int kernel, int stride, int pad) {
  return {LayerKind::kConv2d, in, out, kernel, stride, pad};
}
LayerSpec LayerSpec::tconv2d(int in, int out) {
  return {LayerKind::kTConv2d, in, out, 2, 2, 0};
}
LayerSpec LayerSpec::avgpool2d() { return {LayerKind::kAvgPool2d, 0, 0, 2, 2, 0}; }
LayerSpec LayerSpec::maxpool2d() { return {LayerKind::kMaxPool2d, 0, 0, 2, 2, 0}; }
LayerSpec LayerSpec::batchnorm2d(int features) {
  return {LayerKind::kBatchNorm2d, features, features, 0, 1, 0};
}
LayerSpec LayerSpec::relu() { return {LayerKind::kRelu}; }
LayerSpec LayerSpec::tanh() { return {LayerKind::kTanh}; }
LayerSpec LayerSpec::flatten() { return {LayerKind::kFlatten}; }
LayerSpec LayerSpec::linear(int in, int out) {
  return {LayerKind::kLinear, in, out, 0, 1, 0};
}

namespace {

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::kConv2d: return "conv2d";
    case LayerKind::kTConv2d: return "tconv2d";
    case LayerKind::kAvgPool2d: return "avgpool2d";
    case LayerKind::kMaxPool2d: return "maxpool2d";
    case LayerKind::kBatchNorm2d: return "batchnorm2d";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kTanh: return "tanh";
    case LayerKind::kFlatten: return "flatten";
    case LayerKind::kLinear: return "linear";
  }
  return "?";
}

}  // namespace

std::string LayerSpec::manifest_line() const {
  std::ostringstream os;
  os << kind_name(kind);
  switch (kind) {
    case LayerKind::kConv2d:
      os << " in=" << in << " out=" << out << " kernel=" << kernel
         << " stride=" << stride << " pad=" << pad;
      break;
    case LayerKind::kTConv2d:
      os << " in=" << in << " out=" << out << " kernel=" << kernel << " stride=" << stride;
      break;
    case LayerKind::kAvgPool2d:
    case LayerKind::kMaxPool2d:
      os << " kernel=" << kernel << " stride=" << stride;
      break;
    case LayerKind::kBatchNorm2d:
      os << " features=" << in;
      break;
    case LayerKind::kLinear:
      os << " in=" << in << " out=" << out;
      break;
    default:
      break;
  }
  return os.str();
}

LayerSpec LayerSpec::parse_line(const std::string& line) {
  std::istringstream is(line);
  std::string head;
  is >> head;
  std::map<std::string, int> kv;
  std::string tok;
  while (is >> tok) {
    auto eq = tok.find('=');
    if (eq == std::string::npos)
      throw FormatError(msg("manifest: malformed token '", tok, "' in '", line, "'"));
    kv[tok.substr(0, eq)] = std::stoi(tok.substr(eq + 1));
  }
  if (head == "conv2d")
    return conv2d(kv["in"], kv["out"], kv["kernel"], kv["stride"], kv["pad"]);
  if (head == "tconv2d") return tconv2d(kv["in"], kv["out"]);
  if (head == "avgpool2d") return avgpool2d();
  if (head == "maxpool2d") return maxpool2d();
  if (head == "batchnorm2d") return batchnorm2d(kv["features"]);
  if (head == "relu") return relu();
  if (head == "tanh") return tanh();
  if (head == "flatten") return flatten();
  if (head == "linear") return linear(kv["in"], kv["out"]);
  throw FormatError(msg("manifest: unknown layer kind '", head, "'"));
}

std::string ModelSpec::manifest() const {
  std::ostringstream os;
  os << "model " << name << "\n";
  for (const LayerSpec& l : layers) os << l.manifest_line() << "\n";
  return os.str();
}

ModelSpec ModelSpec::parse(const std::string& text) {
  ModelSpec spec;
  std::istringstream is(text);
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (first) {
      if (line.rfind("model ", 0) != 0)
        throw FormatError(msg("manifest: expected 'model <name>' header, got '", line, "'"));
      spec.name = line.substr(6);
      first = false;
      continue;
    }
    spec.layers.push_back(LayerSpec::parse_line(line));
  }
  if (first) throw FormatError("manifest: empty model text");
  return spec;
}

Model Model::build(ModelSpec spec, Rng& rng) {
  Model m;
  m.spec_ = std::move(spec);
  m.states_.resize(m.spec_.layers.size());
  for (size_t i = 0; i < m.spec_.layers.size(); ++i) {
    const LayerSpec& l = m.spec_.layers[i];
    LayerState& s = m.states_[i];
    switch (l.kind) {
      case LayerKind::kConv2d: {
        float bound = std::sqrt(6.0f / static_cast<float>(l.in * l.kernel * l.kernel));
        s.weight = TensorF::uniform({l.out, l.in, l.kernel, l.kernel}, -bound, bound, rng);
        s.bias = TensorF::zeros({l.out});
        break;
      }
      case LayerKind::kTConv2d: {
        // weight layout [Cin, Cout, kh, kw]
        float bound = std::sqrt(6.0f / static_cast<float>(l.in * l.kernel * l.kernel));
        s.weight = TensorF::uniform({l.in, l.out, l.kernel, l.kernel}, -bound, bound, rng);
        s.bias = TensorF::zeros({l.out});
        break;
      }
      case LayerKind::kBatchNorm2d:
        s.gamma = TensorF::full({l.in}, 1.0f);
        s.beta = TensorF::zeros({l.in});
        s.running_mean = TensorF::zeros({l.in});
        s.running_var = TensorF::full({l.in}, 1.0f);
        break;
      case LayerKind::kLinear: {
        float bound = std::sqrt(6.0f / static_cast<float>(l.in));
        s.weight = TensorF::uniform({l.in, l.out}, -bound, bound, rng);
        s.bias = TensorF::zeros({l.out});
        break;
      }
      default:
        break;
    }
  }
  return m;
}

TensorF Model::forward(Tape<float>* tape, const TensorF& x, bool train) {
  TensorF cur = x;
  for (size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& l = spec_.layers[i];
    LayerState& s = states_[i];
    if (tape) {
      if (s.weight.defined()) {
        tape->watch(s.weight);
        tape->watch(s.bias);
      }
      if (s.gamma.defined()) {
        tape->watch(s.gamma);
        tape->watch(s.beta);
      }
    }
    switch (l.kind) {
      case LayerKind::kConv2d:
        cur = conv2d(tape, cur, s.weight, s.bias, l.stride, l.pad);
        break;
      case LayerKind::kTConv2d:
        cur = transposed_conv2d(tape, cur, s.weight, s.bias);
        break;
      case LayerKind::kAvgPool2d:
        cur = avgpool2d(tape, cur);
        break;
      case LayerKind::kMaxPool2d:
        cur = maxpool2d(tape, cur);
        break;
      case LayerKind::kBatchNorm2d:
        cur = batchnorm2d(tape, cur, s.gamma, s.beta, s.running_mean,
                          s.running_var, bn_momentum, bn_eps, train);
        break;
      case LayerKind::kRelu:
        cur = relu(tape, cur);
        break;
      case LayerKind::kTanh:
        cur = tanh_op(tape, cur);
        break;
      case LayerKind::kFlatten:
        cur = reshape(tape, cur, {cur.dim(0), cur.numel() / cur.dim(0)});
        break;
      case LayerKind::kLinear:
        cur = linear(tape, cur, s.weight, s.bias);
        break;
    }
  }
  return cur;
}

std::vector<std::pair<std::string, TensorF*>> Model::named_parameters(const std::string& prefix) {
  std::vector<std::pair<std::string, TensorF*>> out;
  for (size_t i = 0; i < states_.size(); ++i) {
    LayerState& s = states_[i];
    std::string base = prefix + "." + std::to_string(i) + ".";
    if (s.weight.defined()) {
      out.emplace_back(base + "weight", &s.weight);
      out.emplace_back(base + "bias", &s.bias);
    }
    if (s.gamma.defined()) {
      out.emplace_back(base + "gamma", &s.gamma);
      out.emplace_back(base + "beta", &s.beta);
    }
  }
  return out;
}

std::vector<std::pair<std::string, TensorF*>> Model::named_buffers(const std::string& prefix) {
  std::vector<std::pair<std::string, TensorF*>> out;
  for (size_t i = 0; i < states_.size(); ++i) {
    LayerState& s = states_[i];
    std::string base = prefix + "." + std::to_string(i) + ".";
    if (s.running_mean.defined()) {
      out.emplace_back(base + "running_mean", &s.running_mean);
      out.emplace_back(base + "running_var", &s.running_var);
    }
  }
  return out;
}

int64_t Model::parameter_count() const {
  int64_t n = 0;
  for (const LayerState& s : states_) {
    if (s.weight.defined()) n += s.weight.numel() + s.bias.numel();
    if (s.gamma.defined()) n += s.gamma.numel() + s.beta.numel();
  }
  return n;
}

}  // namespace xcnn
