#pragma once

#include <string>
#include <utility>
#include <vector>

#include "xcnn/nn.hpp"
#include "xcnn/tape.hpp"

namespace xcnn {

enum class LayerKind {
  kConv2d,
  kTConv2d,
  kAvgPool2d,
  kMaxPool2d,
  kBatchNorm2d,
  kRelu,
  kTanh,
  kFlatten,
  kLinear,
};

struct LayerSpec {
  LayerKind kind{};
  int in = 0;        // channels (conv/tconv/bn) or features (linear)
  int out = 0;
  int kernel = 0;
  int stride = 1;
  int pad = 0;

  static LayerSpec conv2d(int in, int out, int kernel, int stride = 1, int pad = 0);
  static LayerSpec tconv2d(int in, int out);
  static LayerSpec avgpool2d();
  static LayerSpec maxpool2d();
  static LayerSpec batchnorm2d(int features);
  static LayerSpec relu();
  static LayerSpec tanh();
  static LayerSpec flatten();
  static LayerSpec linear(int in, int out);

  std::string manifest_line() const;
  static LayerSpec parse_line(const std::string& line);
  bool operator==(const LayerSpec&) const = default;
};

// Declarative layer list; the instantiated Model holds its parameters.
struct ModelSpec {
  std::string name;
  std::vector<LayerSpec> layers;

  // One layer per line, key=value hyperparameters; first line names the
  // model. Round-trips through parse().
  std::string manifest() const;
  static ModelSpec parse(const std::string& text);
  bool operator==(const ModelSpec&) const = default;
};

class Model {
 public:
  Model() = default;
  // Fan-in scaled uniform init for conv/tconv/linear weights, zero biases,
  // identity batch-norm.
  static Model build(ModelSpec spec, Rng& rng);

  TensorF forward(Tape<float>* tape, const TensorF& x, bool train);

  const ModelSpec& spec() const { return spec_; }

  // Trainable tensors, in layer order, named "<prefix>.<layer>.<role>".
  std::vector<std::pair<std::string, TensorF*>> named_parameters(const std::string& prefix);
  // Non-trainable state (batch-norm running stats).
  std::vector<std::pair<std::string, TensorF*>> named_buffers(const std::string& prefix);
  int64_t parameter_count() const;

  struct LayerState {
    TensorF weight;  // conv/tconv/linear
    TensorF bias;
    TensorF gamma;   // batch norm
    TensorF beta;
    TensorF running_mean;
    TensorF running_var;
  };
  std::vector<LayerState>& layer_states() { return states_; }

  float bn_momentum = 0.1f;
  float bn_eps = 1e-5f;

 private:
  ModelSpec spec_;
  std::vector<LayerState> states_;
};

}  // namespace xcnn
