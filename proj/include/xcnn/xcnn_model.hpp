#pragma once

#include <optional>

#include "xcnn/model.hpp"

namespace xcnn {

// Heatmap generator: one downsample stage, mirrored by one upsample stage,
// ending in tanh so the map lands in [-1,1] at input resolution.
//   conv3x3(in -> mid, pad 1) -> relu -> avgpool 2x2 -> tconv 2x2 (mid -> 1) -> tanh
struct GeneratorConfig {
  int in_channels = 1;
  int mid_channels = 32;
};

enum class DiscriminatorKind { kMnistCnn, kVgg16, kVggLite };

struct DiscriminatorConfig {
  DiscriminatorKind kind = DiscriminatorKind::kMnistCnn;
  int in_channels = 1;
  int num_classes = 10;
};

DiscriminatorKind discriminator_kind_from_string(const std::string& s);
std::string to_string(DiscriminatorKind k);

ModelSpec generator_spec(const GeneratorConfig& cfg);
ModelSpec discriminator_spec(const DiscriminatorConfig& cfg);

enum class Variant { kBaseline, kXcnn, kXcnnModified };

Variant variant_from_string(const std::string& s);
std::string to_string(Variant v);

// Generator + classifier, trained end-to-end on class labels. The heatmap
// produced between the two is returned on every forward pass. The modified
// variant widens the single-channel heatmap with a 1x1 convolution before
// the classifier; the exposed heatmap stays the pre-expansion map.
class XcnnModel {
 public:
  struct Output {
    TensorF logits;
    TensorF heatmap;  // [N,1,H,W]; undefined for the baseline variant
  };

  static XcnnModel build_xcnn(const GeneratorConfig& gen,
                              const DiscriminatorConfig& disc, Rng& rng);
  static XcnnModel build_modified_xcnn(const GeneratorConfig& gen,
                                       const DiscriminatorConfig& disc,
                                       int expand_channels, Rng& rng);
  static XcnnModel build_baseline(const DiscriminatorConfig& disc, Rng& rng);

  Output forward(Tape<float>* tape, const TensorF& images, bool train);

  Variant variant() const { return variant_; }
  std::vector<std::pair<std::string, TensorF*>> named_parameters();
  std::vector<std::pair<std::string, TensorF*>> named_buffers();
  int64_t parameter_count() const;

  // Self-describing text used by checkpoints: variant header plus the
  // manifest of each component.
  std::string manifest() const;
  static XcnnModel from_manifest(const std::string& text);

  Model* generator() { return generator_ ? &*generator_ : nullptr; }
  Model* expand() { return expand_ ? &*expand_ : nullptr; }
  Model& discriminator() { return discriminator_; }

 private:
  Variant variant_ = Variant::kBaseline;
  std::optional<Model> generator_;
  std::optional<Model> expand_;
  Model discriminator_;
};

}  // namespace xcnn
