#include "xcnn/xcnn_model.hpp"

#include <sstream>

namespace xcnn {

DiscriminatorKind discriminator_kind_from_string(const std::string& s) {
  if (s == "mnist_cnn") return DiscriminatorKind::kMnistCnn;
  if (s == "vgg16") return DiscriminatorKind::kVgg16;
  if (s == "vgg_lite") return DiscriminatorKind::kVggLite;
  throw ConfigError(msg("unknown discriminator kind '", s, "'"));
}

std::string to_string(DiscriminatorKind k) {
  switch (k) {
    case DiscriminatorKind::kMnistCnn: return "mnist_cnn";
    case DiscriminatorKind::kVgg16: return "vgg16";
    case DiscriminatorKind::kVggLite: return "vgg_lite";
  }
  return "?";
}

Variant variant_from_string(const std::string& s) {
  if (s == "baseline") return Variant::kBaseline;
  if (s == "xcnn") return Variant::kXcnn;
  if (s == "xcnn_modified") return Variant::kXcnnModified;
  throw ConfigError(msg("unknown model variant '", s, "'"));
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kBaseline: return "baseline";
    case Variant::kXcnn: return "xcnn";
    case Variant::kXcnnModified: return "xcnn_modified";
  }
  return "?";
}

ModelSpec generator_spec(const GeneratorConfig& cfg) {
  if (cfg.in_channels < 1 || cfg.mid_channels < 1)
    throw ConfigError("generator: channel counts must be >= 1");
  ModelSpec spec;
  spec.name = "generator";
  spec.layers = {
      LayerSpec::conv2d(cfg.in_channels, cfg.mid_channels, 3, 1, 1),
      LayerSpec::relu(),
      LayerSpec::avgpool2d(),
      LayerSpec::tconv2d(cfg.mid_channels, 1),
      LayerSpec::tanh(),
  };
  return spec;
}

namespace {

void append_vgg_block(ModelSpec& spec, int in, int out, bool batch_norm) {
  spec.layers.push_back(LayerSpec::conv2d(in, out, 3, 1, 1));
  if (batch_norm) spec.layers.push_back(LayerSpec::batchnorm2d(out));
  spec.layers.push_back(LayerSpec::relu());
}

}  // namespace

ModelSpec discriminator_spec(const DiscriminatorConfig& cfg) {
  ModelSpec spec;
  spec.name = to_string(cfg.kind);
  switch (cfg.kind) {
    case DiscriminatorKind::kMnistCnn: {
      // 28 -> 14 -> 7 -> 3 spatially; 64*3*3 = 576 flat features.
      int widths[3] = {16, 32, 64};
      int in = cfg.in_channels;
      for (int w : widths) {
        spec.layers.push_back(LayerSpec::conv2d(in, w, 3, 1, 1));
        spec.layers.push_back(LayerSpec::relu());
        spec.layers.push_back(LayerSpec::maxpool2d());
        in = w;
      }
      spec.layers.push_back(LayerSpec::flatten());
      spec.layers.push_back(LayerSpec::linear(576, cfg.num_classes));
      break;
    }
    case DiscriminatorKind::kVgg16: {
      // 13-conv VGG-16 feature stack; with a 32x32 input the five pools
      // leave a 1x1x512 map, so flatten feeds a 512-wide head.
      const int cfg16[] = {64, 64, -1, 128, 128, -1, 256, 256, 256, -1,
                           512, 512, 512, -1, 512, 512, 512, -1};
      int in = cfg.in_channels;
      for (int w : cfg16) {
        if (w == -1) {
          spec.layers.push_back(LayerSpec::maxpool2d());
        } else {
          append_vgg_block(spec, in, w, true);
          in = w;
        }
      }
      spec.layers.push_back(LayerSpec::flatten());
      spec.layers.push_back(LayerSpec::linear(512, cfg.num_classes));
      break;
    }
    case DiscriminatorKind::kVggLite: {
      // Trimmed stack for CPU-scale runs: 32-P-64-P-128-P, head 2048 -> K.
      int widths[3] = {32, 64, 128};
      int in = cfg.in_channels;
      for (int w : widths) {
        append_vgg_block(spec, in, w, true);
        spec.layers.push_back(LayerSpec::maxpool2d());
        in = w;
      }
      spec.layers.push_back(LayerSpec::flatten());
      spec.layers.push_back(LayerSpec::linear(128 * 4 * 4, cfg.num_classes));
      break;
    }
  }
  return spec;
}

XcnnModel XcnnModel::build_xcnn(const GeneratorConfig& gen,
                                const DiscriminatorConfig& disc, Rng& rng) {
  XcnnModel m;
  m.variant_ = Variant::kXcnn;
  m.generator_ = Model::build(generator_spec(gen), rng);
  DiscriminatorConfig d = disc;
  d.in_channels = 1;  // consumes the single-channel heatmap
  m.discriminator_ = Model::build(discriminator_spec(d), rng);
  return m;
}

XcnnModel XcnnModel::build_modified_xcnn(const GeneratorConfig& gen,
                                         const DiscriminatorConfig& disc,
                                         int expand_channels, Rng& rng) {
  if (expand_channels < 1) throw ConfigError("expand channels must be >= 1");
  XcnnModel m;
  m.variant_ = Variant::kXcnnModified;
  m.generator_ = Model::build(generator_spec(gen), rng);
  ModelSpec expand;
  expand.name = "expand";
  expand.layers = {LayerSpec::conv2d(1, expand_channels, 1, 1, 0)};
  m.expand_ = Model::build(expand, rng);
  DiscriminatorConfig d = disc;
  d.in_channels = expand_channels;
  m.discriminator_ = Model::build(discriminator_spec(d), rng);
  return m;
}

XcnnModel XcnnModel::build_baseline(const DiscriminatorConfig& disc, Rng& rng) {
  XcnnModel m;
  m.variant_ = Variant::kBaseline;
  m.discriminator_ = Model::build(discriminator_spec(disc), rng);
  return m;
}

XcnnModel::Output XcnnModel::forward(Tape<float>* tape, const TensorF& images, bool train) {
  if (images.ndim() != 4)
    throw ShapeError(msg("forward: expected [N,C,H,W] images, got ", shape_str(images.shape())));
  Output out;
  if (!generator_) {
    out.logits = discriminator_.forward(tape, images, train);
    return out;
  }
  if (images.dim(2) % 2 != 0 || images.dim(3) % 2 != 0)
    throw ShapeError(msg("forward: spatial dims must be even for the generator, got ",
                         images.dim(2), "x", images.dim(3)));
  out.heatmap = generator_->forward(tape, images, train);
  TensorF disc_in = out.heatmap;
  if (expand_) disc_in = expand_->forward(tape, disc_in, train);
  out.logits = discriminator_.forward(tape, disc_in, train);
  return out;
}

std::vector<std::pair<std::string, TensorF*>> XcnnModel::named_parameters() {
  std::vector<std::pair<std::string, TensorF*>> out;
  if (generator_)
    for (auto& p : generator_->named_parameters("generator")) out.push_back(p);
  if (expand_)
    for (auto& p : expand_->named_parameters("expand")) out.push_back(p);
  for (auto& p : discriminator_.named_parameters("discriminator")) out.push_back(p);
  return out;
}

std::vector<std::pair<std::string, TensorF*>> XcnnModel::named_buffers() {
  std::vector<std::pair<std::string, TensorF*>> out;
  if (generator_)
    for (auto& p : generator_->named_buffers("generator")) out.push_back(p);
  if (expand_)
    for (auto& p : expand_->named_buffers("expand")) out.push_back(p);
  for (auto& p : discriminator_.named_buffers("discriminator")) out.push_back(p);
  return out;
}

int64_t XcnnModel::parameter_count() const {
  int64_t n = discriminator_.parameter_count();
  if (generator_) n += generator_->parameter_count();
  if (expand_) n += expand_->parameter_count();
  return n;
}

std::string XcnnModel::manifest() const {
  std::ostringstream os;
  os << "variant " << to_string(variant_) << "\n";
  if (generator_) os << "[generator]\n" << generator_->spec().manifest();
  if (expand_) os << "[expand]\n" << expand_->spec().manifest();
  os << "[discriminator]\n" << discriminator_.spec().manifest();
  return os.str();
}

XcnnModel XcnnModel::from_manifest(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line.rfind("variant ", 0) != 0)
    throw FormatError("model manifest: missing variant header");
  XcnnModel m;
  m.variant_ = variant_from_string(line.substr(8));

  std::string section;
  std::ostringstream body;
  Rng rng(0);  // weights are overwritten by the checkpoint payload
  auto flush = [&]() {
    if (section.empty()) return;
    Model built = Model::build(ModelSpec::parse(body.str()), rng);
    if (section == "generator")
      m.generator_ = std::move(built);
    else if (section == "expand")
      m.expand_ = std::move(built);
    else if (section == "discriminator")
      m.discriminator_ = std::move(built);
    else
      throw FormatError(msg("model manifest: unknown section '", section, "'"));
    body.str("");
  };
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      flush();
      section = line.substr(1, line.size() - 2);
      continue;
    }
    body << line << "\n";
  }
  flush();
  return m;
}

}  // namespace xcnn
