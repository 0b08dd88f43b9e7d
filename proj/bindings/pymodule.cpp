#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "xcnn/blas.hpp"
#include "xcnn/explain.hpp"
#include "xcnn/gradcheck.hpp"
#include "xcnn/train.hpp"

namespace py = pybind11;
using namespace xcnn;

namespace {

TensorF tensor_from_numpy(py::array_t<float, py::array::c_style | py::array::forcecast> arr) {
  Shape shape(arr.ndim());
  for (int i = 0; i < arr.ndim(); ++i) shape[static_cast<size_t>(i)] = arr.shape(i);
  std::vector<float> data(arr.data(), arr.data() + arr.size());
  return TensorF(std::move(shape), std::move(data));
}

py::array_t<float> numpy_from_tensor(const TensorF& t) {
  std::vector<ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<float> arr(shape);
  std::copy(t.data(), t.data() + t.numel(), arr.mutable_data());
  return arr;
}

Dataset dataset_from_numpy(py::array_t<float> images, std::vector<int32_t> labels,
                           int num_classes) {
  Dataset ds;
  ds.images = tensor_from_numpy(images);
  ds.labels = std::move(labels);
  ds.num_classes = num_classes;
  ds.name = "ndarray";
  return ds;
}

// Owns a model plus its optimizer so training state survives between calls.
struct PyModel {
  XcnnModel model;
  OptimState opt;
  uint32_t seed = 1;

  py::tuple forward(py::array_t<float> images) {
    auto out = model.forward(nullptr, tensor_from_numpy(images), false);
    py::object heat = out.heatmap.defined() ? py::object(numpy_from_tensor(out.heatmap))
                                            : py::object(py::none());
    return py::make_tuple(numpy_from_tensor(out.logits), heat);
  }

  TrainMetrics train_one_epoch(const Dataset& ds, int epoch, int batch_size, double lr,
                               double momentum, double weight_decay, bool augment) {
    opt.lr = static_cast<float>(lr);
    opt.momentum = static_cast<float>(momentum);
    opt.weight_decay = static_cast<float>(weight_decay);
    BatchPlan plan;
    plan.batch_size = batch_size;
    plan.seed = seed;
    plan.augment = augment;
    return train_epoch(model, ds, plan, opt, epoch);
  }

  py::tuple evaluate_on(const Dataset& ds, int batch_size) {
    auto [acc, loss] = evaluate(model, ds, batch_size);
    return py::make_tuple(acc, loss);
  }

  void save(const std::string& path, int epoch) {
    save_checkpoint(path, make_checkpoint(model, opt, epoch, seed));
  }

  int64_t parameter_count() { return model.parameter_count(); }
  std::string manifest() { return model.manifest(); }
};

PyModel load_model(const std::string& path) {
  Checkpoint ck = load_checkpoint(path);
  PyModel pm;
  pm.model = model_from_checkpoint(ck);
  int epoch = 0;
  apply_checkpoint(ck, pm.model, &pm.opt, &epoch, &pm.seed);
  return pm;
}

PyModel build_model(const std::string& variant, int in_channels, int gen_channels,
                    const std::string& disc, int num_classes, int expand_channels,
                    uint32_t seed) {
  Rng rng(seed);
  DiscriminatorConfig dc{discriminator_kind_from_string(disc), in_channels, num_classes};
  GeneratorConfig gc{in_channels, gen_channels};
  PyModel pm;
  pm.seed = seed;
  switch (variant_from_string(variant)) {
    case Variant::kBaseline:
      pm.model = XcnnModel::build_baseline(dc, rng);
      break;
    case Variant::kXcnn:
      pm.model = XcnnModel::build_xcnn(gc, dc, rng);
      break;
    case Variant::kXcnnModified:
      pm.model = XcnnModel::build_modified_xcnn(gc, dc, expand_channels, rng);
      break;
  }
  pm.opt.init(pm.model.named_parameters());
  return pm;
}

Heatmap heatmap_from_numpy(py::array_t<float, py::array::c_style | py::array::forcecast> arr,
                           int label) {
  if (arr.ndim() != 2) throw ShapeError("heatmap must be a 2-d array");
  Heatmap h;
  h.height = static_cast<int>(arr.shape(0));
  h.width = static_cast<int>(arr.shape(1));
  h.values.assign(arr.data(), arr.data() + arr.size());
  h.label = label;
  return h;
}

}  // namespace

PYBIND11_MODULE(_xcnn, m) {
  m.doc() = "explainable CNN: tensor autodiff core, XCNN models, training and heatmap tools";

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def("set_blas_threads", &set_blas_threads, py::arg("n"));

  py::class_<Dataset>(m, "Dataset")
      .def_property_readonly("images", [](const Dataset& ds) { return numpy_from_tensor(ds.images); })
      .def_property_readonly("labels", [](const Dataset& ds) { return ds.labels; })
      .def_property_readonly("name", [](const Dataset& ds) { return ds.name; })
      .def("__len__", &Dataset::size)
      .def("subset", &Dataset::subset, py::arg("n"), py::arg("stratified") = false)
      .def("mean_pixel", &Dataset::mean_pixel);

  m.def("load_mnist", &load_mnist_idx, py::arg("images_path"), py::arg("labels_path"));
  m.def("load_cifar10", &load_cifar10_bin, py::arg("batch_paths"));
  m.def("dataset_from_arrays", &dataset_from_numpy, py::arg("images"), py::arg("labels"),
        py::arg("num_classes") = 10);

  py::class_<TrainMetrics>(m, "TrainMetrics")
      .def_readonly("epoch", &TrainMetrics::epoch)
      .def_readonly("train_loss", &TrainMetrics::train_loss)
      .def_readonly("train_acc", &TrainMetrics::train_acc)
      .def_readonly("val_acc", &TrainMetrics::val_acc)
      .def_readonly("seconds", &TrainMetrics::seconds);

  py::class_<PyModel>(m, "Model")
      .def("forward", &PyModel::forward, py::arg("images"),
           "-> (logits, heatmap or None) for a [N,C,H,W] float batch")
      .def("train_epoch", &PyModel::train_one_epoch, py::arg("dataset"), py::arg("epoch") = 0,
           py::arg("batch_size") = 64, py::arg("lr") = 0.01, py::arg("momentum") = 0.9,
           py::arg("weight_decay") = 0.0, py::arg("augment") = false)
      .def("evaluate", &PyModel::evaluate_on, py::arg("dataset"), py::arg("batch_size") = 256,
           "-> (accuracy, mean_loss)")
      .def("save", &PyModel::save, py::arg("path"), py::arg("epoch") = 0)
      .def("parameter_count", &PyModel::parameter_count)
      .def("manifest", &PyModel::manifest);

  m.def("build_model", &build_model, py::arg("variant") = "xcnn", py::arg("in_channels") = 1,
        py::arg("gen_channels") = 32, py::arg("disc") = "mnist_cnn", py::arg("num_classes") = 10,
        py::arg("expand_channels") = 16, py::arg("seed") = 1);
  m.def("load_model", &load_model, py::arg("path"));

  py::class_<BoundingBox>(m, "BoundingBox")
      .def_readonly("x0", &BoundingBox::x0)
      .def_readonly("y0", &BoundingBox::y0)
      .def_readonly("x1", &BoundingBox::x1)
      .def_readonly("y1", &BoundingBox::y1)
      .def("__repr__", [](const BoundingBox& b) {
        return msg("BoundingBox(", b.x0, ",", b.y0, ",", b.x1, ",", b.y1, ")");
      });

  m.def(
      "localize",
      [](py::array_t<float> heatmap, float threshold) -> py::object {
        auto box = localize(heatmap_from_numpy(heatmap, 0), threshold);
        if (!box) return py::none();
        return py::cast(*box);
      },
      py::arg("heatmap"), py::arg("threshold") = 0.5f);

  m.def(
      "render_heatmap",
      [](py::array_t<float> heatmap) {
        RgbImage img = render_heatmap(heatmap_from_numpy(heatmap, 0));
        py::array_t<uint8_t> out({img.height, img.width, 3});
        std::copy(img.pixels.begin(), img.pixels.end(), out.mutable_data());
        return out;
      },
      py::arg("heatmap"));

  m.def(
      "deletion_score",
      [](PyModel& pm, py::array_t<float> image, py::array_t<float> heatmap, int label, float q,
         int trials, uint32_t seed, std::vector<float> mean_pixel) {
        DeletionResult r = deletion_score(pm.model, tensor_from_numpy(image),
                                          heatmap_from_numpy(heatmap, label), q, trials, seed,
                                          mean_pixel);
        return py::make_tuple(r.targeted_drop, r.random_drop);
      },
      py::arg("model"), py::arg("image"), py::arg("heatmap"), py::arg("label"),
      py::arg("q") = 0.2f, py::arg("trials") = 5, py::arg("seed") = 1,
      py::arg("mean_pixel") = std::vector<float>{-1.0f});

  m.def("mutual_information", &mutual_information_nats, py::arg("codes"), py::arg("labels"),
        "plug-in MI in nats between integer codes and labels");

  m.def(
      "mi_diagnostic",
      [](PyModel& pm, const Dataset& ds, int grid) {
        MIReport r = mi_diagnostic(pm.model, ds, grid);
        return py::dict(py::arg("mi_heatmap_label") = r.mi_heatmap_label,
                        py::arg("mi_input_label") = r.mi_input_label, py::arg("grid") = r.grid,
                        py::arg("sample_count") = r.sample_count);
      },
      py::arg("model"), py::arg("dataset"), py::arg("grid") = 4);

  m.def(
      "gradcheck_suite",
      [](int shapes) {
        py::list out;
        for (const auto& [name, rep] : run_gradient_suite(shapes))
          out.append(py::dict(py::arg("name") = name, py::arg("pass") = rep.pass,
                              py::arg("max_rel_err") = rep.max_rel_err,
                              py::arg("checked") = rep.checked,
                              py::arg("excluded") = rep.excluded));
        return out;
      },
      py::arg("shapes") = 5);
}
