// Command-line front end: train / eval / explain / localize / midiag /
// gradcheck. See README.md for the directory conventions.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "xcnn/blas.hpp"
#include "xcnn/explain.hpp"
#include "xcnn/gradcheck.hpp"
#include "xcnn/train.hpp"

namespace fs = std::filesystem;
using namespace xcnn;

namespace {

struct RunConfig {
  std::string dataset = "mnist";       // mnist | cifar10
  std::string data_dir;                // default: $XCNN_DATA_DIR or ./data
  std::string model = "xcnn";          // xcnn | baseline | xcnn_modified
  std::string disc = "auto";           // mnist_cnn | vgg16 | vgg_lite | auto
  int gen_c = 0;                       // generator mid channels; 0 = auto (32 mnist, 128 cifar10)
  int expand_c = 16;                   // 1x1 expansion width for xcnn_modified
  int epochs = 10;
  int batch_size = 0;                  // 0 = auto (64 mnist, 128 cifar10)
  double lr = 0.0;                     // 0 = auto (0.01 mnist, 0.05 cifar10)
  double momentum = 0.9;
  double weight_decay = -1.0;          // <0 = auto (0 mnist, 5e-4 cifar10)
  std::string milestones = "auto";     // comma-separated epochs, "auto", or "none"
  double gamma = 0.1;
  uint32_t seed = 1;
  int64_t subset = 0;                  // 0 = full split
  bool stratified = false;
  int augment = -1;                    // -1 = auto (on for cifar10 train)
  std::string outdir = "runs/out";
  int threads = 1;
  std::string resume;
  std::string checkpoint;
  std::string split = "test";
  int count = 10;
  double threshold = 0.5;
  int grid = 4;
  double q = 0.2;
  int trials = 5;
};

std::string default_data_dir() {
  if (const char* env = std::getenv("XCNN_DATA_DIR")) return env;
  return "data";
}

fs::path find_file(const fs::path& dir, const std::string& sub, const std::string& name) {
  for (const fs::path& p : {dir / sub / name, dir / name})
    if (fs::exists(p)) return p;
  throw FormatError(msg("dataset file ", name, " not found under ", dir.string(),
                        " (also tried ", (dir / sub).string(), ")"));
}

Dataset load_split(const RunConfig& cfg, const std::string& split) {
  fs::path dir = cfg.data_dir.empty() ? fs::path(default_data_dir()) : fs::path(cfg.data_dir);
  Dataset ds;
  if (cfg.dataset == "mnist") {
    std::string img = split == "train" ? "train-images-idx3-ubyte" : "t10k-images-idx3-ubyte";
    std::string lab = split == "train" ? "train-labels-idx1-ubyte" : "t10k-labels-idx1-ubyte";
    ds = load_mnist_idx(find_file(dir, "mnist", img).string(),
                        find_file(dir, "mnist", lab).string());
  } else if (cfg.dataset == "cifar10") {
    std::vector<std::string> paths;
    if (split == "train") {
      for (int i = 1; i <= 5; ++i)
        paths.push_back(find_file(dir, "cifar10", msg("data_batch_", i, ".bin")).string());
    } else {
      paths.push_back(find_file(dir, "cifar10", "test_batch.bin").string());
    }
    ds = load_cifar10_bin(paths);
  } else {
    throw ConfigError(msg("unknown dataset '", cfg.dataset, "'"));
  }
  if (cfg.subset > 0 && split == "train") ds = ds.subset(cfg.subset, cfg.stratified);
  return ds;
}

// Fills the auto fields from the dataset choice.
void resolve(RunConfig& cfg) {
  bool cifar = cfg.dataset == "cifar10";
  if (cfg.disc == "auto") cfg.disc = cifar ? "vgg_lite" : "mnist_cnn";
  if (cfg.gen_c == 0) cfg.gen_c = cifar ? 128 : 32;
  if (cfg.batch_size == 0) cfg.batch_size = cifar ? 128 : 64;
  if (cfg.lr == 0.0) cfg.lr = cifar ? 0.05 : 0.01;
  if (cfg.weight_decay < 0.0) cfg.weight_decay = cifar ? 5e-4 : 0.0;
  if (cfg.milestones == "auto") {
    cfg.milestones = "none";
    if (cifar) {
      // decay at 50% and 75% of the budget
      std::vector<int> ms;
      for (int m : {cfg.epochs / 2, 3 * cfg.epochs / 4})
        if (m > 0 && (ms.empty() || m > ms.back())) ms.push_back(m);
      if (!ms.empty()) {
        std::string s;
        for (size_t i = 0; i < ms.size(); ++i) s += (i ? "," : "") + std::to_string(ms[i]);
        cfg.milestones = s;
      }
    }
  }
  if (cfg.augment < 0) cfg.augment = cifar ? 1 : 0;
}

std::vector<int> parse_milestones(const std::string& s) {
  std::vector<int> out;
  if (s == "none" || s.empty()) return out;
  std::istringstream is(s);
  std::string tok;
  while (std::getline(is, tok, ',')) out.push_back(std::stoi(tok));
  return out;
}

XcnnModel build_model(const RunConfig& cfg, int dataset_channels) {
  Rng rng(cfg.seed);
  DiscriminatorConfig disc{discriminator_kind_from_string(cfg.disc), dataset_channels, 10};
  GeneratorConfig gen{dataset_channels, cfg.gen_c};
  Variant v = variant_from_string(cfg.model);
  switch (v) {
    case Variant::kBaseline: return XcnnModel::build_baseline(disc, rng);
    case Variant::kXcnn: return XcnnModel::build_xcnn(gen, disc, rng);
    case Variant::kXcnnModified:
      return XcnnModel::build_modified_xcnn(gen, disc, cfg.expand_c, rng);
  }
  throw ConfigError("unreachable");
}

void echo_config(const RunConfig& cfg, const fs::path& path) {
  std::ofstream os(path);
  os << "dataset=" << cfg.dataset << "\n"
     << "data-dir=" << (cfg.data_dir.empty() ? default_data_dir() : cfg.data_dir) << "\n"
     << "model=" << cfg.model << "\n"
     << "disc=" << cfg.disc << "\n"
     << "gen-c=" << cfg.gen_c << "\n"
     << "expand-c=" << cfg.expand_c << "\n"
     << "epochs=" << cfg.epochs << "\n"
     << "batch-size=" << cfg.batch_size << "\n"
     << "lr=" << cfg.lr << "\n"
     << "momentum=" << cfg.momentum << "\n"
     << "weight-decay=" << cfg.weight_decay << "\n"
     << "milestones=" << cfg.milestones << "\n"
     << "gamma=" << cfg.gamma << "\n"
     << "seed=" << cfg.seed << "\n"
     << "subset=" << cfg.subset << "\n"
     << "stratified=" << (cfg.stratified ? "true" : "false") << "\n"
     << "augment=" << (cfg.augment ? "true" : "false") << "\n"
     << "threads=" << cfg.threads << "\n";
}

int cmd_train(RunConfig cfg) {
  resolve(cfg);
  Dataset train = load_split(cfg, "train");
  Dataset test = load_split(cfg, "test");

  fs::create_directories(fs::path(cfg.outdir) / "checkpoints");
  fs::create_directories(fs::path(cfg.outdir) / "metrics");
  fs::create_directories(fs::path(cfg.outdir) / "images");
  echo_config(cfg, fs::path(cfg.outdir) / "config.txt");

  XcnnModel model = build_model(cfg, train.channels());
  OptimState opt;
  opt.momentum = static_cast<float>(cfg.momentum);
  opt.weight_decay = static_cast<float>(cfg.weight_decay);
  opt.init(model.named_parameters());
  int start_epoch = 0;
  uint32_t seed = cfg.seed;

  if (!cfg.resume.empty()) {
    Checkpoint ck = load_checkpoint(cfg.resume);
    apply_checkpoint(ck, model, &opt, &start_epoch, &seed);
    std::cout << "resumed from " << cfg.resume << " at epoch " << start_epoch << "\n";
  }

  BatchPlan plan;
  plan.batch_size = cfg.batch_size;
  plan.seed = seed;
  plan.shuffle = true;
  plan.augment = cfg.augment == 1;

  std::vector<int> milestones = parse_milestones(cfg.milestones);
  fs::path csv_path = fs::path(cfg.outdir) / "metrics" / "metrics.csv";
  bool fresh_csv = start_epoch == 0 || !fs::exists(csv_path);
  std::ofstream csv(csv_path, fresh_csv ? std::ios::trunc : std::ios::app);
  if (fresh_csv) csv << kMetricsCsvHeader << "\n";

  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    opt.lr = lr_schedule(static_cast<float>(cfg.lr), epoch, milestones,
                         static_cast<float>(cfg.gamma));
    TrainMetrics m = train_epoch(model, train, plan, opt, epoch);
    auto [val_acc, val_loss] = evaluate(model, test, cfg.batch_size);
    m.val_acc = val_acc;
    csv << metrics_csv_row(m) << "\n" << std::flush;
    std::cout << "epoch " << epoch << " loss " << m.train_loss << " train_acc "
              << m.train_acc << " val_acc " << m.val_acc << " (" << m.seconds << "s, lr "
              << opt.lr << ")" << std::endl;
    save_checkpoint((fs::path(cfg.outdir) / "checkpoints" / "ck_last.xcnn").string(),
                    make_checkpoint(model, opt, epoch + 1, seed));
  }
  save_checkpoint((fs::path(cfg.outdir) / "checkpoints" / "ck_final.xcnn").string(),
                  make_checkpoint(model, opt, cfg.epochs, seed));
  std::cout << "wrote " << (fs::path(cfg.outdir) / "checkpoints" / "ck_final.xcnn").string()
            << "\n";
  return 0;
}

int cmd_eval(RunConfig cfg) {
  Checkpoint ck = load_checkpoint(cfg.checkpoint);
  XcnnModel model = model_from_checkpoint(ck);
  Dataset ds = load_split(cfg, cfg.split);
  auto [acc, loss] = evaluate(model, ds, cfg.batch_size > 0 ? cfg.batch_size : 256);
  std::cout << "split " << cfg.split << " accuracy " << acc << " loss " << loss << "\n";
  return 0;
}

int cmd_explain(RunConfig cfg) {
  Checkpoint ck = load_checkpoint(cfg.checkpoint);
  XcnnModel model = model_from_checkpoint(ck);
  Dataset ds = load_split(cfg, cfg.split);
  fs::create_directories(cfg.outdir);

  int64_t count = std::min<int64_t>(cfg.count, ds.size());
  for (int64_t start = 0; start < count; start += 64) {
    int64_t take = std::min<int64_t>(64, count - start);
    TensorF batch({take, ds.images.dim(1), ds.images.dim(2), ds.images.dim(3)});
    std::copy(ds.images.data() + start * batch.numel() / take,
              ds.images.data() + (start + take) * batch.numel() / take, batch.data());
    auto out = model.forward(nullptr, batch, false);
    if (!out.heatmap.defined()) throw ConfigError("explain: checkpoint has no generator");
    std::vector<int32_t> pred = argmax_rows(out.logits);
    for (int64_t i = 0; i < take; ++i) {
      int64_t idx = start + i;
      char name[64];
      std::snprintf(name, sizeof(name), "input_%04d", static_cast<int>(idx));
      TensorF img = ds.image(idx);
      if (img.dim(0) == 1)
        write_pgm((fs::path(cfg.outdir) / (std::string(name) + ".pgm")).string(), to_gray(img));
      else
        write_ppm((fs::path(cfg.outdir) / (std::string(name) + ".ppm")).string(), to_rgb(img));
      Heatmap h = heatmap_from_batch(out.heatmap, i);
      h.source_index = idx;
      h.predicted = pred[static_cast<size_t>(i)];
      h.label = ds.labels[static_cast<size_t>(idx)];
      std::snprintf(name, sizeof(name), "heatmap_%04d.ppm", static_cast<int>(idx));
      write_ppm((fs::path(cfg.outdir) / name).string(), render_heatmap(h));
    }
  }
  std::cout << "wrote " << count << " image/heatmap pairs to " << cfg.outdir << "\n";
  return 0;
}

int cmd_localize(RunConfig cfg) {
  Checkpoint ck = load_checkpoint(cfg.checkpoint);
  XcnnModel model = model_from_checkpoint(ck);
  Dataset ds = load_split(cfg, cfg.split);
  fs::create_directories(cfg.outdir);

  std::ofstream csv(fs::path(cfg.outdir) / "boxes.csv");
  csv << kBoxCsvHeader << "\n";
  int64_t count = std::min<int64_t>(cfg.count, ds.size());
  int64_t with_box = 0;
  for (int64_t start = 0; start < count; start += 64) {
    int64_t take = std::min<int64_t>(64, count - start);
    int64_t stride = ds.images.dim(1) * ds.images.dim(2) * ds.images.dim(3);
    TensorF batch({take, ds.images.dim(1), ds.images.dim(2), ds.images.dim(3)});
    std::copy(ds.images.data() + start * stride, ds.images.data() + (start + take) * stride,
              batch.data());
    auto out = model.forward(nullptr, batch, false);
    if (!out.heatmap.defined()) throw ConfigError("localize: checkpoint has no generator");
    std::vector<int32_t> pred = argmax_rows(out.logits);
    for (int64_t i = 0; i < take; ++i) {
      int64_t idx = start + i;
      Heatmap h = heatmap_from_batch(out.heatmap, i);
      h.source_index = idx;
      h.predicted = pred[static_cast<size_t>(i)];
      h.label = ds.labels[static_cast<size_t>(idx)];
      auto box = localize(h, static_cast<float>(cfg.threshold));

      TensorF img = ds.image(idx);
      RgbImage overlay;
      if (img.dim(0) == 1) {
        GrayImage g = to_gray(img);
        overlay.width = g.width;
        overlay.height = g.height;
        overlay.pixels.resize(g.pixels.size() * 3);
        for (size_t p = 0; p < g.pixels.size(); ++p)
          overlay.pixels[3 * p] = overlay.pixels[3 * p + 1] = overlay.pixels[3 * p + 2] = g.pixels[p];
      } else {
        overlay = to_rgb(img);
      }
      if (box) {
        ++with_box;
        csv << bounding_box_csv_row(idx, h.predicted, h.label, *box) << "\n";
        draw_box(overlay, *box, 255, 0, 0);
      }
      char name[64];
      std::snprintf(name, sizeof(name), "box_%04d.ppm", static_cast<int>(idx));
      write_ppm((fs::path(cfg.outdir) / name).string(), overlay);
    }
  }
  std::cout << with_box << "/" << count << " images produced a box; boxes.csv and overlays in "
            << cfg.outdir << "\n";
  return 0;
}

int cmd_midiag(RunConfig cfg) {
  Checkpoint ck = load_checkpoint(cfg.checkpoint);
  XcnnModel model = model_from_checkpoint(ck);
  Dataset ds = load_split(cfg, cfg.split);
  MIReport rep = mi_diagnostic(model, ds, cfg.grid);
  std::cout << "samples " << rep.sample_count << " grid " << rep.grid << "\n"
            << "MI(heatmap code; label) = " << rep.mi_heatmap_label << " nats\n"
            << "MI(input code; label)   = " << rep.mi_input_label << " nats\n";
  if (!cfg.outdir.empty()) {
    fs::create_directories(cfg.outdir);
    std::ofstream os(fs::path(cfg.outdir) / "mi_report.txt");
    os << "samples " << rep.sample_count << "\ngrid " << rep.grid << "\nmi_heatmap_label "
       << rep.mi_heatmap_label << "\nmi_input_label " << rep.mi_input_label << "\n";
  }
  return 0;
}

int cmd_gradcheck(int shapes) {
  auto suite = run_gradient_suite(shapes);
  bool all_pass = true;
  for (const auto& [name, rep] : suite) {
    std::cout << (rep.pass ? "pass " : "FAIL ") << name << "  max_rel_err "
              << rep.max_rel_err << "  checked " << rep.checked << "  excluded "
              << rep.excluded << "\n";
    all_pass = all_pass && rep.pass;
  }
  std::cout << (all_pass ? "gradient suite passed" : "gradient suite FAILED") << "\n";
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"explainable CNN: heatmap-generating classifier"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto add_data_opts = [&](CLI::App* c) {
    c->add_option("--dataset", cfg.dataset, "mnist or cifar10")->default_str("mnist");
    c->add_option("--data-dir", cfg.data_dir, "dataset root (default $XCNN_DATA_DIR or ./data)");
    c->add_option("--subset", cfg.subset, "use only the first N training samples (0 = all)");
    c->add_flag("--stratified", cfg.stratified, "make --subset class-balanced");
    c->add_option("--threads", cfg.threads, "BLAS threads; 1 keeps runs bit-reproducible")
        ->default_str("1");
  };

  CLI::App* train = app.add_subcommand("train", "train a model and write checkpoints + metrics");
  add_data_opts(train);
  train->set_config("--config", "", "flat key=value config file (flags override it)");
  train->add_option("--model", cfg.model, "xcnn, baseline, or xcnn_modified")->default_str("xcnn");
  train->add_option("--disc", cfg.disc, "discriminator: mnist_cnn, vgg16, vgg_lite, auto");
  train->add_option("--gen-c", cfg.gen_c, "generator mid channels (0 = auto: 32 mnist / 128 cifar10)");
  train->add_option("--expand-c", cfg.expand_c, "1x1 expansion channels for xcnn_modified")
      ->default_str("16");
  train->add_option("--epochs", cfg.epochs)->default_str("10");
  train->add_option("--batch-size", cfg.batch_size, "0 = auto (64 mnist / 128 cifar10)");
  train->add_option("--lr", cfg.lr, "base learning rate (0 = auto: 0.01 mnist / 0.05 cifar10)");
  train->add_option("--momentum", cfg.momentum)->default_str("0.9");
  train->add_option("--wd", cfg.weight_decay, "weight decay (<0 = auto: 0 mnist / 5e-4 cifar10)");
  train->add_option("--milestones", cfg.milestones, "lr decay epochs, e.g. 10,15; auto or none");
  train->add_option("--gamma", cfg.gamma, "lr decay factor")->default_str("0.1");
  train->add_option("--seed", cfg.seed)->default_str("1");
  train->add_option("--augment", cfg.augment, "1/0 pad-4 crop + flip (-1 = auto: cifar10 only)");
  train->add_option("--outdir", cfg.outdir)->default_str("runs/out");
  train->add_option("--resume", cfg.resume, "checkpoint to continue from");

  CLI::App* eval = app.add_subcommand("eval", "report accuracy of a checkpoint");
  add_data_opts(eval);
  eval->add_option("--checkpoint", cfg.checkpoint)->required();
  eval->add_option("--split", cfg.split, "train or test")->default_str("test");
  eval->add_option("--batch-size", cfg.batch_size);

  CLI::App* explain = app.add_subcommand("explain", "write input/heatmap image pairs");
  add_data_opts(explain);
  explain->add_option("--checkpoint", cfg.checkpoint)->required();
  explain->add_option("--split", cfg.split)->default_str("test");
  explain->add_option("--count", cfg.count)->default_str("10");
  explain->add_option("--outdir", cfg.outdir)->default_str("runs/out");

  CLI::App* localize_cmd = app.add_subcommand("localize", "threshold heatmaps into bounding boxes");
  add_data_opts(localize_cmd);
  localize_cmd->add_option("--checkpoint", cfg.checkpoint)->required();
  localize_cmd->add_option("--split", cfg.split)->default_str("test");
  localize_cmd->add_option("--count", cfg.count)->default_str("10");
  localize_cmd->add_option("--threshold", cfg.threshold)->default_str("0.5");
  localize_cmd->add_option("--outdir", cfg.outdir)->default_str("runs/out");

  CLI::App* midiag = app.add_subcommand("midiag", "mutual-information diagnostic");
  add_data_opts(midiag);
  midiag->add_option("--checkpoint", cfg.checkpoint)->required();
  midiag->add_option("--split", cfg.split)->default_str("test");
  midiag->add_option("--grid", cfg.grid)->default_str("4");
  midiag->add_option("--outdir", cfg.outdir, "also write mi_report.txt here");

  int shapes = 20;
  CLI::App* gradcheck_cmd = app.add_subcommand("gradcheck", "run the layer gradient suite");
  gradcheck_cmd->add_option("--shapes", shapes, "random shapes per case")->default_str("20");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    set_blas_threads(cfg.threads);
    if (train->parsed()) return cmd_train(cfg);
    if (eval->parsed()) return cmd_eval(cfg);
    if (explain->parsed()) return cmd_explain(cfg);
    if (localize_cmd->parsed()) return cmd_localize(cfg);
    if (midiag->parsed()) return cmd_midiag(cfg);
    if (gradcheck_cmd->parsed()) return cmd_gradcheck(shapes);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
