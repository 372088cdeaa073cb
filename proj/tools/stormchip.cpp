#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stormchip/config.hpp"
#include "stormchip/dataset.hpp"
#include "stormchip/datapipe.hpp"
#include "stormchip/errors.hpp"
#include "stormchip/gradcheck.hpp"
#include "stormchip/image_io.hpp"
#include "stormchip/inspect.hpp"
#include "stormchip/metrics.hpp"
#include "stormchip/network.hpp"
#include "stormchip/optim.hpp"
#include "stormchip/persist.hpp"
#include "stormchip/text.hpp"
#include "stormchip/train.hpp"

namespace fs = std::filesystem;
using namespace stormchip;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

void log(const std::string& msg) { std::cerr << "[stormchip] " << msg << '\n'; }

struct ConfigArgs {
  std::string file;
  std::vector<std::string> overrides;
};

void add_config_args(CLI::App* cmd, ConfigArgs& args) {
  cmd->add_option("--config", args.file, "key=value configuration file");
  cmd->add_option("--set", args.overrides, "override one key, e.g. --set epochs=5")->allow_extra_args(false);
}

// File first, then flags in order; logs the resolved result.
RunConfig resolve_config(const ConfigArgs& args, const std::function<void(RunConfig&)>& flags = {}) {
  RunConfig cfg;
  if (!args.file.empty()) cfg.apply_file(args.file);
  for (const std::string& kv : args.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(text::trim(kv.substr(0, eq)), text::trim(kv.substr(eq + 1)));
  }
  if (flags) flags(cfg);
  try {
    cfg.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  std::string resolved = cfg.to_text();
  log("resolved config:\n" + resolved);
  return cfg;
}

Shape input_shape_for(const RunConfig& cfg) { return {3, cfg.input_size, cfg.input_size}; }

DamageNetOptions net_options(const RunConfig& cfg) {
  DamageNetOptions o;
  o.activation = cfg.train.activation_variant;
  o.leaky_alpha = cfg.leaky_alpha;
  o.dropout = cfg.train.dropout_variant;
  o.input_shape = input_shape_for(cfg);
  return o;
}

void write_text(const fs::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << body;
  if (!out) throw DataError("failed writing " + path.string());
}

// ---------------------------------------------------------------------------

struct CropArgs {
  ConfigArgs config;
  std::string strips, buildings, out, exclusions;
  std::optional<std::size_t> window;
};

int cmd_crop(const CropArgs& a) {
  const RunConfig cfg = resolve_config(a.config, [&](RunConfig& c) {
    if (a.window) c.window_px = *a.window;
  });
  const auto strips = discover_strips(a.strips);
  if (strips.empty()) throw DataError("no strips found in " + a.strips);
  const auto buildings = read_buildings_csv(a.buildings);
  CropOptions opts;
  opts.window_px = cfg.window_px;
  opts.thresholds = cfg.quality;
  if (!a.exclusions.empty()) opts.exclusions = read_exclusions(a.exclusions);
  fs::create_directories(a.out);
  const Manifest manifest = build_manifest(strips, buildings, a.out, opts);
  write_manifest_csv(fs::path(a.out) / "manifest.csv", manifest);
  std::size_t usable = 0;
  for (const ChipRecord& r : manifest) usable += r.excluded ? 0 : 1;
  std::cout << "samples=" << manifest.size() << " usable=" << usable << " strips=" << strips.size() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct SplitArgs {
  ConfigArgs config;
  std::string manifest, spec, out;
};

int cmd_split(const SplitArgs& a) {
  ConfigArgs merged = a.config;
  if (!a.spec.empty()) {
    if (!merged.file.empty()) throw ConfigError("give either --spec or --config, not both");
    merged.file = a.spec;
  }
  const RunConfig cfg = resolve_config(merged);
  const fs::path in_dir = fs::path(a.manifest).parent_path();
  Manifest rows = make_splits(read_manifest_csv(a.manifest), cfg.split);
  fs::create_directories(a.out);
  const fs::path out_dir = fs::absolute(a.out);
  for (ChipRecord& r : rows)
    if (!r.chip_path.empty())
      r.chip_path = fs::relative(fs::absolute(in_dir / r.chip_path), out_dir).generic_string();
  write_manifest_csv(out_dir / "manifest.csv", rows);
  std::size_t counts[5] = {};
  for (const ChipRecord& r : rows) ++counts[static_cast<int>(r.split)];
  std::cout << "train=" << counts[1] << " val=" << counts[2] << " test_balanced=" << counts[3]
            << " test_unbalanced_extra=" << counts[4] << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  ConfigArgs config;
  std::string manifest, out, model, features_ckpt;
};

// Times one optimisation step on a throwaway copy of the network.
void log_step_time(const Network<float>& net, const SampleSource& train, const TrainConfig& tc) {
  Network<float> probe = net;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < std::min<std::size_t>(tc.batch_size, train.size()); ++i) idx.push_back(i);
  const Batch<float> b = assemble_batch<float>(train, idx);
  Rng rng(tc.seed);
  Optimizer<float> opt(tc.optimizer);
  const auto t0 = std::chrono::steady_clock::now();
  const auto fp = forward(probe, b.images, Mode::train, &rng);
  backward(probe, fp, b.labels, LossKind::binary_cross_entropy, static_cast<float>(tc.optimizer.l2_lambda));
  opt.step(probe);
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  log("training step (batch " + std::to_string(idx.size()) + "): " + text::format_double(s) + " s");
}

TensorSource feature_source(const Network<float>& stack, const SampleSource& src, std::size_t batch) {
  std::vector<float> labels;
  std::vector<float> values;
  std::size_t width = 0;
  for (std::size_t start = 0; start < src.size(); start += batch) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(start + batch, src.size()); ++i) idx.push_back(i);
    const Batch<float> b = assemble_batch<float>(src, idx);
    const Tensor f = extract_features(stack, b.images);
    width = f.size() / idx.size();
    values.insert(values.end(), f.data(), f.data() + f.size());
    for (std::size_t s = 0; s < idx.size(); ++s) labels.push_back(b.labels[s]);
  }
  return TensorSource(Tensor({src.size(), width}, std::move(values)), std::move(labels));
}

// Conv stack up to flatten from `stack`, followed by the trained head.
Network<float> compose(const Network<float>& stack, const Network<float>& head) {
  const std::size_t fi = flatten_index(stack);
  std::vector<LayerSpec> layers(stack.layers().begin(), stack.layers().begin() + static_cast<std::ptrdiff_t>(fi) + 1);
  for (const LayerSpec& l : head.layers()) layers.push_back(l);
  Network<float> net(stack.input_shape(), layers);
  for (std::size_t i = 0; i <= fi; ++i) net.params(i) = stack.params(i);
  for (std::size_t i = 0; i < head.layer_count(); ++i) net.params(fi + 1 + i) = head.params(i);
  return net;
}

int cmd_train(const TrainArgs& a) {
  const RunConfig cfg = resolve_config(a.config, [&](RunConfig& c) {
    if (!a.model.empty()) c.set("model", a.model);
  });
  const fs::path base = fs::path(a.manifest).parent_path();
  const Manifest manifest = read_manifest_csv(a.manifest);
  const Shape in_shape = input_shape_for(cfg);
  ChipSource train(select_split(manifest, Split::train), base, in_shape);
  ChipSource val(select_split(manifest, Split::val), base, in_shape);
  if (train.size() == 0) throw DataError("manifest has no usable train rows; run split first");
  if (val.size() == 0) throw DataError("manifest has no usable val rows; run split first");
  fs::create_directories(a.out);
  const fs::path out(a.out);
  write_text(out / "config.txt", cfg.to_text());
  log("train=" + std::to_string(train.size()) + " val=" + std::to_string(val.size()) + " model=" +
      std::string(to_string(cfg.model)));

  Rng init_rng = Rng::substream(cfg.train.seed, 0x494e4954ULL);
  auto on_epoch = [](const EpochRecord& r) {
    log("epoch " + std::to_string(r.epoch) + " train_loss=" + text::format_double(r.train_loss) +
        " train_acc=" + text::format_double(r.train_accuracy) + " val_loss=" + text::format_double(r.val_loss) +
        " val_acc=" + text::format_double(r.val_accuracy) + " (" + text::format_double(r.seconds) + " s)");
    return true;
  };

  Network<float> last, best;
  FitResult<float> result;
  if (cfg.model == ModelKind::lr) {
    Network<float> stack;
    if (!a.features_ckpt.empty()) {
      stack = load_checkpoint(a.features_ckpt);
      if (stack.input_shape() != in_shape)
        throw ConfigError("feature checkpoint expects input " + to_string(stack.input_shape()) +
                          ", config gives " + to_string(in_shape));
    } else {
      stack = build_damage_net<float>(net_options(cfg));
      initialize_xavier(stack, init_rng);
      log("no --features-ckpt: using a randomly initialised conv stack");
    }
    const TensorSource ftrain = feature_source(stack, train, cfg.train.batch_size);
    const TensorSource fval = feature_source(stack, val, cfg.train.batch_size);
    const std::size_t width = stack.shape_trace()[flatten_index(stack)][0];
    Network<float> head({width}, {LayerSpec::dense(1, ActivationKind::sigmoid)});
    initialize_xavier(head, init_rng);
    TrainConfig tc = cfg.train;
    tc.augmentation = AugmentConfig::disabled();
    result = fit(head, ftrain, fval, tc, on_epoch);
    last = compose(stack, head);
    best = compose(stack, result.best);
  } else {
    Network<float> net = cfg.model == ModelKind::vgg16 ? build_vgg16_shaped<float>(in_shape, net_options(cfg))
                                                       : build_damage_net<float>(net_options(cfg));
    initialize_xavier(net, init_rng);
    log("parameters=" + std::to_string(net.total_param_count()));
    log_step_time(net, train, cfg.train);
    result = fit(net, train, val, cfg.train, on_epoch);
    last = std::move(net);
    best = std::move(result.best);
  }
  save_checkpoint(last, out / "last.ckpt");
  save_checkpoint(best, out / "best.ckpt");
  write_history_csv(out / "history.csv", result.history);
  std::cout << "best_epoch=" << result.best_epoch
            << " best_val_acc=" << text::format_double(result.history.at(result.best_epoch - 1).val_accuracy)
            << " final_checkpoint=" << (out / "best.ckpt").string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  ConfigArgs config;
  std::string manifest, ckpt, split, out;
};

int cmd_eval(const EvalArgs& a) {
  const RunConfig cfg = resolve_config(a.config);
  Split split;
  try {
    split = parse_split(a.split);
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  if (split == Split::none) throw ConfigError("--split must name an evaluation set");
  const Network<float> net = load_checkpoint(a.ckpt);
  const fs::path base = fs::path(a.manifest).parent_path();
  ChipSource src(select_split(read_manifest_csv(a.manifest), split), base, net.input_shape());
  if (src.size() == 0) throw DataError("split '" + a.split + "' has no usable rows");

  const Evaluation ev = evaluate(net, src, cfg.train.batch_size, cfg.train.threshold);
  std::vector<int> labels;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < src.size(); ++i) {
    labels.push_back(src.label(i) >= 0.5f ? 1 : 0);
    ids.push_back(src.rows()[i].id);
  }
  const EvalReport report = evaluate_scores(ev.scores, labels, cfg.train.threshold);
  fs::create_directories(a.out);
  const fs::path out(a.out);
  write_report(out / "report.txt", report,
               {{"split", a.split}, {"checkpoint", a.ckpt}, {"loss", text::format_double(ev.loss)}});
  write_roc_csv(out / "roc.csv", report.roc_points);
  const auto wrong = misclassification_export(ids, labels, ev.scores, cfg.train.threshold);
  write_misclassifications_csv(out / "misclassified.csv", wrong);

  char line[128];
  std::snprintf(line, sizeof line, "accuracy=%.4f", report.accuracy);
  std::cout << line;
  if (report.has_auc) {
    std::snprintf(line, sizeof line, " auc=%.4f", report.auc);
    std::cout << line;
  } else {
    std::cout << " auc=n/a";
  }
  std::cout << " n=" << src.size() << " positives=" << report.n_pos << " negatives=" << report.n_neg << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct AnnotateArgs {
  ConfigArgs config;
  std::string ckpt, buildings, strips, out;
  std::optional<std::size_t> window;
};

int cmd_annotate(const AnnotateArgs& a) {
  const RunConfig cfg = resolve_config(a.config, [&](RunConfig& c) {
    if (a.window) c.window_px = *a.window;
  });
  const Network<float> net = load_checkpoint(a.ckpt);
  const auto buildings = read_buildings_csv(a.buildings);
  std::vector<Raster> rasters;
  for (const StripInfo& s : discover_strips(a.strips))
    if (!s.pre_event) rasters.push_back(load_raster(s.image, s.sidecar));
  if (rasters.empty()) throw DataError("no post-event strips found in " + a.strips);

  std::vector<AnnotationRow> rows;
  std::vector<Tensor> inputs;
  for (const BuildingRecord& b : buildings) {
    for (const Raster& r : rasters) {
      const CropResult c = crop_window(r, b, cfg.window_px);
      if (!c.chip) continue;
      if (quality_metrics(*c.chip, cfg.quality).black_fraction >= cfg.quality.totally_black) continue;
      rows.push_back({b.id, b.lon, b.lat});
      inputs.push_back(prepare_input(*c.chip, net.input_shape()));
      break;
    }
  }
  if (rows.size() < buildings.size())
    log(std::to_string(buildings.size() - rows.size()) + " buildings have no usable chip and are skipped");

  std::vector<double> scores;
  const std::size_t per = element_count(net.input_shape());
  const std::size_t bs = cfg.train.batch_size;
  for (std::size_t start = 0; start < inputs.size(); start += bs) {
    const std::size_t n = std::min(bs, inputs.size() - start);
    Shape shape{n};
    shape.insert(shape.end(), net.input_shape().begin(), net.input_shape().end());
    Tensor batch(shape);
    for (std::size_t s = 0; s < n; ++s)
      std::copy(inputs[start + s].data(), inputs[start + s].data() + per, batch.data() + s * per);
    const auto fp = forward(net, batch, Mode::eval);
    for (std::size_t s = 0; s < n; ++s) scores.push_back(fp.probabilities()[s]);
  }
  if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
  write_annotations(rows, scores, cfg.train.threshold, a.out);
  std::cout << "annotated=" << rows.size() << " skipped=" << buildings.size() - rows.size() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct InspectArgs {
  std::string ckpt, chip, layers, out;
};

int cmd_inspect(const InspectArgs& a) {
  const Network<float> net = load_checkpoint(a.ckpt);
  std::vector<std::size_t> layers;
  for (const std::string& part : text::split(a.layers, ',')) {
    std::size_t l = 0;
    try {
      l = text::parse_int<std::size_t>(part, "--layers entry");
    } catch (const ValidationError& e) {
      throw ConfigError(e.what());
    }
    if (l < 1 || l > net.layer_count())
      throw ConfigError("layer " + std::to_string(l) + " outside 1.." + std::to_string(net.layer_count()));
    layers.push_back(l - 1);
  }
  if (layers.empty()) throw ConfigError("--layers is empty");
  const Tensor image = prepare_input(read_png(a.chip, net.input_shape()[0] == 3), net.input_shape());
  Shape shape{1};
  shape.insert(shape.end(), image.shape().begin(), image.shape().end());
  const auto fp = forward(net, image.reshaped(shape), Mode::eval);
  fs::create_directories(a.out);
  for (std::size_t l : layers) {
    const auto files = export_activation_maps(fp, l, a.out);
    std::cout << "layer " << l + 1 << " (" << to_string(net.layer(l).kind) << "): " << files.size() << " maps";
    if (net.layer(l).kind == LayerKind::conv3x3) {
      const DeadFilterReport d = dead_filter_report(net, fp, l);
      std::cout << ", dead filters " << d.dead << '/' << d.total;
    }
    std::cout << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_gradcheck(std::uint64_t seed, std::size_t seeds) {
  GradCheckOptions opts;
  opts.seeds = seeds;
  const auto results = run_gradient_checks(seed, opts);
  struct Summary {
    double worst = 0.0;
    std::size_t runs = 0, failures = 0, checked = 0;
  };
  std::vector<std::pair<std::string, Summary>> by_kind;
  for (const GradCheckResult& r : results) {
    auto it = std::find_if(by_kind.begin(), by_kind.end(), [&](const auto& p) { return p.first == r.name; });
    if (it == by_kind.end()) it = by_kind.insert(by_kind.end(), {r.name, {}});
    Summary& s = it->second;
    s.worst = std::max(s.worst, r.max_rel_error);
    ++s.runs;
    s.failures += r.passed ? 0 : 1;
    s.checked += r.checked;
  }
  bool ok = true;
  for (const auto& [name, s] : by_kind) {
    char line[200];
    std::snprintf(line, sizeof line, "%-4s %-22s seeds=%zu derivatives=%zu max_rel_error=%.3e", s.failures ? "FAIL" : "PASS",
                  name.c_str(), s.runs, s.checked, s.worst);
    std::cout << line << '\n';
    ok = ok && s.failures == 0;
  }
  std::cout << (ok ? "gradcheck: all passed" : "gradcheck: FAILED") << '\n';
  return ok ? kExitOk : kExitNumeric;
}

int guarded(const std::function<int()>& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const UsageError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const ShapeError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const ValidationError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Building-damage chip classifier: crop, split, train, evaluate, annotate"};
  app.require_subcommand(1);
  int code = kExitOk;

  CropArgs crop;
  auto* c = app.add_subcommand("crop", "cut building-centred chips from strips and write a manifest");
  c->add_option("--strips", crop.strips, "directory of <id>.png strips with .geo sidecars")->required();
  c->add_option("--buildings", crop.buildings, "CSV id,lon,lat,label[,source]")->required();
  c->add_option("--window", crop.window, "chip edge in pixels (default 128)");
  c->add_option("--exclusions", crop.exclusions, "operator exclusion list, one id per line");
  c->add_option("--out", crop.out, "output directory")->required();
  add_config_args(c, crop.config);
  c->callback([&] { code = guarded([&] { return cmd_crop(crop); }); });

  SplitArgs split;
  auto* s = app.add_subcommand("split", "assign train/val/test splits to a manifest");
  s->add_option("--manifest", split.manifest, "input manifest.csv")->required();
  s->add_option("--spec", split.spec, "key=value file with split.* keys");
  s->add_option("--out", split.out, "output directory for the split manifest")->required();
  add_config_args(s, split.config);
  s->callback([&] { code = guarded([&] { return cmd_split(split); }); });

  TrainArgs train;
  auto* t = app.add_subcommand("train", "train a model on the train split, validating on val");
  t->add_option("--manifest", train.manifest, "split manifest.csv")->required();
  t->add_option("--out", train.out, "output directory for checkpoints and history")->required();
  t->add_option("--model", train.model, "cnn | lr | vgg16");
  t->add_option("--features-ckpt", train.features_ckpt, "conv stack for --model lr");
  add_config_args(t, train.config);
  t->callback([&] { code = guarded([&] { return cmd_train(train); }); });

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "score a checkpoint on one split");
  e->add_option("--manifest", eval.manifest, "split manifest.csv")->required();
  e->add_option("--ckpt", eval.ckpt, "checkpoint file")->required();
  e->add_option("--split", eval.split, "train | val | test_balanced | test_unbalanced")->required();
  e->add_option("--out", eval.out, "output directory for report files")->required();
  add_config_args(e, eval.config);
  e->callback([&] { code = guarded([&] { return cmd_eval(eval); }); });

  AnnotateArgs annotate;
  auto* an = app.add_subcommand("annotate", "predict damage for every building seen in post-event strips");
  an->add_option("--ckpt", annotate.ckpt, "checkpoint file")->required();
  an->add_option("--buildings", annotate.buildings, "CSV id,lon,lat[,label[,source]]")->required();
  an->add_option("--strips", annotate.strips, "strip directory")->required();
  an->add_option("--window", annotate.window, "chip edge in pixels");
  an->add_option("--out", annotate.out, "output CSV")->required();
  add_config_args(an, annotate.config);
  an->callback([&] { code = guarded([&] { return cmd_annotate(annotate); }); });

  InspectArgs inspect;
  auto* in = app.add_subcommand("inspect", "export per-filter activation maps for one chip");
  in->add_option("--ckpt", inspect.ckpt, "checkpoint file")->required();
  in->add_option("--chip", inspect.chip, "chip PNG")->required();
  in->add_option("--layers", inspect.layers, "1-based layer numbers, comma separated")->required();
  in->add_option("--out", inspect.out, "output directory")->required();
  in->callback([&] { code = guarded([&] { return cmd_inspect(inspect); }); });

  std::uint64_t gc_seed = 1;
  std::size_t gc_seeds = 20;
  auto* g = app.add_subcommand("gradcheck", "finite-difference check of every layer's gradients");
  g->add_option("--seed", gc_seed, "base seed")->required();
  g->add_option("--seeds", gc_seeds, "random instances per layer kind")->check(CLI::PositiveNumber);
  g->callback([&] { code = guarded([&] { return cmd_gradcheck(gc_seed, gc_seeds); }); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kExitConfig;
  }
  return code;
}
