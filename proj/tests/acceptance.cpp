// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <unistd.h>

#include "stormchip/datapipe.hpp"
#include "stormchip/gradcheck.hpp"
#include "stormchip/image_io.hpp"
#include "stormchip/metrics.hpp"
#include "stormchip/network.hpp"
#include "stormchip/optim.hpp"
#include "stormchip/persist.hpp"
#include "stormchip/train.hpp"

using namespace stormchip;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int number, const std::string& name, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%s %d %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", number, name.c_str(), o.detail.c_str(), s);
  std::fflush(stdout);
  failures += o.pass ? 0 : 1;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// 1 ------------------------------------------------------------------------

Outcome architecture() {
  const Network<float> net = build_damage_net();
  const std::vector<std::size_t> want_params{896, 18496, 73856, 147584, 3211776, 513};
  std::vector<std::size_t> got_params;
  for (std::size_t i = 0; i < net.layer_count(); ++i)
    if (net.param_count(i) > 0) got_params.push_back(net.param_count(i));
  std::vector<std::size_t> chain;
  for (const Shape& s : net.shape_trace())
    if (s.size() == 3) chain.push_back(s[1]);
    else if (chain.empty() || s[0] != chain.back()) chain.push_back(s[0]);
  const std::vector<std::size_t> want_chain{148, 74, 72, 36, 34, 17, 15, 7, 6272, 512, 1};
  const bool ok = got_params == want_params && net.total_param_count() == 3453121 && chain == want_chain;
  return {ok, "total parameters " + std::to_string(net.total_param_count())};
}

// 2 ------------------------------------------------------------------------

Outcome gradients() {
  const std::set<std::string> required{"conv3x3", "maxpool2x2", "dense", "relu", "leaky_relu",
                                       "sigmoid", "flatten",    "bce_l2"};
  std::map<std::string, std::size_t> passed_seeds;
  double worst = 0.0;
  bool all = true;
  for (const GradCheckResult& r : run_gradient_checks(2024)) {
    if (r.passed) ++passed_seeds[r.name];
    all = all && r.passed;
    if (required.count(r.name)) worst = std::max(worst, r.max_rel_error);
  }
  for (const std::string& k : required) all = all && passed_seeds[k] >= 20;
  return {all, "max relative error " + fmt("%.2e", worst) + " over 20 seeds per kind"};
}

// 3 ------------------------------------------------------------------------

Outcome optimizers() {
  Rng rng(3);
  double worst = 0.0;
  Tensor64 pa({6}), pr({6});
  for (std::size_t i = 0; i < 6; ++i) pa[i] = pr[i] = rng.uniform(-1, 1);
  std::vector<double> ta(pa.values().begin(), pa.values().end()), tr = ta;
  std::vector<double> m(6), v(6), vr(6);
  ParamState<double> sa, sr;
  const OptimizerConfig adam = OptimizerConfig::adam(), rms = OptimizerConfig::rmsprop();
  for (int step = 1; step <= 10; ++step) {
    Tensor64 g({6});
    for (double& x : g.values()) x = rng.uniform(-3, 3);
    adam_step(pa, g, sa, adam);
    rmsprop_step(pr, g, sr, rms);
    for (std::size_t i = 0; i < 6; ++i) {
      m[i] = 0.9 * m[i] + 0.1 * g[i];
      v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(0.9, step)), vh = v[i] / (1 - std::pow(0.999, step));
      ta[i] -= 1e-4 * mh / (std::sqrt(vh) + 1e-8);
      vr[i] = 0.9 * vr[i] + 0.1 * g[i] * g[i];
      tr[i] -= 1e-4 * g[i] / (std::sqrt(vr[i]) + 1e-7);
      worst = std::max({worst, std::fabs(pa[i] - ta[i]), std::fabs(pr[i] - tr[i])});
    }
  }
  return {worst <= 1e-12, "max deviation " + fmt("%.2e", worst)};
}

// 4 ------------------------------------------------------------------------

Outcome auc_equivalence() {
  Rng rng(4);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 2 + rng.below(49);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = i < 2 ? static_cast<int>(i) : static_cast<int>(rng.below(2));
      s[i] = rng.bernoulli(0.5) ? static_cast<double>(rng.below(4)) / 3.0 : rng.uniform(0, 1);  // ties
    }
    worst = std::max(worst, std::fabs(roc_auc(s, y).auc - auc_pairwise_oracle(s, y)));
  }
  return {worst <= 1e-9, "max |trapezoid - pairwise| " + fmt("%.2e", worst) + " over 1000 instances"};
}

// 5 ------------------------------------------------------------------------

Outcome majority_baseline() {
  Network<float> net({4}, {LayerSpec::dense(1, ActivationKind::sigmoid)});
  net.params(0).bias[0] = 3.0f;  // zero weights: always predicts damaged
  std::vector<float> labels(9000, 0.0f);
  std::fill(labels.begin(), labels.begin() + 8000, 1.0f);
  const TensorSource data(Tensor({9000, 4}, 0.5f), labels);
  const double acc = evaluate(net, data, 512).accuracy;
  return {std::fabs(acc - 0.8889) <= 1e-4, "accuracy " + fmt("%.4f", acc) + " on 8000:1000"};
}

// 6 ------------------------------------------------------------------------

Outcome overfit() {
  const std::size_t n = 16, s = 150;
  Tensor x({n, 3, s, s});
  std::vector<float> labels(n);
  Rng rng(6);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = static_cast<float>(i % 2);
    const std::size_t r0 = 20 + rng.below(70), c0 = 20 + rng.below(70);
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t r = 0; r < s; ++r)
        for (std::size_t q = 0; q < s; ++q) {
          const bool inside = r >= r0 && r < r0 + 40 && q >= c0 && q < c0 + 40;
          const double bg = 0.5 + rng.uniform(-0.05, 0.05);
          x[((i * 3 + c) * s + r) * s + q] = static_cast<float>(inside ? (labels[i] > 0 ? 0.95 : 0.05) : bg);
        }
  }
  const TensorSource data(std::move(x), labels);
  Network<float> net = build_damage_net();
  Rng init(7);
  initialize_xavier(net, init);
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.batch_size = 16;
  cfg.augmentation = AugmentConfig::disabled();
  cfg.optimizer = OptimizerConfig::adam();
  cfg.optimizer.learning_rate = 1e-4;
  std::size_t reached = 0;
  fit(net, data, data, cfg, [&](const EpochRecord& e) {
    if (e.val_accuracy == 1.0) reached = e.epoch;  // validation set is the training set, eval mode
    return reached == 0;
  });
  return {reached > 0, reached > 0 ? "100% training accuracy at epoch " + std::to_string(reached)
                                   : std::string("did not reach 100% in 200 epochs")};
}

// 7 ------------------------------------------------------------------------

Outcome dropout_mean() {
  Rng rng(7);
  const auto r = dropout_forward(Tensor({100000}, 1.0f), 0.5, Mode::train, &rng);
  double sum = 0.0;
  for (float v : r.output.values()) sum += v;
  const double mean = sum / 1e5;
  return {std::fabs(mean - 1.0) <= 0.02, "mean " + fmt("%.4f", mean)};
}

// 8 ------------------------------------------------------------------------

Outcome pipeline_properties() {
  std::vector<std::string> problems;

  Manifest pool;
  for (std::size_t i = 0; i < 14284 + 7209; ++i) {
    ChipRecord r;
    r.id = "c" + std::to_string(i);
    r.label = i < 14284 ? Label::damaged : Label::undamaged;
    r.chip_path = "chips/" + r.id + ".png";
    pool.push_back(r);
  }
  const Manifest split = make_splits(pool, SplitSpec{});
  std::map<std::pair<Label, Split>, std::size_t> count;
  for (const ChipRecord& r : split) ++count[{r.label, r.split}];
  auto both = [&](Split s, std::size_t pos, std::size_t neg) {
    return count[{Label::damaged, s}] == pos && count[{Label::undamaged, s}] == neg;
  };
  std::size_t upos = 0, uneg = 0;
  for (const ChipRecord& r : split)
    if (in_eval_set(r.split, Split::test_unbalanced)) (r.label == Label::damaged ? upos : uneg)++;
  if (!both(Split::train, 5000, 5000) || !both(Split::val, 1000, 1000) || !both(Split::test_balanced, 1000, 1000) ||
      upos != 8000 || uneg != 1000)
    problems.push_back("split cardinalities");
  std::set<std::string> train_ids, other_ids;
  for (const ChipRecord& r : split)
    (r.split == Split::train ? train_ids : other_ids).insert(r.id);
  for (const ChipRecord& r : split)
    if (r.split != Split::train && r.split != Split::none && train_ids.count(r.id)) problems.push_back("split overlap");

  // Three overlapping post-event strips see every building; the first is
  // black over half the area, so some buildings fall through to later strips.
  Rng rng(8);
  const fs::path tmp = fs::temp_directory_path() / ("stormchip_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(tmp);
  fs::create_directories(tmp / "strips");
  for (int k = 0; k < 3; ++k) {
    Tensor img({3, 120, 120});
    for (float& v : img.values()) v = static_cast<float>(rng.uniform(0.2, 0.8));
    if (k == 0)
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < 120 * 60; ++i) img[c * 120 * 120 + i] = 0.0f;
    const std::string id = "strip" + std::to_string(k);
    write_png(tmp / "strips" / (id + ".png"), img);
    std::ofstream(tmp / "strips" / (id + ".geo")) << "0\n1\n0\n0\n0\n1\n";
    std::ofstream(tmp / "strips" / (id + ".meta")) << "capture_epoch=" << 100 + k << "\n";
  }
  std::vector<BuildingRecord> buildings;
  for (int i = 0; i < 40; ++i)
    buildings.push_back({"b" + std::to_string(i), rng.uniform(10, 110), rng.uniform(10, 110), Label::damaged, ""});
  CropOptions crop;
  crop.window_px = 16;
  const Manifest chips = build_manifest(discover_strips(tmp / "strips"), buildings, tmp / "out", crop);
  std::map<std::string, std::size_t> usable;
  for (const ChipRecord& r : chips)
    if (!r.chip_path.empty()) ++usable[r.id];
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(tmp / "out" / "chips")) files += e.is_regular_file() ? 1 : 0;
  fs::remove_all(tmp);
  for (const auto& [id, n] : usable)
    if (n > 1) problems.push_back("two usable chips for " + id);
  if (chips.size() != buildings.size() || files != usable.size() || usable.empty())
    problems.push_back("chip files do not match manifest");

  DamageNetOptions o;
  o.input_shape = {3, 46, 46};
  Network<float> net = build_damage_net(o);
  Rng init(9);
  initialize_xavier(net, init);
  const std::string bytes = serialize_checkpoint(net);
  if (serialize_checkpoint(parse_checkpoint(bytes)) != bytes) problems.push_back("checkpoint roundtrip");

  const GeoTransform gt{-95.3, 2.7e-6, 4e-7, 29.7, 3e-7, -2.7e-6};
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const LonLat ll = gt.pixel_to_lonlat(rng.uniform(0, 40000), rng.uniform(0, 40000));
    const PixelCoord px = gt.lonlat_to_pixel(ll.lon, ll.lat);
    const LonLat back = gt.pixel_to_lonlat(px.col, px.row);
    worst = std::max({worst, std::fabs(back.lon - ll.lon), std::fabs(back.lat - ll.lat)});
  }
  if (worst > 1e-9) problems.push_back("geo roundtrip " + fmt("%.2e", worst));

  std::string detail = "splits 5000/1000/1000 per class and 8000:1000, dedup, checkpoint, geo " + fmt("%.1e", worst);
  if (!problems.empty()) detail = "problems: " + problems.front();
  return {problems.empty(), detail};
}

}  // namespace

int main() {
  criterion(1, "architecture oracle", architecture);
  criterion(2, "gradient checks", gradients);
  criterion(3, "optimizer oracles", optimizers);
  criterion(4, "AUC equivalence", auc_equivalence);
  criterion(5, "majority-class baseline", majority_baseline);
  criterion(6, "overfit sanity", overfit);
  criterion(7, "dropout expectation", dropout_mean);
  criterion(8, "pipeline properties", pipeline_properties);
  std::printf("INFO 9 dataset-scale results: not run here (needs the public imagery and hours of training)\n");
  std::printf("INFO 10 training-step time: logged by the train command, not asserted\n");
  std::printf("%s\n", failures == 0 ? "acceptance: all criteria passed" : "acceptance: FAILED");
  return failures == 0 ? 0 : 1;
}
