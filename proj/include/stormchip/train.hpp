#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "stormchip/augment.hpp"
#include "stormchip/errors.hpp"
#include "stormchip/network.hpp"
#include "stormchip/optim.hpp"
#include "stormchip/rng.hpp"
#include "stormchip/tensor.hpp"

namespace stormchip {

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t epochs = 20;
  std::uint64_t seed = 1;
  AugmentConfig augmentation;
  OptimizerConfig optimizer;
  DropoutVariant dropout_variant = DropoutVariant::fc;
  ActivationKind activation_variant = ActivationKind::relu;
  double threshold = 0.5;

  void validate() const {
    if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
    if (epochs < 1) throw ValidationError("epochs must be >= 1");
    if (activation_variant != ActivationKind::relu && activation_variant != ActivationKind::leaky_relu)
      throw ValidationError("activation variant must be relu or leaky_relu");
    augmentation.validate();
    optimizer.validate();
  }
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double seconds = 0.0;  // wall time; not part of equality

  friend bool operator==(const EpochRecord& a, const EpochRecord& b) {
    return a.epoch == b.epoch && a.train_loss == b.train_loss && a.train_accuracy == b.train_accuracy &&
           a.val_loss == b.val_loss && a.val_accuracy == b.val_accuracy;
  }
};

using EpochHistory = std::vector<EpochRecord>;

// Random-access labelled samples. load() returns one C x H x W image already
// at the network's input resolution.
class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual std::size_t size() const = 0;
  virtual float label(std::size_t i) const = 0;
  virtual Tensor load(std::size_t i) const = 0;
};

// Samples held in memory as one N x ... tensor.
class TensorSource final : public SampleSource {
 public:
  TensorSource(Tensor samples, std::vector<float> labels) : samples_(std::move(samples)), labels_(std::move(labels)) {
    if (samples_.empty() || samples_.dim(0) != labels_.size())
      throw ValidationError("sample/label counts differ");
    sample_shape_.assign(samples_.shape().begin() + 1, samples_.shape().end());
    per_ = element_count(sample_shape_);
  }
  std::size_t size() const override { return labels_.size(); }
  float label(std::size_t i) const override { return labels_.at(i); }
  Tensor load(std::size_t i) const override {
    const float* p = samples_.data() + i * per_;
    return Tensor(sample_shape_, std::vector<float>(p, p + per_));
  }

 private:
  Tensor samples_;
  std::vector<float> labels_;
  Shape sample_shape_;
  std::size_t per_ = 0;
};

template <typename T>
struct Batch {
  BasicTensor<T> images;
  BasicTensor<T> labels;  // N x 1
};

template <typename T>
Batch<T> assemble_batch(const SampleSource& source, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw ValidationError("cannot assemble an empty batch");
  std::vector<Tensor> samples;
  samples.reserve(indices.size());
  for (std::size_t idx : indices) samples.push_back(source.load(idx));
  Shape shape{indices.size()};
  shape.insert(shape.end(), samples.front().shape().begin(), samples.front().shape().end());
  const std::size_t per = samples.front().size();
  Batch<T> b{BasicTensor<T>(shape), BasicTensor<T>({indices.size(), 1})};
  for (std::size_t s = 0; s < indices.size(); ++s) {
    if (samples[s].shape() != samples.front().shape()) throw ShapeError("samples in a batch differ in shape");
    std::copy(samples[s].data(), samples[s].data() + per, b.images.data() + s * per);
    b.labels[s] = static_cast<T>(source.label(indices[s]));
  }
  return b;
}

struct Evaluation {
  double loss = 0.0;  // mean BCE without the weight penalty
  double accuracy = 0.0;
  std::vector<double> scores;
};

template <typename T>
Evaluation evaluate(const Network<T>& net, const SampleSource& source, std::size_t batch_size,
                    double threshold = 0.5) {
  if (source.size() == 0) throw ValidationError("cannot evaluate an empty dataset");
  Evaluation ev;
  ev.scores.reserve(source.size());
  std::size_t correct = 0;
  const double lo = kProbabilityClamp, hi = 1.0 - kProbabilityClamp;
  for (std::size_t start = 0; start < source.size(); start += batch_size) {
    std::vector<std::size_t> idx(std::min(batch_size, source.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    const Batch<T> b = assemble_batch<T>(source, idx);
    const auto fp = forward(net, b.images, Mode::eval);
    for (std::size_t s = 0; s < idx.size(); ++s) {
      const double p = static_cast<double>(fp.probabilities()[s]);
      const double y = static_cast<double>(b.labels[s]);
      const double pc = std::clamp(p, lo, hi);
      ev.loss -= y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc);
      correct += ((p >= threshold) == (y >= 0.5)) ? 1 : 0;
      ev.scores.push_back(p);
    }
  }
  ev.loss /= static_cast<double>(source.size());
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(source.size());
  return ev;
}

template <typename T>
struct FitResult {
  EpochHistory history;
  std::size_t best_epoch = 0;  // 1-based epoch with the highest validation accuracy
  Network<T> best;             // parameters at best_epoch
};

// Called after every epoch; return false to stop early.
using EpochCallback = std::function<bool(const EpochRecord&)>;

// Mini-batch training. Each epoch draws a fresh permutation from the run seed,
// keeps the last partial batch, augments training batches only, and records
// running train loss/accuracy (train mode) plus eval-mode validation metrics.
// `net` is updated in place and ends at the last epoch's parameters.
template <typename T>
FitResult<T> fit(Network<T>& net, const SampleSource& train, const SampleSource& val, const TrainConfig& cfg,
                 const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (train.size() == 0) throw ValidationError("training set is empty");
  if (val.size() == 0) throw ValidationError("validation set is empty");

  Optimizer<T> opt(cfg.optimizer);
  Rng shuffle_rng = Rng::substream(cfg.seed, 0x5348554646ULL);
  Rng dropout_rng = Rng::substream(cfg.seed, 0x44524f50ULL);
  const T l2 = static_cast<T>(cfg.optimizer.l2_lambda);

  FitResult<T> result;
  result.best = net;
  double best_val = -1.0;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::uint64_t batch_counter = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(
                                                             std::min(start + cfg.batch_size, order.size())));
      Batch<T> b = assemble_batch<T>(train, idx);
      if (cfg.augmentation.enabled && b.images.rank() == 4)
        b.images = augment_batch(b.images, cfg.augmentation, cfg.seed, ++batch_counter);
      const auto fp = forward(net, b.images, Mode::train, &dropout_rng);
      const auto br = backward(net, fp, b.labels, LossKind::binary_cross_entropy, l2);
      opt.step(net);
      loss_sum += static_cast<double>(br.loss) * static_cast<double>(idx.size());
      for (std::size_t s = 0; s < idx.size(); ++s)
        correct += ((static_cast<double>(fp.probabilities()[s]) >= cfg.threshold) == (b.labels[s] >= T{0.5})) ? 1 : 0;
    }
    const Evaluation ev = evaluate(net, val, cfg.batch_size, cfg.threshold);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
    rec.val_loss = ev.loss;
    rec.val_accuracy = ev.accuracy;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(rec);
    if (ev.accuracy > best_val) {
      best_val = ev.accuracy;
      result.best_epoch = epoch;
      result.best = net;
    }
    if (on_epoch && !on_epoch(rec)) break;
  }
  return result;
}

}  // namespace stormchip
