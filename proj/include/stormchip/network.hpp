#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "stormchip/errors.hpp"
#include "stormchip/gemm.hpp"
#include "stormchip/kernels.hpp"
#include "stormchip/layers.hpp"
#include "stormchip/rng.hpp"
#include "stormchip/tensor.hpp"

namespace stormchip {

template <typename T>
struct LayerParams {
  BasicTensor<T> weight;  // conv: Cout x (Cin*3*3); dense: in x out
  BasicTensor<T> bias;    // Cout or out
};

// Ordered layer list plus parameters and gradients. Input and per-layer
// output shapes are per sample (no batch axis); batches add a leading N.
template <typename T>
class Network {
 public:
  Network() = default;

  Network(Shape input_shape, std::vector<LayerSpec> layers)
      : input_shape_(std::move(input_shape)), layers_(std::move(layers)) {
    check_shape(input_shape_);
    Shape current = input_shape_;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const LayerSpec& spec = layers_[i];
      spec.validate();
      current = output_shape(spec, current, i);
      trace_.push_back(current);
    }
    params_.resize(layers_.size());
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const LayerSpec& spec = layers_[i];
      const Shape& in = i == 0 ? input_shape_ : trace_[i - 1];
      if (spec.kind == LayerKind::conv3x3) {
        params_[i].weight = BasicTensor<T>({spec.units, in[0] * kKernel * kKernel});
        params_[i].bias = BasicTensor<T>({spec.units});
      } else if (spec.kind == LayerKind::dense) {
        params_[i].weight = BasicTensor<T>({in[0], spec.units});
        params_[i].bias = BasicTensor<T>({spec.units});
      }
    }
    grads_ = params_;
  }

  const Shape& input_shape() const noexcept { return input_shape_; }
  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  std::size_t layer_count() const noexcept { return layers_.size(); }
  const LayerSpec& layer(std::size_t i) const { return layers_.at(i); }

  // Output shape of every layer for one input sample.
  const std::vector<Shape>& shape_trace() const noexcept { return trace_; }
  const Shape& output_shape() const { return trace_.empty() ? input_shape_ : trace_.back(); }

  // Input shape of layer i.
  const Shape& layer_input_shape(std::size_t i) const { return i == 0 ? input_shape_ : trace_.at(i - 1); }

  std::size_t param_count(std::size_t i) const {
    return params_.at(i).weight.size() + params_.at(i).bias.size();
  }
  std::size_t total_param_count() const {
    std::size_t total = 0;
    for (std::size_t i = 0; i < layers_.size(); ++i) total += param_count(i);
    return total;
  }

  LayerParams<T>& params(std::size_t i) { return params_.at(i); }
  const LayerParams<T>& params(std::size_t i) const { return params_.at(i); }
  LayerParams<T>& grads(std::size_t i) { return grads_.at(i); }
  const LayerParams<T>& grads(std::size_t i) const { return grads_.at(i); }

  // Parameter tensors in layer order, weight before bias.
  std::vector<BasicTensor<T>*> parameter_tensors() { return collect(params_); }
  std::vector<BasicTensor<T>*> gradient_tensors() { return collect(grads_); }
  std::vector<const BasicTensor<T>*> parameter_tensors() const {
    std::vector<const BasicTensor<T>*> out;
    for (const auto& p : params_)
      if (!p.weight.empty()) {
        out.push_back(&p.weight);
        out.push_back(&p.bias);
      }
    return out;
  }

  void zero_grads() {
    for (auto& g : grads_) {
      g.weight.fill(T{0});
      g.bias.fill(T{0});
    }
  }

  template <typename U>
  Network<U> cast() const {
    Network<U> out(input_shape_, layers_);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      out.params(i).weight = params_[i].weight.template cast<U>();
      out.params(i).bias = params_[i].bias.template cast<U>();
    }
    return out;
  }

 private:
  static Shape output_shape(const LayerSpec& spec, const Shape& in, std::size_t index) {
    auto fail = [&](const std::string& why) {
      return ShapeError("layer " + std::to_string(index) + " (" + std::string(to_string(spec.kind)) +
                        ") on input " + to_string(in) + ": " + why);
    };
    switch (spec.kind) {
      case LayerKind::conv3x3: {
        if (in.size() != 3) throw fail("needs a CxHxW input");
        const std::size_t pad = spec.padding == Padding::same ? 1 : 0;
        if (in[1] + 2 * pad < kKernel || in[2] + 2 * pad < kKernel) throw fail("input smaller than 3x3 kernel");
        return {spec.units, in[1] + 2 * pad - 2, in[2] + 2 * pad - 2};
      }
      case LayerKind::maxpool2x2:
        if (in.size() != 3) throw fail("needs a CxHxW input");
        if (in[1] < 2 || in[2] < 2) throw fail("input smaller than 2x2 window");
        return {in[0], in[1] / 2, in[2] / 2};
      case LayerKind::flatten: return {element_count(in)};
      case LayerKind::dense:
        if (in.size() != 1) throw fail("needs a flat input");
        return {spec.units};
      case LayerKind::activation:
      case LayerKind::dropout: return in;
    }
    return in;
  }

  static std::vector<BasicTensor<T>*> collect(std::vector<LayerParams<T>>& blocks) {
    std::vector<BasicTensor<T>*> out;
    for (auto& p : blocks)
      if (!p.weight.empty()) {
        out.push_back(&p.weight);
        out.push_back(&p.bias);
      }
    return out;
  }

  Shape input_shape_;
  std::vector<LayerSpec> layers_;
  std::vector<Shape> trace_;
  std::vector<LayerParams<T>> params_;
  std::vector<LayerParams<T>> grads_;
};

// ---------------------------------------------------------------------------
// Stand-alone layer kernels

template <typename T>
struct PoolResult {
  BasicTensor<T> output;
  std::vector<std::uint32_t> argmax;  // flat input index feeding each output element
};

// 2x2 stride-2 max pooling over N x C x H x W. Odd trailing rows/columns are
// dropped. Ties go to the first element in row-major scan order.
template <typename T>
PoolResult<T> maxpool2x2(const BasicTensor<T>& x) {
  if (x.rank() != 4) throw ShapeError("maxpool2x2 expects NxCxHxW, got " + to_string(x.shape()));
  if (x.size() > std::numeric_limits<std::uint32_t>::max()) throw ShapeError("maxpool2x2 input too large");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h < 2 || w < 2) throw ShapeError("maxpool2x2 input smaller than 2x2");
  const std::size_t ho = h / 2, wo = w / 2;
  PoolResult<T> r{BasicTensor<T>({n, c, ho, wo}), std::vector<std::uint32_t>(n * c * ho * wo)};
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const std::size_t base = plane * h * w;
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox, ++o) {
        std::size_t best = base + 2 * oy * w + 2 * ox;
        for (std::size_t dy = 0; dy < 2; ++dy)
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = base + (2 * oy + dy) * w + 2 * ox + dx;
            if (x[idx] > x[best]) best = idx;
          }
        r.output[o] = x[best];
        r.argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return r;
}

template <typename T>
struct DropoutResult {
  BasicTensor<T> output;
  BasicTensor<T> mask;  // 0 or 1/(1-rate); empty when the layer is a passthrough
};

// Inverted dropout. Eval mode and rate 0 are exact passthroughs.
template <typename T>
DropoutResult<T> dropout_forward(const BasicTensor<T>& x, double rate, Mode mode, Rng* rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ValidationError("dropout rate must lie in [0, 1)");
  if (mode == Mode::eval || rate == 0.0) return {x, {}};
  if (rng == nullptr) throw UsageError("dropout in train mode needs a random generator");
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  DropoutResult<T> r{x, BasicTensor<T>(x.shape())};
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T m = rng->uniform() < rate ? T{0} : keep_scale;
    r.mask[i] = m;
    r.output[i] = x[i] * m;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Forward / backward

template <typename T>
struct ForwardPass {
  Mode mode = Mode::eval;
  // outputs[0] is the input batch, outputs[i + 1] the output of layer i.
  std::vector<BasicTensor<T>> outputs;
  std::vector<std::vector<std::uint32_t>> pool_argmax;  // per layer, empty unless pooling
  std::vector<BasicTensor<T>> dropout_masks;            // per layer, empty unless active dropout

  const BasicTensor<T>& input() const { return outputs.front(); }
  const BasicTensor<T>& layer_output(std::size_t i) const { return outputs.at(i + 1); }
  const BasicTensor<T>& probabilities() const { return outputs.back(); }
};

namespace detail {

template <typename T>
void apply_activation_inplace(ActivationKind kind, double alpha, T* data, std::size_t n) {
  if (kind == ActivationKind::identity) return;
  const T a = static_cast<T>(alpha);
  for (std::size_t i = 0; i < n; ++i) data[i] = activate(kind, a, data[i]);
}

template <typename T>
BasicTensor<T> conv_forward(const LayerSpec& spec, const LayerParams<T>& p, const BasicTensor<T>& x) {
  const std::size_t n = x.dim(0);
  const ConvGeometry g{x.dim(1), x.dim(2), x.dim(3), spec.padding == Padding::same ? 1u : 0u};
  const std::size_t cout = spec.units, k = g.patch_size(), pix = g.out_pixels();
  BasicTensor<T> y({n, cout, g.out_height(), g.out_width()});
  std::vector<T> cols(k * pix);
  for (std::size_t s = 0; s < n; ++s) {
    im2col_into(x.data() + s * g.channels * g.height * g.width, g, cols.data());
    T* out = y.data() + s * cout * pix;
    for (std::size_t co = 0; co < cout; ++co) std::fill(out + co * pix, out + (co + 1) * pix, p.bias[co]);
    gemm<T>(Trans::no, Trans::no, cout, pix, k, p.weight.data(), k, cols.data(), pix, T{1}, out, pix);
  }
  apply_activation_inplace(spec.activation, spec.alpha, y.data(), y.size());
  return y;
}

template <typename T>
BasicTensor<T> dense_forward(const LayerSpec& spec, const LayerParams<T>& p, const BasicTensor<T>& x) {
  const std::size_t n = x.dim(0), in = x.dim(1), out = spec.units;
  BasicTensor<T> y({n, out});
  for (std::size_t s = 0; s < n; ++s) std::copy(p.bias.data(), p.bias.data() + out, y.data() + s * out);
  gemm<T>(Trans::no, Trans::no, n, out, in, x.data(), in, p.weight.data(), out, T{1}, y.data(), out);
  apply_activation_inplace(spec.activation, spec.alpha, y.data(), y.size());
  return y;
}

}  // namespace detail

inline constexpr std::size_t kAllLayers = std::numeric_limits<std::size_t>::max();

// Runs the batch through layers [0, stop_after]. Train mode needs `rng`
// whenever the network has dropout; eval mode is deterministic.
template <typename T>
ForwardPass<T> forward(const Network<T>& net, const BasicTensor<T>& batch, Mode mode, Rng* rng = nullptr,
                       std::size_t stop_after = kAllLayers) {
  const Shape& in = net.input_shape();
  if (batch.rank() != in.size() + 1 || !std::equal(in.begin(), in.end(), batch.shape().begin() + 1))
    throw ShapeError("batch shape " + to_string(batch.shape()) + " does not match network input " +
                     to_string(in));
  const std::size_t n = batch.dim(0);
  const std::size_t last = std::min(stop_after, net.layer_count() == 0 ? 0 : net.layer_count() - 1);

  ForwardPass<T> fp;
  fp.mode = mode;
  fp.outputs.reserve(net.layer_count() + 1);
  fp.outputs.push_back(batch);
  fp.pool_argmax.resize(net.layer_count());
  fp.dropout_masks.resize(net.layer_count());

  for (std::size_t i = 0; i < net.layer_count() && i <= last; ++i) {
    const LayerSpec& spec = net.layer(i);
    const BasicTensor<T>& x = fp.outputs.back();
    BasicTensor<T> y;
    switch (spec.kind) {
      case LayerKind::conv3x3: y = detail::conv_forward(spec, net.params(i), x); break;
      case LayerKind::dense: y = detail::dense_forward(spec, net.params(i), x); break;
      case LayerKind::maxpool2x2: {
        auto r = maxpool2x2(x);
        y = std::move(r.output);
        fp.pool_argmax[i] = std::move(r.argmax);
        break;
      }
      case LayerKind::activation: y = activation_apply(spec.activation, spec.alpha, x); break;
      case LayerKind::flatten: y = x.reshaped({n, element_count(net.shape_trace()[i])}); break;
      case LayerKind::dropout: {
        auto r = dropout_forward(x, spec.dropout_rate, mode, rng);
        y = std::move(r.output);
        fp.dropout_masks[i] = std::move(r.mask);
        break;
      }
    }
    fp.outputs.push_back(std::move(y));
  }
  return fp;
}

enum class LossKind { binary_cross_entropy };

inline constexpr double kProbabilityClamp = 1e-7;

template <typename T>
struct BackwardResult {
  T loss = T{0};
  BasicTensor<T> input_grad;  // filled only when requested
};

// Mean binary cross-entropy of the single sigmoid output plus
// l2_lambda * sum of squared conv/dense weights (biases excluded). Gradients
// overwrite net's gradient buffers.
//
// Probabilities are clamped to [1e-7, 1 - 1e-7] inside the log. When the last
// layer ends in a sigmoid, the output gradient is taken through the logit
// (p - y) / N, so saturated wrong predictions still receive a gradient.
template <typename T>
BackwardResult<T> backward(Network<T>& net, const ForwardPass<T>& fp, const BasicTensor<T>& labels,
                           LossKind /*loss*/, T l2_lambda, bool want_input_grad = false) {
  if (fp.outputs.size() != net.layer_count() + 1)
    throw UsageError("backward needs a full forward pass over every layer");
  const BasicTensor<T>& prob = fp.probabilities();
  const std::size_t n = fp.input().dim(0);
  if (prob.size() != n) throw UsageError("binary cross-entropy needs exactly one output per sample");
  if (labels.size() != n)
    throw ShapeError("labels have " + std::to_string(labels.size()) + " entries for a batch of " +
                     std::to_string(n));
  for (T y : labels.values())
    if (!(y >= T{0} && y <= T{1})) throw ValidationError("labels must lie in [0, 1]");

  net.zero_grads();
  BackwardResult<T> result;

  const T lo = static_cast<T>(kProbabilityClamp), hi = T{1} - lo;
  const T inv_n = T{1} / static_cast<T>(n);
  T loss = T{0};
  BasicTensor<T> grad(prob.shape());
  const LayerSpec& tail = net.layer(net.layer_count() - 1);
  const bool sigmoid_tail = tail.activation == ActivationKind::sigmoid;
  for (std::size_t s = 0; s < n; ++s) {
    const T p = prob[s], y = labels[s];
    const T pc = std::clamp(p, lo, hi);
    loss -= y * std::log(pc) + (T{1} - y) * std::log(T{1} - pc);
    if (sigmoid_tail) {
      grad[s] = (p - y) * inv_n;  // already w.r.t. the pre-sigmoid value
    } else {
      grad[s] = (p < lo || p > hi) ? T{0} : (-y / pc + (T{1} - y) / (T{1} - pc)) * inv_n;
    }
  }
  loss *= inv_n;

  for (std::size_t li = net.layer_count(); li-- > 0;) {
    const LayerSpec& spec = net.layer(li);
    const BasicTensor<T>& x = fp.outputs[li];
    const BasicTensor<T>& y = fp.outputs[li + 1];
    const bool need_input_grad = li > 0 || want_input_grad;
    const bool skip_activation = sigmoid_tail && li == net.layer_count() - 1;

    if ((spec.has_params() || spec.kind == LayerKind::activation) && !skip_activation &&
        spec.activation != ActivationKind::identity) {
      const T a = static_cast<T>(spec.alpha);
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= activation_derivative(spec.activation, a, y[i]);
    }

    switch (spec.kind) {
      case LayerKind::conv3x3: {
        const ConvGeometry g{x.dim(1), x.dim(2), x.dim(3), spec.padding == Padding::same ? 1u : 0u};
        const std::size_t cout = spec.units, k = g.patch_size(), pix = g.out_pixels();
        const std::size_t in_size = g.channels * g.height * g.width;
        LayerParams<T>& gp = net.grads(li);
        const LayerParams<T>& p = net.params(li);
        BasicTensor<T> dx;
        if (need_input_grad) dx = BasicTensor<T>(x.shape());
        std::vector<T> cols(k * pix);
        for (std::size_t s = 0; s < n; ++s) {
          const T* dz = grad.data() + s * cout * pix;
          im2col_into(x.data() + s * in_size, g, cols.data());
          gemm<T>(Trans::no, Trans::yes, cout, k, pix, dz, pix, cols.data(), pix, T{1}, gp.weight.data(), k);
          for (std::size_t co = 0; co < cout; ++co) {
            T acc = T{0};
            for (std::size_t j = 0; j < pix; ++j) acc += dz[co * pix + j];
            gp.bias[co] += acc;
          }
          if (need_input_grad) {
            gemm<T>(Trans::yes, Trans::no, k, pix, cout, p.weight.data(), k, dz, pix, T{0}, cols.data(), pix);
            col2im_add(cols.data(), g, dx.data() + s * in_size);
          }
        }
        grad = std::move(dx);
        break;
      }
      case LayerKind::dense: {
        const std::size_t in = x.dim(1), out = spec.units;
        LayerParams<T>& gp = net.grads(li);
        gemm<T>(Trans::yes, Trans::no, in, out, n, x.data(), in, grad.data(), out, T{0}, gp.weight.data(), out);
        for (std::size_t s = 0; s < n; ++s)
          for (std::size_t j = 0; j < out; ++j) gp.bias[j] += grad[s * out + j];
        BasicTensor<T> dx;
        if (need_input_grad) {
          dx = BasicTensor<T>(x.shape());
          gemm<T>(Trans::no, Trans::yes, n, in, out, grad.data(), out, net.params(li).weight.data(), out, T{0},
                  dx.data(), in);
        }
        grad = std::move(dx);
        break;
      }
      case LayerKind::maxpool2x2: {
        BasicTensor<T> dx(x.shape());
        const auto& argmax = fp.pool_argmax[li];
        for (std::size_t o = 0; o < argmax.size(); ++o) dx[argmax[o]] += grad[o];
        grad = std::move(dx);
        break;
      }
      case LayerKind::flatten: grad = grad.reshaped(x.shape()); break;
      case LayerKind::dropout: {
        const BasicTensor<T>& mask = fp.dropout_masks[li];
        if (!mask.empty())
          for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= mask[i];
        break;
      }
      case LayerKind::activation: break;
    }
  }
  if (want_input_grad) result.input_grad = std::move(grad);

  for (std::size_t li = 0; li < net.layer_count(); ++li) {
    if (!net.layer(li).has_params()) continue;
    const BasicTensor<T>& w = net.params(li).weight;
    BasicTensor<T>& gw = net.grads(li).weight;
    T sq = T{0};
    for (std::size_t i = 0; i < w.size(); ++i) {
      sq += w[i] * w[i];
      gw[i] += T{2} * l2_lambda * w[i];
    }
    loss += l2_lambda * sq;
  }
  result.loss = loss;
  return result;
}

// ---------------------------------------------------------------------------
// Builders

enum class DropoutVariant { none, fc, full };  // none, DO, FDO

struct DamageNetOptions {
  ActivationKind activation = ActivationKind::relu;  // relu or leaky_relu
  double leaky_alpha = 0.1;
  DropoutVariant dropout = DropoutVariant::fc;
  Shape input_shape = {3, 150, 150};
};

inline double alpha_for(const DamageNetOptions& o) {
  return o.activation == ActivationKind::leaky_relu ? o.leaky_alpha : 0.0;
}

// Four conv+pool stages (32, 64, 128, 128 filters), flatten, 50% dropout,
// dense-512 and a single sigmoid output.
inline std::vector<LayerSpec> damage_net_layers(const DamageNetOptions& o = {}) {
  const double a = alpha_for(o);
  std::vector<LayerSpec> layers;
  for (std::size_t channels : {32u, 64u, 128u, 128u}) {
    layers.push_back(LayerSpec::conv(channels, o.activation, a));
    layers.push_back(LayerSpec::maxpool());
    if (o.dropout == DropoutVariant::full) layers.push_back(LayerSpec::dropout(0.25));
  }
  layers.push_back(LayerSpec::flatten());
  if (o.dropout != DropoutVariant::none) layers.push_back(LayerSpec::dropout(0.5));
  layers.push_back(LayerSpec::dense(512, o.activation, a));
  layers.push_back(LayerSpec::dense(1, ActivationKind::sigmoid));
  return layers;
}

template <typename T = float>
Network<T> build_damage_net(const DamageNetOptions& o = {}) {
  return Network<T>(o.input_shape, damage_net_layers(o));
}

// VGG-16 layout: 2-2-3-3-3 blocks of same-padded 3x3 convs with 64, 128, 256,
// 512, 512 filters, a 2x2 pool after each block, then the dense-512 /
// dense-1 head. Weights start random; there is no pretrained loading.
template <typename T = float>
Network<T> build_vgg16_shaped(const Shape& input_shape, const DamageNetOptions& o = {}) {
  if (input_shape.size() != 3) throw ShapeError("VGG-16 builder needs a CxHxW input shape");
  if (input_shape[1] < 32 || input_shape[2] < 32)
    throw ShapeError("input " + to_string(input_shape) + " does not survive five 2x2 pooling stages");
  const double a = alpha_for(o);
  std::vector<LayerSpec> layers;
  const std::pair<std::size_t, std::size_t> blocks[] = {{2, 64}, {2, 128}, {3, 256}, {3, 512}, {3, 512}};
  for (auto [convs, channels] : blocks) {
    for (std::size_t i = 0; i < convs; ++i) layers.push_back(LayerSpec::conv(channels, o.activation, a, Padding::same));
    layers.push_back(LayerSpec::maxpool());
    if (o.dropout == DropoutVariant::full) layers.push_back(LayerSpec::dropout(0.25));
  }
  layers.push_back(LayerSpec::flatten());
  if (o.dropout != DropoutVariant::none) layers.push_back(LayerSpec::dropout(0.5));
  layers.push_back(LayerSpec::dense(512, o.activation, a));
  layers.push_back(LayerSpec::dense(1, ActivationKind::sigmoid));
  return Network<T>(input_shape, std::move(layers));
}

// Index of the flatten layer; features are taken at its output.
template <typename T>
std::size_t flatten_index(const Network<T>& net) {
  for (std::size_t i = 0; i < net.layer_count(); ++i)
    if (net.layer(i).kind == LayerKind::flatten) return i;
  throw UsageError("network has no flatten layer to extract features from");
}

// Eval-mode output of the flatten layer (conv stack features, pre-dropout).
template <typename T>
BasicTensor<T> extract_features(const Network<T>& net, const BasicTensor<T>& batch) {
  const std::size_t idx = flatten_index(net);
  auto fp = forward(net, batch, Mode::eval, nullptr, idx);
  return std::move(fp.outputs.back());
}

struct DeadFilterReport {
  std::size_t dead = 0;
  std::size_t total = 0;
  double fraction = 0.0;
};

// A filter is dead when its whole activation map is exactly zero for every
// sample of the batch. `layer_index` must name a conv layer, or an activation
// layer fed by one.
template <typename T>
DeadFilterReport dead_filter_report(const Network<T>& net, const ForwardPass<T>& fp, std::size_t layer_index) {
  if (layer_index >= net.layer_count() || layer_index + 1 >= fp.outputs.size())
    throw UsageError("layer " + std::to_string(layer_index) + " has no recorded activations");
  const LayerKind kind = net.layer(layer_index).kind;
  const bool conv_like = kind == LayerKind::conv3x3 ||
                         (kind == LayerKind::activation && layer_index > 0 &&
                          net.layer(layer_index - 1).kind == LayerKind::conv3x3);
  if (!conv_like) throw UsageError("dead-filter report needs a convolutional activation layer");
  const BasicTensor<T>& a = fp.layer_output(layer_index);
  const std::size_t n = a.dim(0), c = a.dim(1), plane = a.dim(2) * a.dim(3);
  DeadFilterReport r;
  r.total = c;
  for (std::size_t f = 0; f < c; ++f) {
    bool dead = true;
    for (std::size_t s = 0; s < n && dead; ++s) {
      const T* p = a.data() + (s * c + f) * plane;
      for (std::size_t j = 0; j < plane; ++j)
        if (p[j] != T{0}) {
          dead = false;
          break;
        }
    }
    r.dead += dead ? 1 : 0;
  }
  r.fraction = static_cast<double>(r.dead) / static_cast<double>(r.total);
  return r;
}

}  // namespace stormchip
