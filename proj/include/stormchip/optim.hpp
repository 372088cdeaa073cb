#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "stormchip/errors.hpp"
#include "stormchip/network.hpp"
#include "stormchip/rng.hpp"
#include "stormchip/tensor.hpp"

namespace stormchip {

// Glorot-uniform draw from [-L, L], L = sqrt(6 / (fan_in + fan_out)).
template <typename T = float>
BasicTensor<T> xavier_init(const Shape& shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  if (fan_in == 0 || fan_out == 0) throw ValidationError("xavier_init fans must be >= 1");
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  BasicTensor<T> t(shape);
  for (T& v : t.values()) v = static_cast<T>(rng.uniform(-limit, limit));
  return t;
}

// Xavier weights for every conv/dense layer, zero biases. Conv fans count the
// 3x3 receptive field: fan_in = Cin*9, fan_out = Cout*9.
template <typename T>
void initialize_xavier(Network<T>& net, Rng& rng) {
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    const LayerSpec& spec = net.layer(i);
    if (!spec.has_params()) continue;
    LayerParams<T>& p = net.params(i);
    std::size_t fan_in = 0, fan_out = 0;
    if (spec.kind == LayerKind::conv3x3) {
      fan_in = p.weight.dim(1);
      fan_out = spec.units * kKernel * kKernel;
    } else {
      fan_in = p.weight.dim(0);
      fan_out = p.weight.dim(1);
    }
    p.weight = xavier_init<T>(p.weight.shape(), fan_in, fan_out, rng);
    p.bias.fill(T{0});
  }
}

enum class OptimizerKind { rmsprop, adam };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(std::string_view text);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-4;
  double rmsprop_decay = 0.9;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double epsilon = 1e-8;
  double l2_lambda = 1e-6;

  static OptimizerConfig rmsprop() {
    OptimizerConfig c;
    c.kind = OptimizerKind::rmsprop;
    c.epsilon = 1e-7;
    return c;
  }
  static OptimizerConfig adam() { return {}; }

  void validate() const {
    if (!(learning_rate >= 0.0)) throw ValidationError("learning_rate must be >= 0");
    auto unit = [](double v, const char* name) {
      if (!(v > 0.0 && v < 1.0)) throw ValidationError(std::string(name) + " must lie in (0, 1)");
    };
    unit(rmsprop_decay, "rmsprop_decay");
    unit(adam_beta1, "adam_beta1");
    unit(adam_beta2, "adam_beta2");
    if (!(epsilon > 0.0)) throw ValidationError("epsilon must be > 0");
    if (!(l2_lambda >= 0.0)) throw ValidationError("l2_lambda must be >= 0");
  }
};

// Moment buffers for one parameter tensor. RMSprop uses `second` only.
template <typename T>
struct ParamState {
  BasicTensor<T> first;
  BasicTensor<T> second;
  std::int64_t step_count = 0;
};

namespace detail {
template <typename T>
void ensure_state(const BasicTensor<T>& param, const BasicTensor<T>& grad, ParamState<T>& state) {
  if (param.shape() != grad.shape())
    throw ShapeError("gradient shape " + to_string(grad.shape()) + " differs from parameter " +
                     to_string(param.shape()));
  if (state.second.empty()) {
    state.first = BasicTensor<T>(param.shape());
    state.second = BasicTensor<T>(param.shape());
  }
}
}  // namespace detail

// v <- rho v + (1 - rho) g^2;  theta <- theta - lr g / (sqrt(v) + eps)
template <typename T>
void rmsprop_step(BasicTensor<T>& param, const BasicTensor<T>& grad, ParamState<T>& state,
                  const OptimizerConfig& cfg) {
  detail::ensure_state(param, grad, state);
  const T rho = static_cast<T>(cfg.rmsprop_decay), lr = static_cast<T>(cfg.learning_rate),
          eps = static_cast<T>(cfg.epsilon);
  T* v = state.second.data();
  for (std::size_t i = 0; i < param.size(); ++i) {
    const T g = grad[i];
    v[i] = rho * v[i] + (T{1} - rho) * g * g;
    param[i] -= lr * g / (std::sqrt(v[i]) + eps);
  }
  ++state.step_count;
}

// Bias-corrected Adam with epsilon added to sqrt(v_hat).
template <typename T>
void adam_step(BasicTensor<T>& param, const BasicTensor<T>& grad, ParamState<T>& state,
               const OptimizerConfig& cfg) {
  detail::ensure_state(param, grad, state);
  ++state.step_count;
  const T b1 = static_cast<T>(cfg.adam_beta1), b2 = static_cast<T>(cfg.adam_beta2),
          lr = static_cast<T>(cfg.learning_rate), eps = static_cast<T>(cfg.epsilon);
  const double t = static_cast<double>(state.step_count);
  const T c1 = static_cast<T>(1.0 - std::pow(cfg.adam_beta1, t));
  const T c2 = static_cast<T>(1.0 - std::pow(cfg.adam_beta2, t));
  T* m = state.first.data();
  T* v = state.second.data();
  for (std::size_t i = 0; i < param.size(); ++i) {
    const T g = grad[i];
    m[i] = b1 * m[i] + (T{1} - b1) * g;
    v[i] = b2 * v[i] + (T{1} - b2) * g * g;
    const T m_hat = m[i] / c1;
    const T v_hat = v[i] / c2;
    param[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

// Applies the configured rule to every parameter of a network using the
// gradients left in it by backward().
template <typename T>
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) { cfg_.validate(); }

  const OptimizerConfig& config() const noexcept { return cfg_; }
  const std::vector<ParamState<T>>& states() const noexcept { return states_; }

  void step(Network<T>& net) {
    auto params = net.parameter_tensors();
    auto grads = net.gradient_tensors();
    if (states_.empty()) states_.resize(params.size());
    if (states_.size() != params.size()) throw UsageError("optimizer bound to a different network");
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (cfg_.kind == OptimizerKind::adam)
        adam_step(*params[i], *grads[i], states_[i], cfg_);
      else
        rmsprop_step(*params[i], *grads[i], states_[i], cfg_);
    }
  }

 private:
  OptimizerConfig cfg_;
  std::vector<ParamState<T>> states_;
};

}  // namespace stormchip
