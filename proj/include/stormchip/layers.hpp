#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>

#include "stormchip/errors.hpp"
#include "stormchip/tensor.hpp"

namespace stormchip {

enum class LayerKind { conv3x3, maxpool2x2, activation, flatten, dropout, dense };
enum class ActivationKind { identity, relu, leaky_relu, sigmoid };
enum class Padding { valid, same };
enum class Mode { train, eval };

std::string_view to_string(LayerKind kind);
std::string_view to_string(ActivationKind kind);
std::string_view to_string(Padding padding);
LayerKind parse_layer_kind(std::string_view text);
ActivationKind parse_activation_kind(std::string_view text);
Padding parse_padding(std::string_view text);

// One entry of a network's layer list. Convolution and dense layers carry an
// optional fused activation so that each entry lines up with one row of an
// architecture table; a standalone `activation` layer is also available.
struct LayerSpec {
  LayerKind kind = LayerKind::flatten;
  std::size_t units = 0;  // conv output channels or dense output units
  ActivationKind activation = ActivationKind::identity;
  double alpha = 0.0;  // leaky slope, only meaningful for leaky_relu
  double dropout_rate = 0.0;
  Padding padding = Padding::valid;

  static LayerSpec conv(std::size_t channels, ActivationKind act = ActivationKind::relu,
                        double alpha = 0.0, Padding padding = Padding::valid) {
    return {LayerKind::conv3x3, channels, act, alpha, 0.0, padding};
  }
  static LayerSpec maxpool() { return {LayerKind::maxpool2x2}; }
  static LayerSpec act(ActivationKind act, double alpha = 0.0) {
    return {LayerKind::activation, 0, act, alpha};
  }
  static LayerSpec flatten() { return {LayerKind::flatten}; }
  static LayerSpec dropout(double rate) { return {LayerKind::dropout, 0, {}, 0.0, rate}; }
  static LayerSpec dense(std::size_t units, ActivationKind act = ActivationKind::identity,
                         double alpha = 0.0) {
    return {LayerKind::dense, units, act, alpha};
  }

  bool has_params() const { return kind == LayerKind::conv3x3 || kind == LayerKind::dense; }

  void validate() const {
    if (has_params() && units == 0) throw ValidationError("conv/dense layer needs units >= 1");
    if (activation == ActivationKind::leaky_relu) {
      if (!(alpha > 0.0 && alpha < 1.0))
        throw ValidationError("leaky_relu alpha must lie in (0, 1), got " + std::to_string(alpha));
    } else if (alpha != 0.0) {
      throw ValidationError("alpha is only allowed with leaky_relu");
    }
    if (kind == LayerKind::activation && activation == ActivationKind::identity)
      throw ValidationError("activation layer needs relu, leaky_relu or sigmoid");
    if (kind != LayerKind::activation && !has_params() && activation != ActivationKind::identity)
      throw ValidationError("only conv, dense and activation layers take an activation");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
      throw ValidationError("dropout rate must lie in [0, 1), got " + std::to_string(dropout_rate));
    if (kind != LayerKind::dropout && dropout_rate != 0.0)
      throw ValidationError("dropout_rate is only allowed on dropout layers");
    if (padding == Padding::same && kind != LayerKind::conv3x3)
      throw ValidationError("padding is only meaningful for conv layers");
  }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

template <typename T>
T sigmoid(T x) {
  if (x >= T{0}) return T{1} / (T{1} + std::exp(-x));
  const T e = std::exp(x);
  return e / (T{1} + e);
}

template <typename T>
T activate(ActivationKind kind, T alpha, T x) {
  switch (kind) {
    case ActivationKind::relu: return x > T{0} ? x : T{0};
    case ActivationKind::leaky_relu: return x > T{0} ? x : alpha * x;
    case ActivationKind::sigmoid: return sigmoid(x);
    case ActivationKind::identity: break;
  }
  return x;
}

// Derivative expressed through the activation's output y. This works for all
// supported kinds because relu/leaky outputs are positive iff inputs are.
template <typename T>
T activation_derivative(ActivationKind kind, T alpha, T y) {
  switch (kind) {
    case ActivationKind::relu: return y > T{0} ? T{1} : T{0};
    case ActivationKind::leaky_relu: return y > T{0} ? T{1} : alpha;
    case ActivationKind::sigmoid: return y * (T{1} - y);
    case ActivationKind::identity: break;
  }
  return T{1};
}

template <typename T>
BasicTensor<T> activation_apply(ActivationKind kind, double alpha, const BasicTensor<T>& x) {
  if (kind == ActivationKind::leaky_relu && !(alpha > 0.0 && alpha < 1.0))
    throw ValidationError("leaky_relu alpha must lie in (0, 1)");
  BasicTensor<T> y = x;
  const T a = static_cast<T>(alpha);
  for (T& v : y.values()) v = activate(kind, a, v);
  return y;
}

}  // namespace stormchip
