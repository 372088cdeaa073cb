#include "stormchip/layers.hpp"

#include <string>

namespace stormchip {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv3x3: return "conv3x3";
    case LayerKind::maxpool2x2: return "maxpool2x2";
    case LayerKind::activation: return "activation";
    case LayerKind::flatten: return "flatten";
    case LayerKind::dropout: return "dropout";
    case LayerKind::dense: return "dense";
  }
  return "?";
}

std::string_view to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::identity: return "identity";
    case ActivationKind::relu: return "relu";
    case ActivationKind::leaky_relu: return "leaky_relu";
    case ActivationKind::sigmoid: return "sigmoid";
  }
  return "?";
}

std::string_view to_string(Padding padding) {
  return padding == Padding::same ? "same" : "valid";
}

LayerKind parse_layer_kind(std::string_view text) {
  for (auto k : {LayerKind::conv3x3, LayerKind::maxpool2x2, LayerKind::activation,
                 LayerKind::flatten, LayerKind::dropout, LayerKind::dense})
    if (to_string(k) == text) return k;
  throw ValidationError("unknown layer kind '" + std::string(text) + "'");
}

ActivationKind parse_activation_kind(std::string_view text) {
  for (auto k : {ActivationKind::identity, ActivationKind::relu, ActivationKind::leaky_relu,
                 ActivationKind::sigmoid})
    if (to_string(k) == text) return k;
  throw ValidationError("unknown activation '" + std::string(text) + "'");
}

Padding parse_padding(std::string_view text) {
  if (text == "valid") return Padding::valid;
  if (text == "same") return Padding::same;
  throw ValidationError("unknown padding '" + std::string(text) + "'");
}

}  // namespace stormchip
