#include "stormchip/optim.hpp"

namespace stormchip {

std::string_view to_string(OptimizerKind kind) { return kind == OptimizerKind::adam ? "adam" : "rmsprop"; }

OptimizerKind parse_optimizer_kind(std::string_view text) {
  if (text == "adam") return OptimizerKind::adam;
  if (text == "rmsprop") return OptimizerKind::rmsprop;
  throw ValidationError("optimizer must be adam or rmsprop, got '" + std::string(text) + "'");
}

}  // namespace stormchip
