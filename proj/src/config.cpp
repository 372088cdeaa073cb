#include "stormchip/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "stormchip/errors.hpp"
#include "stormchip/text.hpp"

namespace stormchip {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::cnn: return "cnn";
    case ModelKind::lr: return "lr";
    case ModelKind::vgg16: return "vgg16";
  }
  return "cnn";
}

namespace {

struct Field {
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

bool parse_bool(std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ValidationError("expected a boolean, got '" + std::string(v) + "'");
}

template <typename Member>
Field number(Member member) {
  return {[member](RunConfig& c, std::string_view v) {
            auto& field = std::invoke(member, c);
            using V = std::remove_reference_t<decltype(field)>;
            if constexpr (std::is_floating_point_v<V>) field = text::parse_double(v, "value");
            else field = text::parse_int<V>(v, "value");
          },
          [member](const RunConfig& c) {
            const auto& field = std::invoke(member, c);
            using V = std::remove_cvref_t<decltype(field)>;
            if constexpr (std::is_floating_point_v<V>) return text::format_double(field);
            else return std::to_string(field);
          }};
}

template <typename Member>
Field flag(Member member) {
  return {[member](RunConfig& c, std::string_view v) { std::invoke(member, c) = parse_bool(v); },
          [member](const RunConfig& c) { return std::string(std::invoke(member, c) ? "true" : "false"); }};
}

// Accessors for nested members, usable with number()/flag().
#define STORMCHIP_FIELD(path) [](auto& c) -> auto& { return c.path; }

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"batch_size", number(STORMCHIP_FIELD(train.batch_size))},
      {"epochs", number(STORMCHIP_FIELD(train.epochs))},
      {"seed", number(STORMCHIP_FIELD(train.seed))},
      {"threshold", number(STORMCHIP_FIELD(train.threshold))},
      {"optimizer",
       {[](RunConfig& c, std::string_view v) {
          const double lr = c.train.optimizer.learning_rate, l2 = c.train.optimizer.l2_lambda;
          c.train.optimizer = parse_optimizer_kind(v) == OptimizerKind::adam ? OptimizerConfig::adam()
                                                                             : OptimizerConfig::rmsprop();
          c.train.optimizer.learning_rate = lr;
          c.train.optimizer.l2_lambda = l2;
        },
        [](const RunConfig& c) { return std::string(to_string(c.train.optimizer.kind)); }}},
      {"learning_rate", number(STORMCHIP_FIELD(train.optimizer.learning_rate))},
      {"rmsprop_decay", number(STORMCHIP_FIELD(train.optimizer.rmsprop_decay))},
      {"adam_beta1", number(STORMCHIP_FIELD(train.optimizer.adam_beta1))},
      {"adam_beta2", number(STORMCHIP_FIELD(train.optimizer.adam_beta2))},
      {"epsilon", number(STORMCHIP_FIELD(train.optimizer.epsilon))},
      {"l2_lambda", number(STORMCHIP_FIELD(train.optimizer.l2_lambda))},
      {"dropout",
       {[](RunConfig& c, std::string_view v) {
          if (v == "none") c.train.dropout_variant = DropoutVariant::none;
          else if (v == "do") c.train.dropout_variant = DropoutVariant::fc;
          else if (v == "fdo") c.train.dropout_variant = DropoutVariant::full;
          else throw ValidationError("dropout must be none, do or fdo");
        },
        [](const RunConfig& c) {
          switch (c.train.dropout_variant) {
            case DropoutVariant::none: return std::string("none");
            case DropoutVariant::fc: return std::string("do");
            case DropoutVariant::full: return std::string("fdo");
          }
          return std::string("do");
        }}},
      {"activation",
       {[](RunConfig& c, std::string_view v) {
          if (v == "relu") c.train.activation_variant = ActivationKind::relu;
          else if (v == "leaky") c.train.activation_variant = ActivationKind::leaky_relu;
          else throw ValidationError("activation must be relu or leaky");
        },
        [](const RunConfig& c) {
          return std::string(c.train.activation_variant == ActivationKind::leaky_relu ? "leaky" : "relu");
        }}},
      {"leaky_alpha", number(STORMCHIP_FIELD(leaky_alpha))},
      {"model",
       {[](RunConfig& c, std::string_view v) {
          if (v == "cnn") c.model = ModelKind::cnn;
          else if (v == "lr") c.model = ModelKind::lr;
          else if (v == "vgg16") c.model = ModelKind::vgg16;
          else throw ValidationError("model must be cnn, lr or vgg16");
        },
        [](const RunConfig& c) { return std::string(to_string(c.model)); }}},
      {"window_px", number(STORMCHIP_FIELD(window_px))},
      {"input_size", number(STORMCHIP_FIELD(input_size))},
      {"augment.enabled", flag(STORMCHIP_FIELD(train.augmentation.enabled))},
      {"augment.rotation_deg_max", number(STORMCHIP_FIELD(train.augmentation.rotation_deg_max))},
      {"augment.horizontal_flip", flag(STORMCHIP_FIELD(train.augmentation.horizontal_flip))},
      {"augment.shift_frac_max", number(STORMCHIP_FIELD(train.augmentation.shift_frac_max))},
      {"augment.shear_frac_max", number(STORMCHIP_FIELD(train.augmentation.shear_frac_max))},
      {"augment.zoom_frac_max", number(STORMCHIP_FIELD(train.augmentation.zoom_frac_max))},
      {"split.train_per_class", number(STORMCHIP_FIELD(split.train_per_class))},
      {"split.val_per_class", number(STORMCHIP_FIELD(split.val_per_class))},
      {"split.test_balanced_per_class", number(STORMCHIP_FIELD(split.test_balanced_per_class))},
      {"split.unbalanced_negatives", number(STORMCHIP_FIELD(split.unbalanced_negatives))},
      {"split.unbalanced_ratio", number(STORMCHIP_FIELD(split.unbalanced_ratio))},
      {"split.seed", number(STORMCHIP_FIELD(split.seed))},
      {"quality.black_pixel", number(STORMCHIP_FIELD(quality.black_pixel))},
      {"quality.totally_black", number(STORMCHIP_FIELD(quality.totally_black))},
      {"quality.max_black_fraction", number(STORMCHIP_FIELD(quality.max_black_fraction))},
      {"quality.cloud_luma", number(STORMCHIP_FIELD(quality.cloud_luma))},
      {"quality.cloud_saturation", number(STORMCHIP_FIELD(quality.cloud_saturation))},
      {"quality.max_cloud_score", number(STORMCHIP_FIELD(quality.max_cloud_score))},
  };
  return table;
}

#undef STORMCHIP_FIELD

}  // namespace

RunConfig::RunConfig() { train.optimizer = OptimizerConfig::adam(); }

void RunConfig::set(std::string_view key, std::string_view value) {
  const auto& table = fields();
  const auto it = table.find(std::string(text::trim(key)));
  if (it == table.end()) throw ConfigError("unknown config key '" + std::string(text::trim(key)) + "'");
  try {
    it->second.set(*this, text::trim(value));
  } catch (const ValidationError& e) {
    throw ConfigError("config key '" + it->first + "': " + e.what());
  }
}

void RunConfig::apply_text(std::string_view body, std::string_view origin) {
  std::istringstream in{std::string(body)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view v = line;
    if (const auto hash = v.find('#'); hash != std::string_view::npos) v = v.substr(0, hash);
    v = text::trim(v);
    if (v.empty()) continue;
    const auto eq = v.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(std::string(origin) + ":" + std::to_string(lineno) + ": expected key=value");
    try {
      set(v.substr(0, eq), v.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(origin) + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void RunConfig::apply_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  apply_text(ss.str(), path.string());
}

void RunConfig::validate() const {
  try {
    train.validate();
    split.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  if (window_px == 0) throw ConfigError("window_px must be >= 1");
  if (input_size < 32) throw ConfigError("input_size must be >= 32");
  if (!(leaky_alpha > 0.0 && leaky_alpha < 1.0)) throw ConfigError("leaky_alpha must lie in (0, 1)");
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + "=" + field.get(*this) + "\n";
  return out;
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> v;
    for (const auto& [key, field] : fields()) v.push_back(key);
    return v;
  }();
  return k;
}

}  // namespace stormchip
