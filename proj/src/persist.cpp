#include "stormchip/persist.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "stormchip/errors.hpp"
#include "stormchip/text.hpp"

namespace stormchip {

namespace fs = std::filesystem;

namespace {

std::ofstream open_for_write(const fs::path& path, const char* what) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) throw DataError(std::string("cannot write ") + what + " " + path.string() + ": " + ec.message());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(std::string("cannot write ") + what + " " + path.string());
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw DataError("I/O failure writing " + path.string());
}

std::string layer_line(const LayerSpec& s) {
  std::ostringstream os;
  os << to_string(s.kind) << " units=" << s.units << " activation=" << to_string(s.activation)
     << " alpha=" << text::format_double(s.alpha) << " rate=" << text::format_double(s.dropout_rate)
     << " padding=" << to_string(s.padding);
  return os.str();
}

LayerSpec parse_layer_line(std::string_view line) {
  const auto parts = text::split(line, ' ');
  LayerSpec s;
  s.kind = parse_layer_kind(parts.at(0));
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const auto eq = parts[i].find('=');
    if (eq == std::string::npos) throw ValidationError("malformed layer field '" + parts[i] + "'");
    const std::string key = parts[i].substr(0, eq), value = parts[i].substr(eq + 1);
    if (key == "units") s.units = text::parse_int<std::size_t>(value, "units");
    else if (key == "activation") s.activation = parse_activation_kind(value);
    else if (key == "alpha") s.alpha = text::parse_double(value, "alpha");
    else if (key == "rate") s.dropout_rate = text::parse_double(value, "rate");
    else if (key == "padding") s.padding = parse_padding(value);
    else throw ValidationError("unknown layer field '" + key + "'");
  }
  return s;
}

}  // namespace

std::string serialize_checkpoint(const Network<float>& net) {
  std::ostringstream header;
  header << kCheckpointMagic << '\n' << "version " << kCheckpointVersion << '\n' << "input";
  for (std::size_t e : net.input_shape()) header << ' ' << e;
  header << '\n' << "layers " << net.layer_count() << '\n';
  for (const LayerSpec& s : net.layers()) header << layer_line(s) << '\n';
  header << "params " << net.total_param_count() << '\n' << "end\n";

  std::string bytes = header.str();
  const std::size_t offset = bytes.size();
  bytes.resize(offset + 4 * net.total_param_count());
  std::size_t pos = offset;
  for (const Tensor* t : net.parameter_tensors())
    for (float v : t->values()) {
      const auto bits = std::bit_cast<std::uint32_t>(v);
      for (int b = 0; b < 4; ++b) bytes[pos++] = static_cast<char>((bits >> (8 * b)) & 0xFFu);
    }
  return bytes;
}

Network<float> parse_checkpoint(std::string_view bytes, const std::string& origin) {
  if (bytes.size() < kCheckpointMagic.size() + 1 || bytes.substr(0, kCheckpointMagic.size()) != kCheckpointMagic ||
      bytes[kCheckpointMagic.size()] != '\n')
    throw CorruptionError(origin + ": bad magic, not a stormchip checkpoint");

  std::size_t pos = kCheckpointMagic.size() + 1;
  auto next_line = [&]() -> std::string_view {
    const std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) throw CorruptionError(origin + ": truncated header");
    std::string_view line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };
  auto expect_key = [&](std::string_view line, std::string_view key) {
    if (line.substr(0, key.size() + 1) != std::string(key) + " ")
      throw CorruptionError(origin + ": expected '" + std::string(key) + "' header line");
    return line.substr(key.size() + 1);
  };

  try {
    const int version = text::parse_int<int>(expect_key(next_line(), "version"), "version");
    if (version != kCheckpointVersion)
      throw CorruptionError(origin + ": unsupported checkpoint version " + std::to_string(version) +
                            " (expected " + std::to_string(kCheckpointVersion) + ")");
    Shape input;
    for (const auto& part : text::split(expect_key(next_line(), "input"), ' '))
      input.push_back(text::parse_int<std::size_t>(part, "input extent"));
    const auto n_layers = text::parse_int<std::size_t>(expect_key(next_line(), "layers"), "layer count");
    std::vector<LayerSpec> layers;
    for (std::size_t i = 0; i < n_layers; ++i) layers.push_back(parse_layer_line(next_line()));
    const auto n_params = text::parse_int<std::size_t>(expect_key(next_line(), "params"), "parameter count");
    if (next_line() != "end") throw CorruptionError(origin + ": missing 'end' header line");

    Network<float> net(input, std::move(layers));
    if (net.total_param_count() != n_params)
      throw CorruptionError(origin + ": header declares " + std::to_string(n_params) +
                            " parameters but the architecture has " + std::to_string(net.total_param_count()));
    const std::size_t expected = 4 * n_params, actual = bytes.size() - pos;
    if (actual != expected)
      throw CorruptionError(origin + ": expected " + std::to_string(expected) + " bytes of parameter data, found " +
                            std::to_string(actual));
    for (Tensor* t : net.parameter_tensors())
      for (float& v : t->values()) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos++])) << (8 * b);
        v = std::bit_cast<float>(bits);
      }
    return net;
  } catch (const ValidationError& e) {
    throw CorruptionError(origin + ": " + e.what());
  } catch (const ShapeError& e) {
    throw CorruptionError(origin + ": " + e.what());
  }
}

void save_checkpoint(const Network<float>& net, const fs::path& path) {
  auto out = open_for_write(path, "checkpoint");
  const std::string bytes = serialize_checkpoint(net);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  finish(out, path);
}

Network<float> load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str(), path.string());
}

void write_history_csv(const fs::path& path, const EpochHistory& history) {
  auto out = open_for_write(path, "history");
  out << "epoch,train_loss,train_acc,val_loss,val_acc\n";
  for (const EpochRecord& r : history)
    out << r.epoch << ',' << text::format_double(r.train_loss) << ',' << text::format_double(r.train_accuracy) << ','
        << text::format_double(r.val_loss) << ',' << text::format_double(r.val_accuracy) << '\n';
  finish(out, path);
}

void write_roc_csv(const fs::path& path, std::span<const RocPoint> points) {
  auto out = open_for_write(path, "ROC curve");
  out << "fpr,tpr\n";
  for (const RocPoint& p : points) out << text::format_double(p.fpr) << ',' << text::format_double(p.tpr) << '\n';
  finish(out, path);
}

void write_report(const fs::path& path, const EvalReport& r,
                  const std::vector<std::pair<std::string, std::string>>& extra) {
  auto out = open_for_write(path, "report");
  out << "n_pos=" << r.n_pos << '\n'
      << "n_neg=" << r.n_neg << '\n'
      << "threshold=" << text::format_double(r.threshold) << '\n'
      << "accuracy=" << text::format_double(r.accuracy) << '\n'
      << "tp=" << r.tp << '\n'
      << "fp=" << r.fp << '\n'
      << "tn=" << r.tn << '\n'
      << "fn=" << r.fn << '\n'
      << "auc=" << (r.has_auc ? text::format_double(r.auc) : std::string("undefined")) << '\n';
  for (const auto& [k, v] : extra) out << k << '=' << v << '\n';
  finish(out, path);
}

void write_misclassifications_csv(const fs::path& path, std::span<const Misclassification> rows) {
  auto out = open_for_write(path, "misclassification list");
  out << "id,label,score,kind\n";
  for (const Misclassification& m : rows)
    out << m.id << ',' << (m.label == 1 ? "damaged" : "undamaged") << ',' << text::format_double(m.score) << ','
        << (m.kind == ErrorKind::false_positive ? "FP" : "FN") << '\n';
  finish(out, path);
}

void write_annotations(std::span<const AnnotationRow> rows, std::span<const double> scores, double threshold,
                       const fs::path& path) {
  if (rows.size() != scores.size())
    throw ValidationError("annotation rows and scores differ in length: " + std::to_string(rows.size()) + " vs " +
                          std::to_string(scores.size()));
  auto out = open_for_write(path, "annotations");
  out << "id,lon,lat,probability,predicted_label\n";
  for (std::size_t i = 0; i < rows.size(); ++i)
    out << rows[i].id << ',' << text::format_double(rows[i].lon) << ',' << text::format_double(rows[i].lat) << ','
        << text::format_double(scores[i]) << ',' << (scores[i] >= threshold ? "damaged" : "undamaged") << '\n';
  finish(out, path);
}

}  // namespace stormchip
