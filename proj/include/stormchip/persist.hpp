#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stormchip/metrics.hpp"
#include "stormchip/network.hpp"
#include "stormchip/train.hpp"

namespace stormchip {

inline constexpr std::string_view kCheckpointMagic = "STRMCHP1";
inline constexpr int kCheckpointVersion = 1;

// Checkpoint layout: the 8 magic bytes, a text header (version, input shape,
// one line per layer, parameter count, "end"), each line '\n'-terminated,
// then every parameter as a little-endian float32 in layer order, weights
// before biases.
std::string serialize_checkpoint(const Network<float>& net);
Network<float> parse_checkpoint(std::string_view bytes, const std::string& origin = "checkpoint");

void save_checkpoint(const Network<float>& net, const std::filesystem::path& path);
Network<float> load_checkpoint(const std::filesystem::path& path);

// epoch,train_loss,train_acc,val_loss,val_acc
void write_history_csv(const std::filesystem::path& path, const EpochHistory& history);

// fpr,tpr
void write_roc_csv(const std::filesystem::path& path, std::span<const RocPoint> points);

// Flat key=value lines; `extra` entries are appended after the metrics.
void write_report(const std::filesystem::path& path, const EvalReport& report,
                  const std::vector<std::pair<std::string, std::string>>& extra = {});

// id,label,score,kind
void write_misclassifications_csv(const std::filesystem::path& path, std::span<const Misclassification> rows);

struct AnnotationRow {
  std::string id;
  double lon = 0.0;
  double lat = 0.0;
};

// id,lon,lat,probability,predicted_label; probability >= threshold is damaged.
void write_annotations(std::span<const AnnotationRow> rows, std::span<const double> scores, double threshold,
                       const std::filesystem::path& path);

}  // namespace stormchip
