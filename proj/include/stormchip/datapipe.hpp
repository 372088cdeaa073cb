#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "stormchip/tensor.hpp"

namespace stormchip {

struct LonLat {
  double lon = 0.0;
  double lat = 0.0;
};

struct PixelCoord {
  double col = 0.0;
  double row = 0.0;
};

// lon = a + b*col + c*row;  lat = d + e*col + f*row
struct GeoTransform {
  double a = 0.0, b = 1.0, c = 0.0, d = 0.0, e = 0.0, f = 1.0;

  void validate() const;
  LonLat pixel_to_lonlat(double col, double row) const;
  // Exact inverse of pixel_to_lonlat up to floating-point round-off.
  PixelCoord lonlat_to_pixel(double lon, double lat) const;
};

// Six decimal coefficients a..f, one per line ('#' comments allowed).
GeoTransform parse_sidecar(std::string_view text);
GeoTransform read_sidecar(const std::filesystem::path& path);

struct Raster {
  Tensor image;  // 3 x H x W in [0, 1]
  GeoTransform transform;
};

Raster load_raster(const std::filesystem::path& image_path, const std::filesystem::path& sidecar_path);

enum class Label { undamaged = 0, damaged = 1 };
std::string_view to_string(Label label);
Label parse_label(std::string_view text);

struct BuildingRecord {
  std::string id;
  double lon = 0.0;
  double lat = 0.0;
  Label label = Label::damaged;
  std::string source;
};

// CSV with header id,lon,lat,label[,source]. Ids must be unique.
std::vector<BuildingRecord> read_buildings_csv(const std::filesystem::path& path);

enum class ExcludeReason { none, edge_overflow, out_of_bounds, no_usable_image, partial_black, cloud, operator_listed };
std::string_view to_string(ExcludeReason reason);
ExcludeReason parse_exclude_reason(std::string_view text);

struct CropResult {
  std::optional<Tensor> chip;
  ExcludeReason reason = ExcludeReason::none;
};

// Square window centred on the building's pixel (rounded to nearest). Rows and
// columns span [centre - w/2, centre - w/2 + w). Windows that leave the strip
// are rejected with edge_overflow; centres outside it with out_of_bounds.
CropResult crop_window(const Raster& raster, const BuildingRecord& record, std::size_t window_px);

struct QualityThresholds {
  double black_pixel = 0.02;        // every channel below this counts as black
  double totally_black = 0.999;     // black_fraction at or above: unusable
  double max_black_fraction = 0.05;
  double cloud_luma = 0.85;
  double cloud_saturation = 0.08;   // max - min channel below this is grey
  double max_cloud_score = 0.30;
};

struct QualityMetrics {
  double black_fraction = 0.0;
  double cloud_score = 0.0;
};

QualityMetrics quality_metrics(const Tensor& chip, const QualityThresholds& t = {});

enum class Split { none, train, val, test_balanced, test_unbalanced };
std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct ChipRecord {
  std::string id;
  double lon = 0.0;
  double lat = 0.0;
  Label label = Label::damaged;
  std::string chip_path;  // relative to the manifest's directory
  std::size_t window_px = 0;
  std::string source;  // strip id
  std::int64_t capture_epoch = 0;
  double black_fraction = 0.0;
  double cloud_score = 0.0;
  bool excluded = false;
  ExcludeReason exclude_reason = ExcludeReason::none;
  Split split = Split::none;

  friend bool operator==(const ChipRecord&, const ChipRecord&) = default;
};

using Manifest = std::vector<ChipRecord>;

inline constexpr std::string_view kManifestHeader =
    "id,lon,lat,label,chip_path,window_px,source,capture_epoch,black_fraction,cloud_score,excluded,"
    "exclude_reason,split";

void write_manifest_csv(const std::filesystem::path& path, const Manifest& manifest);
Manifest read_manifest_csv(const std::filesystem::path& path);

// One building id per line; blank lines and '#' comments are ignored.
std::set<std::string> read_exclusions(const std::filesystem::path& path);

// A candidate chip for one sample from one strip, in strip-scan order.
struct ChipCandidate {
  std::string strip_id;
  std::int64_t capture_epoch = 0;
  ExcludeReason crop_reason = ExcludeReason::none;  // edge_overflow/out_of_bounds when not cropped
  QualityMetrics metrics;
  std::string chip_path;  // set by the caller when the chip was written
};

struct SampleCandidates {
  std::string id;
  double lon = 0.0;
  double lat = 0.0;
  Label label = Label::damaged;
  std::size_t window_px = 0;
  std::vector<ChipCandidate> candidates;
};

struct DedupOutcome {
  ChipRecord record;
  std::optional<std::size_t> kept;  // index into the sample's candidates
};

// Keeps, per sample, the first candidate that is not totally black. Kept chips
// above the black/cloud thresholds are excluded for review unless an operator
// exclusion list is supplied, in which case that list alone decides.
std::vector<DedupOutcome> dedup_and_filter(const std::vector<SampleCandidates>& samples,
                                           const QualityThresholds& thresholds,
                                           const std::set<std::string>* operator_exclusions = nullptr);

struct SplitSpec {
  std::size_t train_per_class = 5000;
  std::size_t val_per_class = 1000;
  std::size_t test_balanced_per_class = 1000;
  std::size_t unbalanced_negatives = 1000;
  double unbalanced_ratio = 8.0;  // positives per negative
  std::uint64_t seed = 1;

  std::size_t unbalanced_positives() const;
  void validate() const;
};

// Seeded per-class shuffle, then train, val and balanced test in that order.
// The unbalanced test set contains the balanced test set and is topped up
// with extra chips marked test_unbalanced, so each chip carries one split
// label. Throws ValidationError naming the short class when counts exceed
// the usable chips.
Manifest make_splits(const Manifest& manifest, const SplitSpec& spec);

// Whether a row with split `row` belongs to the evaluation set `requested`.
bool in_eval_set(Split row, Split requested);

struct StripInfo {
  std::string id;
  std::filesystem::path image;
  std::filesystem::path sidecar;
  std::int64_t capture_epoch = 0;
  bool pre_event = false;
};

// Every <stem>.png in `dir` with its <stem>.geo sidecar and optional
// <stem>.meta (capture_epoch=..., phase=pre|post), ordered by capture epoch
// then id. A missing sidecar is a DataError naming the file.
std::vector<StripInfo> discover_strips(const std::filesystem::path& dir);

struct CropOptions {
  std::size_t window_px = 128;
  QualityThresholds thresholds;
  std::optional<std::set<std::string>> exclusions;
};

// Full chipping pass: crops every building from every strip in scan order,
// writes usable chips as out_dir/chips/<sample>.png and returns the manifest
// sorted by sample id. Post-event strips give chips with the building's own
// label; pre-event strips give undamaged chips (sample id suffixed "@pre"
// when the building itself is labelled damaged).
Manifest build_manifest(const std::vector<StripInfo>& strips, const std::vector<BuildingRecord>& buildings,
                        const std::filesystem::path& out_dir, const CropOptions& options);

std::string chip_file_name(std::string_view sample_id);

}  // namespace stormchip
