#include "stormchip/datapipe.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <tuple>

#include "stormchip/errors.hpp"
#include "stormchip/image_io.hpp"
#include "stormchip/rng.hpp"
#include "stormchip/text.hpp"

namespace stormchip {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Geo-referencing

void GeoTransform::validate() const {
  for (double v : {a, b, c, d, e, f})
    if (!std::isfinite(v)) throw DataError("geo-transform coefficients must be finite");
  const long double det = static_cast<long double>(b) * f - static_cast<long double>(c) * e;
  const long double scale = std::max({std::fabs(b * f), std::fabs(c * e), 1e-300});
  if (det == 0.0L || std::fabs(det) / scale < 1e-12L)
    throw DataError("geo-transform linear part is singular");
}

LonLat GeoTransform::pixel_to_lonlat(double col, double row) const {
  const long double lon = static_cast<long double>(a) + static_cast<long double>(b) * col +
                          static_cast<long double>(c) * row;
  const long double lat = static_cast<long double>(d) + static_cast<long double>(e) * col +
                          static_cast<long double>(f) * row;
  return {static_cast<double>(lon), static_cast<double>(lat)};
}

PixelCoord GeoTransform::lonlat_to_pixel(double lon, double lat) const {
  validate();
  const long double du = static_cast<long double>(lon) - a;
  const long double dv = static_cast<long double>(lat) - d;
  const long double det = static_cast<long double>(b) * f - static_cast<long double>(c) * e;
  const long double col = (static_cast<long double>(f) * du - static_cast<long double>(c) * dv) / det;
  const long double row = (static_cast<long double>(b) * dv - static_cast<long double>(e) * du) / det;
  return {static_cast<double>(col), static_cast<double>(row)};
}

GeoTransform parse_sidecar(std::string_view text) {
  std::vector<double> coeffs;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    std::string_view v = text::trim(line);
    if (v.empty() || v.front() == '#') continue;
    try {
      coeffs.push_back(text::parse_double(v, "geo-transform coefficient"));
    } catch (const ValidationError& e) {
      throw DataError(e.what());
    }
  }
  if (coeffs.size() != 6)
    throw DataError("sidecar must hold exactly six coefficients, found " + std::to_string(coeffs.size()));
  GeoTransform gt{coeffs[0], coeffs[1], coeffs[2], coeffs[3], coeffs[4], coeffs[5]};
  gt.validate();
  return gt;
}

GeoTransform read_sidecar(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read sidecar " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_sidecar(ss.str());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

Raster load_raster(const fs::path& image_path, const fs::path& sidecar_path) {
  GeoTransform gt = read_sidecar(sidecar_path);
  return {read_png(image_path, true), gt};
}

// ---------------------------------------------------------------------------
// Enumerations

std::string_view to_string(Label label) { return label == Label::damaged ? "damaged" : "undamaged"; }

Label parse_label(std::string_view text) {
  text = text::trim(text);
  if (text == "damaged") return Label::damaged;
  if (text == "undamaged") return Label::undamaged;
  throw ValidationError("label must be damaged or undamaged, got '" + std::string(text) + "'");
}

std::string_view to_string(ExcludeReason reason) {
  switch (reason) {
    case ExcludeReason::none: return "";
    case ExcludeReason::edge_overflow: return "edge_overflow";
    case ExcludeReason::out_of_bounds: return "out_of_bounds";
    case ExcludeReason::no_usable_image: return "no_usable_image";
    case ExcludeReason::partial_black: return "partial_black";
    case ExcludeReason::cloud: return "cloud";
    case ExcludeReason::operator_listed: return "operator";
  }
  return "";
}

ExcludeReason parse_exclude_reason(std::string_view text) {
  for (auto r : {ExcludeReason::none, ExcludeReason::edge_overflow, ExcludeReason::out_of_bounds,
                 ExcludeReason::no_usable_image, ExcludeReason::partial_black, ExcludeReason::cloud,
                 ExcludeReason::operator_listed})
    if (to_string(r) == text) return r;
  throw ValidationError("unknown exclude reason '" + std::string(text) + "'");
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::none: return "none";
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test_balanced: return "test_balanced";
    case Split::test_unbalanced: return "test_unbalanced";
  }
  return "none";
}

Split parse_split(std::string_view text) {
  for (auto s : {Split::none, Split::train, Split::val, Split::test_balanced, Split::test_unbalanced})
    if (to_string(s) == text) return s;
  throw ValidationError("unknown split '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// Buildings, manifest and exclusion files

namespace {

std::vector<std::string> read_lines(const fs::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw DataError(std::string("cannot read ") + what + " " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

void check_id(const std::string& id, const fs::path& path, std::size_t line) {
  if (id.empty() || id.find_first_of(",\"\n") != std::string::npos)
    throw DataError(path.string() + ":" + std::to_string(line) + ": invalid building id '" + id + "'");
}

}  // namespace

std::vector<BuildingRecord> read_buildings_csv(const fs::path& path) {
  const auto lines = read_lines(path, "buildings file");
  if (lines.empty()) throw DataError("buildings file is empty: " + path.string());
  const auto header = text::split(text::trim(lines[0]), ',');
  if (header.size() < 4 || header[0] != "id" || header[1] != "lon" || header[2] != "lat" || header[3] != "label")
    throw DataError(path.string() + ": header must start with id,lon,lat,label");
  const bool has_source = header.size() >= 5 && header[4] == "source";

  std::vector<BuildingRecord> out;
  std::set<std::string> seen;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (text::trim(lines[i]).empty()) continue;
    const auto f = text::split(lines[i], ',');
    if (f.size() != header.size())
      throw DataError(path.string() + ":" + std::to_string(i + 1) + ": expected " +
                      std::to_string(header.size()) + " fields");
    BuildingRecord r;
    r.id = std::string(text::trim(f[0]));
    check_id(r.id, path, i + 1);
    try {
      r.lon = text::parse_double(f[1], "lon");
      r.lat = text::parse_double(f[2], "lat");
      r.label = parse_label(f[3]);
    } catch (const ValidationError& e) {
      throw DataError(path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
    }
    if (!std::isfinite(r.lon) || !std::isfinite(r.lat))
      throw DataError(path.string() + ":" + std::to_string(i + 1) + ": non-finite coordinate");
    if (has_source) r.source = std::string(text::trim(f[4]));
    if (!seen.insert(r.id).second) throw DataError(path.string() + ": duplicate building id '" + r.id + "'");
    out.push_back(std::move(r));
  }
  return out;
}

void write_manifest_csv(const fs::path& path, const Manifest& manifest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write manifest " + path.string());
  out << kManifestHeader << '\n';
  for (const ChipRecord& r : manifest) {
    out << r.id << ',' << text::format_double(r.lon) << ',' << text::format_double(r.lat) << ','
        << to_string(r.label) << ',' << r.chip_path << ',' << r.window_px << ',' << r.source << ','
        << r.capture_epoch << ',' << text::format_double(r.black_fraction) << ','
        << text::format_double(r.cloud_score) << ',' << (r.excluded ? 1 : 0) << ','
        << to_string(r.exclude_reason) << ',' << to_string(r.split) << '\n';
  }
  if (!out) throw DataError("failed writing manifest " + path.string());
}

Manifest read_manifest_csv(const fs::path& path) {
  const auto lines = read_lines(path, "manifest");
  if (lines.empty() || text::trim(lines[0]) != kManifestHeader)
    throw DataError(path.string() + ": manifest header must be exactly '" + std::string(kManifestHeader) + "'");
  Manifest out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (text::trim(lines[i]).empty()) continue;
    const auto f = text::split(lines[i], ',');
    const std::string where = path.string() + ":" + std::to_string(i + 1) + ": ";
    if (f.size() != 13) throw DataError(where + "expected 13 fields, found " + std::to_string(f.size()));
    try {
      ChipRecord r;
      r.id = f[0];
      r.lon = text::parse_double(f[1], "lon");
      r.lat = text::parse_double(f[2], "lat");
      r.label = parse_label(f[3]);
      r.chip_path = f[4];
      r.window_px = text::parse_int<std::size_t>(f[5], "window_px");
      r.source = f[6];
      r.capture_epoch = text::parse_int<std::int64_t>(f[7], "capture_epoch");
      r.black_fraction = text::parse_double(f[8], "black_fraction");
      r.cloud_score = text::parse_double(f[9], "cloud_score");
      const auto ex = text::trim(f[10]);
      if (ex != "0" && ex != "1") throw ValidationError("excluded must be 0 or 1");
      r.excluded = ex == "1";
      r.exclude_reason = parse_exclude_reason(text::trim(f[11]));
      r.split = parse_split(text::trim(f[12]));
      out.push_back(std::move(r));
    } catch (const ValidationError& e) {
      throw DataError(where + e.what());
    }
  }
  return out;
}

std::set<std::string> read_exclusions(const fs::path& path) {
  std::set<std::string> ids;
  for (const std::string& line : read_lines(path, "exclusion file")) {
    std::string_view v = line;
    if (const auto hash = v.find('#'); hash != std::string_view::npos) v = v.substr(0, hash);
    v = text::trim(v);
    if (!v.empty()) ids.emplace(v);
  }
  return ids;
}

// ---------------------------------------------------------------------------
// Cropping and quality

CropResult crop_window(const Raster& raster, const BuildingRecord& record, std::size_t window_px) {
  if (window_px == 0) throw ValidationError("window size must be >= 1");
  const Tensor& img = raster.image;
  const std::size_t channels = img.dim(0), height = img.dim(1), width = img.dim(2);
  const PixelCoord px = raster.transform.lonlat_to_pixel(record.lon, record.lat);
  const double cx = std::floor(px.col + 0.5), cy = std::floor(px.row + 0.5);
  if (!(cx >= 0.0 && cy >= 0.0 && cx < static_cast<double>(width) && cy < static_cast<double>(height)))
    return {std::nullopt, ExcludeReason::out_of_bounds};
  const auto half = static_cast<std::ptrdiff_t>(window_px / 2);
  const std::ptrdiff_t left = static_cast<std::ptrdiff_t>(cx) - half;
  const std::ptrdiff_t top = static_cast<std::ptrdiff_t>(cy) - half;
  const auto w = static_cast<std::ptrdiff_t>(window_px);
  if (left < 0 || top < 0 || left + w > static_cast<std::ptrdiff_t>(width) ||
      top + w > static_cast<std::ptrdiff_t>(height))
    return {std::nullopt, ExcludeReason::edge_overflow};

  Tensor chip({channels, window_px, window_px});
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t y = 0; y < window_px; ++y) {
      const float* src = img.data() + (c * height + static_cast<std::size_t>(top) + y) * width +
                         static_cast<std::size_t>(left);
      std::copy(src, src + window_px, chip.data() + (c * window_px + y) * window_px);
    }
  return {std::move(chip), ExcludeReason::none};
}

QualityMetrics quality_metrics(const Tensor& chip, const QualityThresholds& t) {
  if (chip.rank() != 3) throw ShapeError("quality_metrics expects CxHxW, got " + to_string(chip.shape()));
  const std::size_t channels = chip.dim(0), plane = chip.dim(1) * chip.dim(2);
  std::size_t black = 0, cloud = 0;
  for (std::size_t i = 0; i < plane; ++i) {
    float lo = chip[i], hi = chip[i];
    bool all_black = true;
    for (std::size_t c = 0; c < channels; ++c) {
      const float v = chip[c * plane + i];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      all_black = all_black && v < t.black_pixel;
    }
    const double luma = channels >= 3 ? 0.299 * chip[i] + 0.587 * chip[plane + i] + 0.114 * chip[2 * plane + i]
                                      : static_cast<double>(chip[i]);
    black += all_black ? 1 : 0;
    cloud += (luma > t.cloud_luma && (hi - lo) < t.cloud_saturation) ? 1 : 0;
  }
  return {static_cast<double>(black) / static_cast<double>(plane),
          static_cast<double>(cloud) / static_cast<double>(plane)};
}

// ---------------------------------------------------------------------------
// Deduplication

std::vector<DedupOutcome> dedup_and_filter(const std::vector<SampleCandidates>& samples,
                                           const QualityThresholds& thresholds,
                                           const std::set<std::string>* operator_exclusions) {
  std::vector<DedupOutcome> out;
  out.reserve(samples.size());
  for (const SampleCandidates& s : samples) {
    DedupOutcome o;
    ChipRecord& r = o.record;
    r.id = s.id;
    r.lon = s.lon;
    r.lat = s.lat;
    r.label = s.label;
    r.window_px = s.window_px;

    bool saw_black = false, saw_overflow = false;
    for (std::size_t i = 0; i < s.candidates.size(); ++i) {
      const ChipCandidate& c = s.candidates[i];
      if (c.crop_reason == ExcludeReason::edge_overflow) saw_overflow = true;
      if (c.crop_reason != ExcludeReason::none) continue;
      if (c.metrics.black_fraction >= thresholds.totally_black) {
        saw_black = true;
        continue;
      }
      o.kept = i;
      break;
    }

    if (!o.kept) {
      r.excluded = true;
      r.exclude_reason = saw_black      ? ExcludeReason::no_usable_image
                         : saw_overflow ? ExcludeReason::edge_overflow
                                        : ExcludeReason::out_of_bounds;
      out.push_back(std::move(o));
      continue;
    }

    const ChipCandidate& kept = s.candidates[*o.kept];
    r.chip_path = kept.chip_path;
    r.source = kept.strip_id;
    r.capture_epoch = kept.capture_epoch;
    r.black_fraction = kept.metrics.black_fraction;
    r.cloud_score = kept.metrics.cloud_score;
    if (operator_exclusions) {
      if (operator_exclusions->count(s.id)) {
        r.excluded = true;
        r.exclude_reason = ExcludeReason::operator_listed;
      }
    } else if (r.black_fraction > thresholds.max_black_fraction) {
      r.excluded = true;
      r.exclude_reason = ExcludeReason::partial_black;
    } else if (r.cloud_score > thresholds.max_cloud_score) {
      r.excluded = true;
      r.exclude_reason = ExcludeReason::cloud;
    }
    out.push_back(std::move(o));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Splits

std::size_t SplitSpec::unbalanced_positives() const {
  return static_cast<std::size_t>(std::llround(unbalanced_ratio * static_cast<double>(unbalanced_negatives)));
}

void SplitSpec::validate() const {
  if (!(unbalanced_ratio >= 0.0) || !std::isfinite(unbalanced_ratio))
    throw ValidationError("unbalanced_ratio must be a finite value >= 0");
  if (unbalanced_negatives < test_balanced_per_class || unbalanced_positives() < test_balanced_per_class)
    throw ValidationError("the unbalanced test set must be at least as large per class as the balanced one");
}

bool in_eval_set(Split row, Split requested) {
  if (requested == Split::test_unbalanced) return row == Split::test_balanced || row == Split::test_unbalanced;
  return row == requested;
}

Manifest make_splits(const Manifest& manifest, const SplitSpec& spec) {
  spec.validate();
  Manifest out = manifest;
  for (ChipRecord& r : out) r.split = Split::none;

  for (Label label : {Label::damaged, Label::undamaged}) {
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < out.size(); ++i)
      if (!out[i].excluded && out[i].label == label) pool.push_back(i);
    std::sort(pool.begin(), pool.end(), [&](std::size_t x, std::size_t y) { return out[x].id < out[y].id; });

    const std::size_t unbalanced =
        label == Label::damaged ? spec.unbalanced_positives() : spec.unbalanced_negatives;
    const std::pair<Split, std::size_t> plan[] = {
        {Split::train, spec.train_per_class},
        {Split::val, spec.val_per_class},
        {Split::test_balanced, spec.test_balanced_per_class},
        {Split::test_unbalanced, unbalanced - spec.test_balanced_per_class},
    };
    std::size_t needed = 0;
    for (const auto& [split, count] : plan) needed += count;
    if (needed > pool.size())
      throw ValidationError("not enough usable " + std::string(to_string(label)) + " chips: need " +
                            std::to_string(needed) + ", have " + std::to_string(pool.size()) + " (short by " +
                            std::to_string(needed - pool.size()) + ")");

    Rng rng = Rng::substream(spec.seed, static_cast<std::uint64_t>(label) + 1);
    rng.shuffle(pool);
    std::size_t cursor = 0;
    for (const auto& [split, count] : plan)
      for (std::size_t k = 0; k < count; ++k) out[pool[cursor++]].split = split;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Strip discovery and the chipping pass

std::vector<StripInfo> discover_strips(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("strip directory not found: " + dir.string());
  std::vector<StripInfo> strips;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".png") continue;
    StripInfo s;
    s.id = entry.path().stem().string();
    s.image = entry.path();
    s.sidecar = fs::path(entry.path()).replace_extension(".geo");
    if (!fs::exists(s.sidecar)) throw DataError("missing sidecar " + s.sidecar.string());
    const fs::path meta = fs::path(entry.path()).replace_extension(".meta");
    if (fs::exists(meta)) {
      for (const std::string& line : read_lines(meta, "strip metadata")) {
        std::string_view v = text::trim(line);
        if (v.empty() || v.front() == '#') continue;
        const auto eq = v.find('=');
        if (eq == std::string_view::npos) throw DataError(meta.string() + ": expected key=value");
        const auto key = text::trim(v.substr(0, eq)), value = text::trim(v.substr(eq + 1));
        if (key == "capture_epoch") {
          try {
            s.capture_epoch = text::parse_int<std::int64_t>(value, "capture_epoch");
          } catch (const ValidationError& e) {
            throw DataError(meta.string() + ": " + e.what());
          }
        } else if (key == "phase") {
          if (value != "pre" && value != "post") throw DataError(meta.string() + ": phase must be pre or post");
          s.pre_event = value == "pre";
        } else {
          throw DataError(meta.string() + ": unknown key '" + std::string(key) + "'");
        }
      }
    }
    strips.push_back(std::move(s));
  }
  std::sort(strips.begin(), strips.end(), [](const StripInfo& x, const StripInfo& y) {
    return std::tie(x.capture_epoch, x.id) < std::tie(y.capture_epoch, y.id);
  });
  return strips;
}

std::string chip_file_name(std::string_view sample_id) {
  static constexpr char hex[] = "0123456789ABCDEF";
  std::string name;
  for (unsigned char ch : sample_id) {
    if (std::isalnum(ch) || ch == '-' || ch == '_' || ch == '.' || ch == '@') {
      name.push_back(static_cast<char>(ch));
    } else {
      name.push_back('%');
      name.push_back(hex[ch >> 4]);
      name.push_back(hex[ch & 15]);
    }
  }
  return name + ".png";
}

Manifest build_manifest(const std::vector<StripInfo>& strips, const std::vector<BuildingRecord>& buildings,
                        const fs::path& out_dir, const CropOptions& options) {
  if (options.window_px == 0) throw ValidationError("window size must be >= 1");
  const bool have_pre = std::any_of(strips.begin(), strips.end(), [](const StripInfo& s) { return s.pre_event; });
  const bool have_post = std::any_of(strips.begin(), strips.end(), [](const StripInfo& s) { return !s.pre_event; });

  std::vector<SampleCandidates> samples;
  std::map<std::string, std::size_t> index;
  auto sample_id = [](const BuildingRecord& b, bool pre) {
    return (pre && b.label == Label::damaged) ? b.id + "@pre" : b.id;
  };
  for (bool pre : {false, true}) {
    if ((pre && !have_pre) || (!pre && !have_post)) continue;
    for (const BuildingRecord& b : buildings) {
      const std::string id = sample_id(b, pre);
      if (index.count(id)) continue;
      index[id] = samples.size();
      samples.push_back({id, b.lon, b.lat, pre ? Label::undamaged : b.label, options.window_px, {}});
    }
  }

  fs::create_directories(out_dir / "chips");
  std::vector<bool> resolved(samples.size(), false);
  for (const StripInfo& strip : strips) {
    const Raster raster = load_raster(strip.image, strip.sidecar);
    for (const BuildingRecord& b : buildings) {
      const std::size_t si = index.at(sample_id(b, strip.pre_event));
      if (resolved[si]) continue;
      ChipCandidate cand;
      cand.strip_id = strip.id;
      cand.capture_epoch = strip.capture_epoch;
      CropResult crop = crop_window(raster, b, options.window_px);
      cand.crop_reason = crop.reason;
      if (crop.chip) {
        cand.metrics = quality_metrics(*crop.chip, options.thresholds);
        if (cand.metrics.black_fraction < options.thresholds.totally_black) {
          cand.chip_path = "chips/" + chip_file_name(samples[si].id);
          write_png(out_dir / cand.chip_path, *crop.chip);
          resolved[si] = true;
        }
      }
      samples[si].candidates.push_back(std::move(cand));
    }
  }

  const auto outcomes =
      dedup_and_filter(samples, options.thresholds, options.exclusions ? &*options.exclusions : nullptr);
  Manifest manifest;
  manifest.reserve(outcomes.size());
  for (const auto& o : outcomes) manifest.push_back(o.record);
  std::sort(manifest.begin(), manifest.end(), [](const ChipRecord& x, const ChipRecord& y) { return x.id < y.id; });
  return manifest;
}

}  // namespace stormchip
