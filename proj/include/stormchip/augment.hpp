#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>

#include "stormchip/errors.hpp"
#include "stormchip/rng.hpp"
#include "stormchip/tensor.hpp"

namespace stormchip {

struct AugmentConfig {
  bool enabled = true;
  double rotation_deg_max = 40.0;
  bool horizontal_flip = true;
  double shift_frac_max = 0.2;
  double shear_frac_max = 0.2;
  double zoom_frac_max = 0.2;

  static AugmentConfig disabled() {
    AugmentConfig c;
    c.enabled = false;
    return c;
  }

  void validate() const {
    if (!(rotation_deg_max >= 0.0)) throw ValidationError("rotation_deg_max must be >= 0");
    for (double f : {shift_frac_max, shear_frac_max, zoom_frac_max})
      if (!(f >= 0.0 && f < 1.0)) throw ValidationError("augmentation fractions must lie in [0, 1)");
  }
};

// One concrete draw. Content moves by: flip, then zoom, shear, rotation
// (counter-clockwise as displayed, degrees) about the image centre, then shift
// in pixels.
struct AffineParams {
  double rotation_deg = 0.0;
  bool flip = false;
  double shift_x = 0.0;  // pixels, +x to the right
  double shift_y = 0.0;  // pixels, +y downwards
  double shear = 0.0;    // x' = x + shear * y
  double zoom_x = 1.0;
  double zoom_y = 1.0;

  bool is_identity() const {
    return rotation_deg == 0.0 && !flip && shift_x == 0.0 && shift_y == 0.0 && shear == 0.0 &&
           zoom_x == 1.0 && zoom_y == 1.0;
  }
};

inline AffineParams draw_affine(const AugmentConfig& cfg, std::size_t height, std::size_t width, Rng& rng) {
  AffineParams p;
  if (cfg.rotation_deg_max > 0.0) p.rotation_deg = rng.uniform(-cfg.rotation_deg_max, cfg.rotation_deg_max);
  if (cfg.horizontal_flip) p.flip = rng.bernoulli(0.5);
  if (cfg.shift_frac_max > 0.0) {
    p.shift_x = rng.uniform(-cfg.shift_frac_max, cfg.shift_frac_max) * static_cast<double>(width);
    p.shift_y = rng.uniform(-cfg.shift_frac_max, cfg.shift_frac_max) * static_cast<double>(height);
  }
  if (cfg.shear_frac_max > 0.0) p.shear = rng.uniform(-cfg.shear_frac_max, cfg.shear_frac_max);
  if (cfg.zoom_frac_max > 0.0) {
    p.zoom_x = rng.uniform(1.0 - cfg.zoom_frac_max, 1.0 + cfg.zoom_frac_max);
    p.zoom_y = rng.uniform(1.0 - cfg.zoom_frac_max, 1.0 + cfg.zoom_frac_max);
  }
  return p;
}

// Resamples a C x H x W image under `p` with bilinear interpolation; samples
// that land outside the image take the nearest edge pixel.
template <typename T>
BasicTensor<T> apply_affine(const BasicTensor<T>& image, const AffineParams& p) {
  if (image.rank() != 3) throw ShapeError("augmentation expects CxHxW, got " + to_string(image.shape()));
  if (p.is_identity()) return image;
  if (p.zoom_x <= 0.0 || p.zoom_y <= 0.0) throw ValidationError("zoom factors must be positive");

  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  const double cx = (static_cast<double>(w) - 1.0) / 2.0;
  const double cy = (static_cast<double>(h) - 1.0) / 2.0;
  const double theta = p.rotation_deg * std::numbers::pi / 180.0;
  const double cs = std::cos(theta), sn = std::sin(theta);

  // Output -> input mapping, each stage inverted in reverse order.
  auto source = [&](double x, double y, double& sx, double& sy) {
    x -= p.shift_x;
    y -= p.shift_y;
    const double rx = x * cs - y * sn;
    const double ry = x * sn + y * cs;
    const double ux = rx - p.shear * ry;
    const double uy = ry;
    sx = ux / p.zoom_x;
    sy = uy / p.zoom_y;
    if (p.flip) sx = -sx;
  };
  auto lerp = [](double a, double b, double f) {
    return std::clamp(a + (b - a) * f, std::min(a, b), std::max(a, b));
  };

  BasicTensor<T> out(image.shape());
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t col = 0; col < w; ++col) {
      double sx, sy;
      source(static_cast<double>(col) - cx, static_cast<double>(r) - cy, sx, sy);
      sx = std::clamp(sx + cx, 0.0, static_cast<double>(w - 1));
      sy = std::clamp(sy + cy, 0.0, static_cast<double>(h - 1));
      const std::size_t x0 = static_cast<std::size_t>(sx), y0 = static_cast<std::size_t>(sy);
      const std::size_t x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
      const double fx = sx - static_cast<double>(x0), fy = sy - static_cast<double>(y0);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const T* plane = image.data() + ch * h * w;
        const double top = lerp(plane[y0 * w + x0], plane[y0 * w + x1], fx);
        const double bottom = lerp(plane[y1 * w + x0], plane[y1 * w + x1], fx);
        out[(ch * h + r) * w + col] = static_cast<T>(lerp(top, bottom, fy));
      }
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> random_affine(const BasicTensor<T>& image, const AugmentConfig& cfg, Rng& rng) {
  if (!cfg.enabled) return image;
  if (image.rank() != 3) throw ShapeError("augmentation expects CxHxW, got " + to_string(image.shape()));
  return apply_affine(image, draw_affine(cfg, image.dim(1), image.dim(2), rng));
}

// Augments every sample of an N x C x H x W batch with its own substream
// derived from (seed, stream, sample index). Labels are not touched.
template <typename T>
BasicTensor<T> augment_batch(const BasicTensor<T>& batch, const AugmentConfig& cfg, std::uint64_t seed,
                             std::uint64_t stream) {
  if (!cfg.enabled) return batch;
  if (batch.rank() != 4) throw ShapeError("augment_batch expects NxCxHxW, got " + to_string(batch.shape()));
  const std::size_t n = batch.dim(0), per = batch.size() / n;
  const Shape sample_shape{batch.dim(1), batch.dim(2), batch.dim(3)};
  BasicTensor<T> out(batch.shape());
  for (std::size_t s = 0; s < n; ++s) {
    BasicTensor<T> sample(sample_shape,
                          std::vector<T>(batch.data() + s * per, batch.data() + (s + 1) * per));
    Rng rng = Rng::substream(seed, stream, s);
    const BasicTensor<T> aug = random_affine(sample, cfg, rng);
    std::copy(aug.data(), aug.data() + per, out.data() + s * per);
  }
  return out;
}

}  // namespace stormchip
