#pragma once

#include <algorithm>
#include <cstddef>

#include "stormchip/errors.hpp"
#include "stormchip/gemm.hpp"
#include "stormchip/tensor.hpp"

namespace stormchip {

inline constexpr std::size_t kKernel = 3;

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw ShapeError("matmul expects rank-2 operands, got " + to_string(a.shape()) + " and " +
                     to_string(b.shape()));
  if (a.dim(1) != b.dim(0))
    throw ShapeError("matmul inner extents differ: " + to_string(a.shape()) + " x " +
                     to_string(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  BasicTensor<T> c({m, n});
  gemm<T>(Trans::no, Trans::no, m, n, k, a.data(), k, b.data(), n, T{0}, c.data(), n);
  return c;
}

struct ConvGeometry {
  std::size_t channels = 0, height = 0, width = 0;
  std::size_t pad = 0;

  std::size_t out_height() const { return height + 2 * pad - (kKernel - 1); }
  std::size_t out_width() const { return width + 2 * pad - (kKernel - 1); }
  std::size_t patch_size() const { return channels * kKernel * kKernel; }
  std::size_t out_pixels() const { return out_height() * out_width(); }

  void validate() const {
    if (height + 2 * pad < kKernel || width + 2 * pad < kKernel)
      throw ShapeError("input " + std::to_string(height) + "x" + std::to_string(width) +
                       " is smaller than the 3x3 kernel");
  }
};

// Raw-pointer im2col over one C x H x W image. Row index of the output is
// c*9 + ky*3 + kx (channel-major, then kernel row, then kernel column);
// column index is oy*Wo + ox. Out-of-image taps (only with pad > 0) are zero.
template <typename T>
void im2col_into(const T* image, const ConvGeometry& g, T* cols) {
  const std::size_t ho = g.out_height(), wo = g.out_width();
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(g.pad);
  for (std::size_t c = 0; c < g.channels; ++c) {
    const T* plane = image + c * g.height * g.width;
    for (std::size_t ky = 0; ky < kKernel; ++ky) {
      for (std::size_t kx = 0; kx < kKernel; ++kx) {
        T* row = cols + ((c * kKernel + ky) * kKernel + kx) * ho * wo;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) - pad;
          T* dst = row + oy * wo;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) {
            std::fill(dst, dst + wo, T{0});
            continue;
          }
          const T* src_row = plane + static_cast<std::size_t>(iy) * g.width;
          if (pad == 0) {
            std::copy(src_row + kx, src_row + kx + wo, dst);
            continue;
          }
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox + kx) - pad;
            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width))
                          ? T{0}
                          : src_row[static_cast<std::size_t>(ix)];
          }
        }
      }
    }
  }
}

// Adjoint of im2col_into: scatters-and-adds columns back onto the image.
template <typename T>
void col2im_add(const T* cols, const ConvGeometry& g, T* image) {
  const std::size_t ho = g.out_height(), wo = g.out_width();
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(g.pad);
  for (std::size_t c = 0; c < g.channels; ++c) {
    T* plane = image + c * g.height * g.width;
    for (std::size_t ky = 0; ky < kKernel; ++ky) {
      for (std::size_t kx = 0; kx < kKernel; ++kx) {
        const T* row = cols + ((c * kKernel + ky) * kKernel + kx) * ho * wo;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) - pad;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
          T* dst_row = plane + static_cast<std::size_t>(iy) * g.width;
          const T* src = row + oy * wo;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox + kx) - pad;
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width)) continue;
            dst_row[static_cast<std::size_t>(ix)] += src[ox];
          }
        }
      }
    }
  }
}

// im2col for a single image given as 1 x C x H x W (or C x H x W).
template <typename T>
BasicTensor<T> im2col(const BasicTensor<T>& input, std::size_t kernel = kKernel,
                      std::size_t stride = 1, std::size_t pad = 0) {
  if (kernel != kKernel || stride != 1)
    throw ShapeError("im2col supports only 3x3 kernels with stride 1");
  ConvGeometry g;
  if (input.rank() == 4 && input.dim(0) == 1) {
    g = {input.dim(1), input.dim(2), input.dim(3), pad};
  } else if (input.rank() == 3) {
    g = {input.dim(0), input.dim(1), input.dim(2), pad};
  } else {
    throw ShapeError("im2col expects 1xCxHxW or CxHxW, got " + to_string(input.shape()));
  }
  g.validate();
  BasicTensor<T> cols({g.patch_size(), g.out_pixels()});
  im2col_into(input.data(), g, cols.data());
  return cols;
}

// Bilinear resize of a C x H x W image with corner-aligned sampling: output
// pixel y maps to source row y*(H-1)/(out_h-1). Same-shape calls return an
// exact copy.
template <typename T>
BasicTensor<T> resize_bilinear(const BasicTensor<T>& image, std::size_t out_h, std::size_t out_w) {
  if (image.rank() != 3) throw ShapeError("resize_bilinear expects CxHxW, got " + to_string(image.shape()));
  if (out_h == 0 || out_w == 0) throw ShapeError("resize target extents must be >= 1");
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (out_h == h && out_w == w) return image;

  struct Tap {
    std::size_t lo, hi;
    double frac;
  };
  auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> t(out);
    for (std::size_t i = 0; i < out; ++i) {
      const double pos = (out == 1 || in == 1)
                             ? 0.0
                             : static_cast<double>(i) * static_cast<double>(in - 1) /
                                   static_cast<double>(out - 1);
      std::size_t lo = std::min(static_cast<std::size_t>(pos), in - 1);
      const std::size_t hi = std::min(lo + 1, in - 1);
      t[i] = {lo, hi, pos - static_cast<double>(lo)};
    }
    return t;
  };
  // a + (b - a) * f, clamped to [min(a,b), max(a,b)] so output never leaves
  // the input range.
  auto lerp = [](double a, double b, double f) {
    const double v = a + (b - a) * f;
    return std::clamp(v, std::min(a, b), std::max(a, b));
  };

  const auto ty = taps(h, out_h);
  const auto tx = taps(w, out_w);
  BasicTensor<T> out({c, out_h, out_w});
  for (std::size_t ch = 0; ch < c; ++ch) {
    const T* plane = image.data() + ch * h * w;
    T* dst = out.data() + ch * out_h * out_w;
    for (std::size_t y = 0; y < out_h; ++y) {
      const T* r0 = plane + ty[y].lo * w;
      const T* r1 = plane + ty[y].hi * w;
      for (std::size_t x = 0; x < out_w; ++x) {
        const double top = lerp(r0[tx[x].lo], r0[tx[x].hi], tx[x].frac);
        const double bottom = lerp(r1[tx[x].lo], r1[tx[x].hi], tx[x].frac);
        dst[y * out_w + x] = static_cast<T>(lerp(top, bottom, ty[y].frac));
      }
    }
  }
  return out;
}

}  // namespace stormchip
