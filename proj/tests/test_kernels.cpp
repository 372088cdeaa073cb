#include <gtest/gtest.h>

#include <cmath>

#include "stormchip/errors.hpp"
#include "stormchip/gemm.hpp"
#include "stormchip/kernels.hpp"
#include "test_util.hpp"

using namespace stormchip;
using testutil::naive_matmul;
using testutil::random_tensor;

namespace {

void expect_close_rel(const Tensor& got, const Tensor& want, double rel) {
  ASSERT_EQ(got.shape(), want.shape());
  for (std::size_t i = 0; i < got.size(); ++i) {
    const double scale = std::max(1.0, std::fabs(static_cast<double>(want[i])));
    ASSERT_NEAR(got[i], want[i], rel * scale) << "element " << i;
  }
}

// Direct valid/same 3x3 convolution of one C x H x W image.
Tensor nested_loop_conv(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t cout, std::size_t pad) {
  const std::size_t c = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const std::size_t ho = h + 2 * pad - 2, wo = wd + 2 * pad - 2;
  Tensor y({cout, ho, wo});
  for (std::size_t co = 0; co < cout; ++co)
    for (std::size_t oy = 0; oy < ho; ++oy)
      for (std::size_t ox = 0; ox < wo; ++ox) {
        double s = bias[co];
        for (std::size_t ci = 0; ci < c; ++ci)
          for (std::size_t ky = 0; ky < 3; ++ky)
            for (std::size_t kx = 0; kx < 3; ++kx) {
              const long iy = static_cast<long>(oy + ky) - static_cast<long>(pad);
              const long ix = static_cast<long>(ox + kx) - static_cast<long>(pad);
              if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(wd)) continue;
              s += static_cast<double>(w.at(co, ci * 9 + ky * 3 + kx)) *
                   x[(ci * h + static_cast<std::size_t>(iy)) * wd + static_cast<std::size_t>(ix)];
            }
        y[(co * ho + oy) * wo + ox] = static_cast<float>(s);
      }
  return y;
}

}  // namespace

TEST(Matmul, IdentityLeavesOperandUnchanged) {
  Tensor eye({3, 3});
  for (std::size_t i = 0; i < 3; ++i) eye.at(i, i) = 1.0f;
  const Tensor a = random_tensor({3, 3}, 11);
  EXPECT_EQ(matmul(eye, a), a);
}

TEST(Matmul, HandArithmetic) {
  const Tensor a({2, 2}, std::vector<float>{1, 2, 3, 4});
  const Tensor b({2, 1}, std::vector<float>{0, 1});
  EXPECT_EQ(matmul(a, b), Tensor({2, 1}, std::vector<float>{2, 4}));
}

TEST(Matmul, MatchesTripleLoopOnRandom5x7x4) {
  const Tensor a = random_tensor({5, 7}, 1), b = random_tensor({7, 4}, 2);
  expect_close_rel(matmul(a, b), naive_matmul(a, b), 1e-6);
}

TEST(Matmul, RejectsMismatchedShapes) {
  EXPECT_THROW(matmul(Tensor({2, 3}), Tensor({2, 3})), ShapeError);
  EXPECT_THROW(matmul(Tensor({2, 3, 1}), Tensor({3, 1})), ShapeError);
}

TEST(Gemm, AllTransposeCombinationsAcrossBlockEdges) {
  // Sizes straddle the register and cache block boundaries.
  const std::size_t shapes[][3] = {{1, 1, 1}, {7, 33, 5}, {13, 65, 257}, {121, 40, 300}, {3, 2050, 9}};
  for (const auto& s : shapes) {
    const std::size_t m = s[0], n = s[1], k = s[2];
    const Tensor64 a = random_tensor<double>({m, k}, m * 7 + k), b = random_tensor<double>({k, n}, n * 3 + k);
    const Tensor64 want = naive_matmul(a, b);
    Tensor64 at({k, m}), bt({n, k});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) at.at(p, i) = a.at(i, p);
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t j = 0; j < n; ++j) bt.at(j, p) = b.at(p, j);
    for (Trans ta : {Trans::no, Trans::yes})
      for (Trans tb : {Trans::no, Trans::yes}) {
        Tensor64 c({m, n});
        const Tensor64& aa = ta == Trans::no ? a : at;
        const Tensor64& bb = tb == Trans::no ? b : bt;
        gemm<double>(ta, tb, m, n, k, aa.data(), ta == Trans::no ? k : m, bb.data(), tb == Trans::no ? n : k, 0.0,
                     c.data(), n);
        for (std::size_t i = 0; i < c.size(); ++i) ASSERT_NEAR(c[i], want[i], 1e-12 * (1.0 + std::fabs(want[i])));
      }
  }
}

TEST(Gemm, BetaOneAccumulates) {
  const Tensor64 a = random_tensor<double>({4, 6}, 3), b = random_tensor<double>({6, 5}, 4);
  Tensor64 c = random_tensor<double>({4, 5}, 5);
  const Tensor64 c0 = c;
  gemm<double>(Trans::no, Trans::no, 4, 5, 6, a.data(), 6, b.data(), 5, 1.0, c.data(), 5);
  const Tensor64 ab = naive_matmul(a, b);
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(c[i], c0[i] + ab[i], 1e-12);
}

TEST(Gemm, BetaZeroIgnoresGarbage) {
  const Tensor64 a = random_tensor<double>({2, 2}, 3), b = random_tensor<double>({2, 2}, 4);
  Tensor64 c({2, 2}, std::nan(""));
  gemm<double>(Trans::no, Trans::no, 2, 2, 2, a.data(), 2, b.data(), 2, 0.0, c.data(), 2);
  for (double v : c.values()) EXPECT_TRUE(std::isfinite(v));
}

TEST(Im2col, ChipInputShape) {
  const Tensor cols = im2col(Tensor({3, 150, 150}));
  EXPECT_EQ(cols.shape(), (Shape{27, 148 * 148}));
  EXPECT_EQ(cols.dim(1), 21904u);
}

TEST(Im2col, SingleWindowIsFlattenedInput) {
  const Tensor x = random_tensor({1, 3, 3}, 8);
  const Tensor cols = im2col(x);
  ASSERT_EQ(cols.shape(), (Shape{9, 1}));
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(cols[i], x[i]);
  EXPECT_EQ(im2col(x.reshaped({1, 1, 3, 3})), cols);
}

TEST(Im2col, RejectsUnsupportedKernelsAndSmallInputs) {
  EXPECT_THROW(im2col(Tensor({1, 5, 5}), 5), ShapeError);
  EXPECT_THROW(im2col(Tensor({1, 5, 5}), 3, 2), ShapeError);
  EXPECT_THROW(im2col(Tensor({1, 2, 5})), ShapeError);
}

TEST(Im2col, ConvViaMatmulMatchesNestedLoops) {
  const Tensor x = random_tensor({2, 5, 5}, 21);
  const Tensor w = random_tensor({4, 18}, 22);
  const Tensor bias = random_tensor({4}, 23);
  for (std::size_t pad : {0u, 1u}) {
    Tensor y = matmul(w, im2col(x, 3, 1, pad));
    const std::size_t pix = y.dim(1);
    for (std::size_t co = 0; co < 4; ++co)
      for (std::size_t j = 0; j < pix; ++j) y.at(co, j) += bias[co];
    const Tensor want = nested_loop_conv(x, w, bias, 4, pad);
    expect_close_rel(y.reshaped(want.shape()), want, 1e-6);
  }
}

TEST(Im2col, Col2imIsTheAdjoint) {
  // <im2col(x), c> == <x, col2im(c)> for every x, c.
  for (std::size_t pad : {0u, 1u}) {
    const ConvGeometry g{3, 6, 7, pad};
    const Tensor64 x = random_tensor<double>({3, 6, 7}, 31);
    const Tensor64 c = random_tensor<double>({g.patch_size(), g.out_pixels()}, 32);
    Tensor64 cols({g.patch_size(), g.out_pixels()});
    im2col_into(x.data(), g, cols.data());
    Tensor64 back({3, 6, 7});
    col2im_add(c.data(), g, back.data());
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) lhs += cols[i] * c[i];
    for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * back[i];
    EXPECT_NEAR(lhs, rhs, 1e-10);
  }
}

TEST(Resize, ConstantImageStaysConstant) {
  const Tensor out = resize_bilinear(Tensor({3, 127, 129}, 0.3f), 150, 150);
  EXPECT_EQ(out.shape(), (Shape{3, 150, 150}));
  for (float v : out.values()) ASSERT_EQ(v, 0.3f);
}

TEST(Resize, SameShapeIsExactCopy) {
  const Tensor x = random_tensor({3, 10, 12}, 4);
  EXPECT_EQ(resize_bilinear(x, 10, 12), x);
}

TEST(Resize, RowsMonotoneForHorizontalRamp) {
  const Tensor x({1, 2, 2}, std::vector<float>{0, 1, 0, 1});
  const Tensor out = resize_bilinear(x, 4, 4);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 1; c < 4; ++c) EXPECT_GE(out[r * 4 + c], out[r * 4 + c - 1]);
  // Corner alignment: column j samples source x = j/3.
  for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(out[c], static_cast<float>(c) / 3.0f, 1e-6);
}

TEST(Resize, OutputStaysWithinInputRange) {
  const Tensor x = random_tensor({2, 9, 13}, 77, 0.0, 1.0);
  const auto [lo, hi] = std::minmax_element(x.values().begin(), x.values().end());
  const Tensor out = resize_bilinear(x, 31, 7);
  for (float v : out.values()) {
    ASSERT_GE(v, *lo);
    ASSERT_LE(v, *hi);
  }
}
