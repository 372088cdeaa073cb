#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace stormchip {

enum class Trans { no, yes };

namespace detail {

template <typename T>
struct GemmBlocking {
  static constexpr std::size_t mr = 6;
  static constexpr std::size_t nr = 64 / sizeof(T) * 2;  // two cache lines of C per row
  static constexpr std::size_t kc = 256;
  static constexpr std::size_t mc = 120;
  static constexpr std::size_t nc = 2048;
};

// Strided view of op(X): element (i, p) of the logical matrix.
template <typename T>
struct OperandView {
  const T* base;
  std::size_t ld;
  bool transposed;
  T operator()(std::size_t i, std::size_t p) const {
    return transposed ? base[p * ld + i] : base[i * ld + p];
  }
};

template <typename T>
void pack_a(const OperandView<T>& a, std::size_t i0, std::size_t m, std::size_t p0, std::size_t k,
            T* out) {
  constexpr std::size_t mr = GemmBlocking<T>::mr;
  for (std::size_t ip = 0; ip < m; ip += mr) {
    const std::size_t rows = std::min(mr, m - ip);
    for (std::size_t p = 0; p < k; ++p) {
      for (std::size_t ii = 0; ii < rows; ++ii) out[p * mr + ii] = a(i0 + ip + ii, p0 + p);
      for (std::size_t ii = rows; ii < mr; ++ii) out[p * mr + ii] = T{0};
    }
    out += k * mr;
  }
}

template <typename T>
void pack_b(const OperandView<T>& b, std::size_t p0, std::size_t k, std::size_t j0, std::size_t n,
            T* out) {
  constexpr std::size_t nr = GemmBlocking<T>::nr;
  for (std::size_t jp = 0; jp < n; jp += nr) {
    const std::size_t cols = std::min(nr, n - jp);
    for (std::size_t p = 0; p < k; ++p) {
      T* row = out + p * nr;
      if (!b.transposed) {
        const T* src = b.base + (p0 + p) * b.ld + j0 + jp;
        std::copy(src, src + cols, row);
      } else {
        for (std::size_t jj = 0; jj < cols; ++jj) row[jj] = b(p0 + p, j0 + jp + jj);
      }
      std::fill(row + cols, row + nr, T{0});
    }
    out += k * nr;
  }
}

template <typename T>
void micro_kernel(std::size_t k, const T* __restrict ap, const T* __restrict bp, T* c,
                  std::size_t ldc, std::size_t rows, std::size_t cols) {
  constexpr std::size_t mr = GemmBlocking<T>::mr;
  constexpr std::size_t nr = GemmBlocking<T>::nr;
  T acc[mr][nr] = {};
  for (std::size_t p = 0; p < k; ++p) {
    const T* a = ap + p * mr;
    const T* b = bp + p * nr;
    for (std::size_t i = 0; i < mr; ++i)
      for (std::size_t j = 0; j < nr; ++j) acc[i][j] += a[i] * b[j];
  }
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) c[i * ldc + j] += acc[i][j];
}

}  // namespace detail

// C = op(A) * op(B) + beta * C for row-major operands; op(A) is m x k,
// op(B) is k x n. The k-reduction order is fixed, so results do not depend
// on blocking or on how the output is partitioned.
template <typename T>
void gemm(Trans trans_a, Trans trans_b, std::size_t m, std::size_t n, std::size_t k, const T* a,
          std::size_t lda, const T* b, std::size_t ldb, T beta, T* c, std::size_t ldc) {
  using B = detail::GemmBlocking<T>;
  if (beta == T{0}) {
    for (std::size_t i = 0; i < m; ++i) std::fill(c + i * ldc, c + i * ldc + n, T{0});
  } else if (beta != T{1}) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) c[i * ldc + j] *= beta;
  }
  if (m == 0 || n == 0 || k == 0) return;

  const detail::OperandView<T> av{a, lda, trans_a == Trans::yes};
  const detail::OperandView<T> bv{b, ldb, trans_b == Trans::yes};

  thread_local std::vector<T> a_pack;
  thread_local std::vector<T> b_pack;
  a_pack.resize(B::mc * B::kc);
  b_pack.resize((B::nc + B::nr) * B::kc);

  for (std::size_t jc = 0; jc < n; jc += B::nc) {
    const std::size_t nc = std::min(B::nc, n - jc);
    for (std::size_t pc = 0; pc < k; pc += B::kc) {
      const std::size_t kc = std::min(B::kc, k - pc);
      detail::pack_b(bv, pc, kc, jc, nc, b_pack.data());
      for (std::size_t ic = 0; ic < m; ic += B::mc) {
        const std::size_t mc = std::min(B::mc, m - ic);
        detail::pack_a(av, ic, mc, pc, kc, a_pack.data());
        for (std::size_t jr = 0; jr < nc; jr += B::nr) {
          const T* bp = b_pack.data() + (jr / B::nr) * kc * B::nr;
          for (std::size_t ir = 0; ir < mc; ir += B::mr) {
            const T* ap = a_pack.data() + (ir / B::mr) * kc * B::mr;
            detail::micro_kernel(kc, ap, bp, c + (ic + ir) * ldc + jc + jr, ldc,
                                 std::min(B::mr, mc - ir), std::min(B::nr, nc - jr));
          }
        }
      }
    }
  }
}

}  // namespace stormchip
