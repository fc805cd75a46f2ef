// SPDX-License-Identifier: Apache-2.0
//
// AVX2 + FMA variants. This translation unit is the only one compiled with
// -mavx2 -mfma; nothing here may run before the dispatcher has checked CPUID.

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "kernels_internal.hpp"

namespace xmodal::simd::detail {
namespace {

struct F32 {
  using T = float;
  using V = __m256;
  static constexpr int kWidth = 8;
  static V zero() { return _mm256_setzero_ps(); }
  static V load(const T* p) { return _mm256_loadu_ps(p); }
  static void store(T* p, V v) { _mm256_storeu_ps(p, v); }
  static V bcast(T x) { return _mm256_set1_ps(x); }
  static V fmadd(V a, V b, V c) { return _mm256_fmadd_ps(a, b, c); }
  static V mul(V a, V b) { return _mm256_mul_ps(a, b); }
};

struct F64 {
  using T = double;
  using V = __m256d;
  static constexpr int kWidth = 4;
  static V zero() { return _mm256_setzero_pd(); }
  static V load(const T* p) { return _mm256_loadu_pd(p); }
  static void store(T* p, V v) { _mm256_storeu_pd(p, v); }
  static V bcast(T x) { return _mm256_set1_pd(x); }
  static V fmadd(V a, V b, V c) { return _mm256_fmadd_pd(a, b, c); }
  static V mul(V a, V b) { return _mm256_mul_pd(a, b); }
};

// Register tile is kMr rows by two vectors.
constexpr int kMr = 6;
constexpr std::int64_t kKc = 256;
constexpr std::int64_t kMc = 120;
constexpr std::int64_t kNc = 2048;

template <class Tr>
struct Gemm {
  using T = typename Tr::T;
  using V = typename Tr::V;
  static constexpr int kNr = 2 * Tr::kWidth;

  // acc[kMr][kNr] = packed_a(kc x kMr) * packed_b(kc x kNr), then
  // C(rows x cols) += alpha * acc.
  static void micro(std::int64_t kc, const T* pa, const T* pb, T* c,
                    std::int64_t ldc, T alpha, int rows, int cols) {
    V acc[kMr][2];
    for (int r = 0; r < kMr; ++r) acc[r][0] = acc[r][1] = Tr::zero();
    for (std::int64_t p = 0; p < kc; ++p) {
      const V b0 = Tr::load(pb);
      const V b1 = Tr::load(pb + Tr::kWidth);
      for (int r = 0; r < kMr; ++r) {
        const V ar = Tr::bcast(pa[r]);
        acc[r][0] = Tr::fmadd(ar, b0, acc[r][0]);
        acc[r][1] = Tr::fmadd(ar, b1, acc[r][1]);
      }
      pa += kMr;
      pb += kNr;
    }
    const V va = Tr::bcast(alpha);
    if (rows == kMr && cols == kNr) {
      for (int r = 0; r < kMr; ++r) {
        T* crow = c + r * ldc;
        Tr::store(crow, Tr::fmadd(va, acc[r][0], Tr::load(crow)));
        Tr::store(crow + Tr::kWidth,
                  Tr::fmadd(va, acc[r][1], Tr::load(crow + Tr::kWidth)));
      }
      return;
    }
    alignas(32) T tile[kMr * kNr];
    for (int r = 0; r < kMr; ++r) {
      Tr::store(tile + r * kNr, Tr::mul(va, acc[r][0]));
      Tr::store(tile + r * kNr + Tr::kWidth, Tr::mul(va, acc[r][1]));
    }
    for (int r = 0; r < rows; ++r)
      for (int j = 0; j < cols; ++j) c[r * ldc + j] += tile[r * kNr + j];
  }

  static void pack_a(bool trans, const T* a, std::int64_t lda, std::int64_t i0,
                     std::int64_t mc, std::int64_t p0, std::int64_t kc, T* dst) {
    for (std::int64_t ib = 0; ib < mc; ib += kMr) {
      const int rows = static_cast<int>(std::min<std::int64_t>(kMr, mc - ib));
      if (trans) {
        for (std::int64_t p = 0; p < kc; ++p) {
          const T* src = a + (p0 + p) * lda + i0 + ib;
          for (int r = 0; r < rows; ++r) dst[p * kMr + r] = src[r];
          for (int r = rows; r < kMr; ++r) dst[p * kMr + r] = T(0);
        }
      } else {
        for (int r = 0; r < rows; ++r) {
          const T* src = a + (i0 + ib + r) * lda + p0;
          for (std::int64_t p = 0; p < kc; ++p) dst[p * kMr + r] = src[p];
        }
        for (int r = rows; r < kMr; ++r)
          for (std::int64_t p = 0; p < kc; ++p) dst[p * kMr + r] = T(0);
      }
      dst += kMr * kc;
    }
  }

  static void pack_b(bool trans, const T* b, std::int64_t ldb, std::int64_t p0,
                     std::int64_t kc, std::int64_t j0, std::int64_t nc, T* dst) {
    for (std::int64_t jb = 0; jb < nc; jb += kNr) {
      const int cols = static_cast<int>(std::min<std::int64_t>(kNr, nc - jb));
      if (trans) {
        for (int j = 0; j < cols; ++j) {
          const T* src = b + (j0 + jb + j) * ldb + p0;
          for (std::int64_t p = 0; p < kc; ++p) dst[p * kNr + j] = src[p];
        }
        for (int j = cols; j < kNr; ++j)
          for (std::int64_t p = 0; p < kc; ++p) dst[p * kNr + j] = T(0);
      } else {
        for (std::int64_t p = 0; p < kc; ++p) {
          const T* src = b + (p0 + p) * ldb + j0 + jb;
          for (int j = 0; j < cols; ++j) dst[p * kNr + j] = src[j];
          for (int j = cols; j < kNr; ++j) dst[p * kNr + j] = T(0);
        }
      }
      dst += kNr * kc;
    }
  }

  static void run(bool trans_a, bool trans_b, std::int64_t m, std::int64_t n,
                  std::int64_t k, T alpha, const T* a, std::int64_t lda,
                  const T* b, std::int64_t ldb, T beta, T* c,
                  std::int64_t ldc) {
    for (std::int64_t i = 0; i < m; ++i) {
      T* crow = c + i * ldc;
      if (beta == T(0)) {
        std::fill(crow, crow + n, T(0));
      } else if (beta != T(1)) {
        for (std::int64_t j = 0; j < n; ++j) crow[j] *= beta;
      }
    }
    if (k == 0 || alpha == T(0)) return;

    thread_local std::vector<T> buf_a;
    thread_local std::vector<T> buf_b;
    const std::int64_t mc_max = std::min(kMc, m);
    const std::int64_t nc_max = std::min(kNc, n);
    const std::int64_t kc_max = std::min(kKc, k);
    buf_a.resize(static_cast<std::size_t>(((mc_max + kMr - 1) / kMr) * kMr * kc_max));
    buf_b.resize(static_cast<std::size_t>(((nc_max + kNr - 1) / kNr) * kNr * kc_max));

    for (std::int64_t jc = 0; jc < n; jc += kNc) {
      const std::int64_t nc = std::min(kNc, n - jc);
      for (std::int64_t pc = 0; pc < k; pc += kKc) {
        const std::int64_t kc = std::min(kKc, k - pc);
        pack_b(trans_b, b, ldb, pc, kc, jc, nc, buf_b.data());
        for (std::int64_t ic = 0; ic < m; ic += kMc) {
          const std::int64_t mc = std::min(kMc, m - ic);
          pack_a(trans_a, a, lda, ic, mc, pc, kc, buf_a.data());
          for (std::int64_t jr = 0; jr < nc; jr += kNr) {
            const int cols = static_cast<int>(std::min<std::int64_t>(kNr, nc - jr));
            const T* pb = buf_b.data() + (jr / kNr) * kNr * kc;
            for (std::int64_t ir = 0; ir < mc; ir += kMr) {
              const int rows = static_cast<int>(std::min<std::int64_t>(kMr, mc - ir));
              const T* pa = buf_a.data() + (ir / kMr) * kMr * kc;
              micro(kc, pa, pb, c + (ic + ir) * ldc + jc + jr, ldc, alpha, rows,
                    cols);
            }
          }
        }
      }
    }
  }
};

template <class Tr>
void axpy(std::int64_t n, typename Tr::T alpha, const typename Tr::T* x,
          typename Tr::T* y) {
  const auto va = Tr::bcast(alpha);
  std::int64_t i = 0;
  for (; i + Tr::kWidth <= n; i += Tr::kWidth)
    Tr::store(y + i, Tr::fmadd(va, Tr::load(x + i), Tr::load(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// Lane-wise double accumulation; four lanes of doubles per vector.
inline __m256d widen_lo(__m256 v) { return _mm256_cvtps_pd(_mm256_castps256_ps128(v)); }
inline __m256d widen_hi(__m256 v) { return _mm256_cvtps_pd(_mm256_extractf128_ps(v, 1)); }

inline double hsum(__m256d v) {
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, v);
  return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

double sum_f32(std::int64_t n, const float* x) {
  __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
  std::int64_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(x + i);
    a0 = _mm256_add_pd(a0, widen_lo(v));
    a1 = _mm256_add_pd(a1, widen_hi(v));
  }
  double s = hsum(_mm256_add_pd(a0, a1));
  for (; i < n; ++i) s += x[i];
  return s;
}

double sum_f64(std::int64_t n, const double* x) {
  __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
  std::int64_t i = 0;
  for (; i + 8 <= n; i += 8) {
    a0 = _mm256_add_pd(a0, _mm256_loadu_pd(x + i));
    a1 = _mm256_add_pd(a1, _mm256_loadu_pd(x + i + 4));
  }
  double s = hsum(_mm256_add_pd(a0, a1));
  for (; i < n; ++i) s += x[i];
  return s;
}

double dot_f32(std::int64_t n, const float* x, const float* y) {
  __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
  std::int64_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 vx = _mm256_loadu_ps(x + i);
    const __m256 vy = _mm256_loadu_ps(y + i);
    a0 = _mm256_fmadd_pd(widen_lo(vx), widen_lo(vy), a0);
    a1 = _mm256_fmadd_pd(widen_hi(vx), widen_hi(vy), a1);
  }
  double s = hsum(_mm256_add_pd(a0, a1));
  for (; i < n; ++i) s += static_cast<double>(x[i]) * y[i];
  return s;
}

double dot_f64(std::int64_t n, const double* x, const double* y) {
  __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
  std::int64_t i = 0;
  for (; i + 8 <= n; i += 8) {
    a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), a0);
    a1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), a1);
  }
  double s = hsum(_mm256_add_pd(a0, a1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

inline __m256d abs_pd(__m256d v) {
  return _mm256_andnot_pd(_mm256_set1_pd(-0.0), v);
}

double abs_diff_sum_f32(std::int64_t n, const float* x, const float* y) {
  __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
  std::int64_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 vx = _mm256_loadu_ps(x + i);
    const __m256 vy = _mm256_loadu_ps(y + i);
    a0 = _mm256_add_pd(a0, abs_pd(_mm256_sub_pd(widen_lo(vx), widen_lo(vy))));
    a1 = _mm256_add_pd(a1, abs_pd(_mm256_sub_pd(widen_hi(vx), widen_hi(vy))));
  }
  double s = hsum(_mm256_add_pd(a0, a1));
  for (; i < n; ++i) s += std::abs(static_cast<double>(x[i]) - y[i]);
  return s;
}

double abs_diff_sum_f64(std::int64_t n, const double* x, const double* y) {
  __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
  std::int64_t i = 0;
  for (; i + 8 <= n; i += 8) {
    a0 = _mm256_add_pd(a0, abs_pd(_mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i))));
    a1 = _mm256_add_pd(a1, abs_pd(_mm256_sub_pd(_mm256_loadu_pd(x + i + 4),
                                                _mm256_loadu_pd(y + i + 4))));
  }
  double s = hsum(_mm256_add_pd(a0, a1));
  for (; i < n; ++i) s += std::abs(x[i] - y[i]);
  return s;
}

template <class Tr>
void adam(std::int64_t n, typename Tr::T* param, const typename Tr::T* grad,
          typename Tr::T* m, typename Tr::T* v, typename Tr::T beta1,
          typename Tr::T beta2, typename Tr::T step_size,
          typename Tr::T v_scale, typename Tr::T eps) {
  using T = typename Tr::T;
  const auto b1 = Tr::bcast(beta1), c1 = Tr::bcast(T(1) - beta1);
  const auto b2 = Tr::bcast(beta2), c2 = Tr::bcast(T(1) - beta2);
  const auto vs = Tr::bcast(v_scale), ve = Tr::bcast(eps), vstep = Tr::bcast(step_size);
  std::int64_t i = 0;
  for (; i + Tr::kWidth <= n; i += Tr::kWidth) {
    const auto g = Tr::load(grad + i);
    const auto mi = Tr::fmadd(b1, Tr::load(m + i), Tr::mul(c1, g));
    const auto vi = Tr::fmadd(b2, Tr::load(v + i), Tr::mul(c2, Tr::mul(g, g)));
    Tr::store(m + i, mi);
    Tr::store(v + i, vi);
    typename Tr::V denom;
    if constexpr (Tr::kWidth == 8) {
      denom = _mm256_add_ps(_mm256_sqrt_ps(_mm256_mul_ps(vi, vs)), ve);
      Tr::store(param + i, _mm256_sub_ps(Tr::load(param + i),
                                         _mm256_div_ps(_mm256_mul_ps(vstep, mi), denom)));
    } else {
      denom = _mm256_add_pd(_mm256_sqrt_pd(_mm256_mul_pd(vi, vs)), ve);
      Tr::store(param + i, _mm256_sub_pd(Tr::load(param + i),
                                         _mm256_div_pd(_mm256_mul_pd(vstep, mi), denom)));
    }
  }
  for (; i < n; ++i) {
    const T g = grad[i];
    m[i] = beta1 * m[i] + (T(1) - beta1) * g;
    v[i] = beta2 * v[i] + (T(1) - beta2) * g * g;
    param[i] -= step_size * m[i] / (std::sqrt(v[i] * v_scale) + eps);
  }
}

const KernelTable<float> kAvx2F32 = {&Gemm<F32>::run, &axpy<F32>, &sum_f32,
                                     &dot_f32, &abs_diff_sum_f32, &adam<F32>};
const KernelTable<double> kAvx2F64 = {&Gemm<F64>::run, &axpy<F64>, &sum_f64,
                                      &dot_f64, &abs_diff_sum_f64, &adam<F64>};

}  // namespace

const KernelTable<float>* avx2_table_f32() { return &kAvx2F32; }
const KernelTable<double>* avx2_table_f64() { return &kAvx2F64; }

}  // namespace xmodal::simd::detail
