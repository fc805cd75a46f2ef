// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstdint>

#include "xmodal/simd/kernels.hpp"

namespace xmodal::simd {
namespace {

template <class T>
void gemm_ref(bool trans_a, bool trans_b, std::int64_t m, std::int64_t n,
              std::int64_t k, T alpha, const T* a, std::int64_t lda,
              const T* b, std::int64_t ldb, T beta, T* c, std::int64_t ldc) {
  for (std::int64_t i = 0; i < m; ++i) {
    T* crow = c + i * ldc;
    if (beta == T(0)) {
      for (std::int64_t j = 0; j < n; ++j) crow[j] = T(0);
    } else if (beta != T(1)) {
      for (std::int64_t j = 0; j < n; ++j) crow[j] *= beta;
    }
    for (std::int64_t p = 0; p < k; ++p) {
      const T aip = alpha * (trans_a ? a[p * lda + i] : a[i * lda + p]);
      if (aip == T(0)) continue;
      if (trans_b) {
        for (std::int64_t j = 0; j < n; ++j) crow[j] += aip * b[j * ldb + p];
      } else {
        const T* brow = b + p * ldb;
        for (std::int64_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
      }
    }
  }
}

template <class T>
void axpy_ref(std::int64_t n, T alpha, const T* x, T* y) {
  for (std::int64_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <class T>
double sum_ref(std::int64_t n, const T* x) {
  double s = 0.0;
  for (std::int64_t i = 0; i < n; ++i) s += static_cast<double>(x[i]);
  return s;
}

template <class T>
double dot_ref(std::int64_t n, const T* x, const T* y) {
  double s = 0.0;
  for (std::int64_t i = 0; i < n; ++i)
    s += static_cast<double>(x[i]) * static_cast<double>(y[i]);
  return s;
}

template <class T>
double abs_diff_sum_ref(std::int64_t n, const T* x, const T* y) {
  double s = 0.0;
  for (std::int64_t i = 0; i < n; ++i)
    s += std::abs(static_cast<double>(x[i]) - static_cast<double>(y[i]));
  return s;
}

template <class T>
void adam_ref(std::int64_t n, T* param, const T* grad, T* m, T* v, T beta1,
              T beta2, T step_size, T v_scale, T eps) {
  for (std::int64_t i = 0; i < n; ++i) {
    const T g = grad[i];
    m[i] = beta1 * m[i] + (T(1) - beta1) * g;
    v[i] = beta2 * v[i] + (T(1) - beta2) * g * g;
    param[i] -= step_size * m[i] / (std::sqrt(v[i] * v_scale) + eps);
  }
}

template <class T>
constexpr KernelTable<T> make_scalar_table() {
  return {&gemm_ref<T>,         &axpy_ref<T>,         &sum_ref<T>,
          &dot_ref<T>,          &abs_diff_sum_ref<T>, &adam_ref<T>};
}

constexpr KernelTable<float> kScalarF32 = make_scalar_table<float>();
constexpr KernelTable<double> kScalarF64 = make_scalar_table<double>();

}  // namespace

template <>
const KernelTable<float>& scalar_kernels<float>() {
  return kScalarF32;
}
template <>
const KernelTable<double>& scalar_kernels<double>() {
  return kScalarF64;
}

}  // namespace xmodal::simd
