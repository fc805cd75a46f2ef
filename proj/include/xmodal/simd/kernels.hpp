// SPDX-License-Identifier: Apache-2.0
//
// Data-parallel inner loops. Every kernel exists as a portable scalar
// reference and as an AVX2/FMA variant; the active table is chosen once at
// startup from CPUID and can be overridden with XMODAL_SIMD=scalar|avx2.

#pragma once

#include <cstdint>
#include <string_view>

namespace xmodal::simd {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

/// Best instruction set supported by this CPU (and compiled in).
Isa detected_isa();

/// Instruction set used by kernels<T>(). Initialised from detected_isa()
/// unless XMODAL_SIMD requests a different (supported) one.
Isa active_isa();

/// Overrides the active ISA. Requests for an unsupported ISA fall back to
/// scalar. Not thread-safe; intended for tests and benchmarks.
void set_active_isa(Isa isa);

template <class T>
struct KernelTable {
  /// Row-major C = alpha * op(A) * op(B) + beta * C, op(A) is m x k, op(B) is k x n.
  /// beta == 0 overwrites C without reading it.
  void (*gemm)(bool trans_a, bool trans_b, std::int64_t m, std::int64_t n,
               std::int64_t k, T alpha, const T* a, std::int64_t lda,
               const T* b, std::int64_t ldb, T beta, T* c, std::int64_t ldc);
  /// y += alpha * x
  void (*axpy)(std::int64_t n, T alpha, const T* x, T* y);
  /// sum(x), accumulated in double
  double (*sum)(std::int64_t n, const T* x);
  /// sum(x * y), accumulated in double
  double (*dot)(std::int64_t n, const T* x, const T* y);
  /// sum(|x - y|), accumulated in double
  double (*abs_diff_sum)(std::int64_t n, const T* x, const T* y);
  /// Adam moment update and parameter step; step_size already includes the
  /// first-moment bias correction, v_scale = 1 / (1 - beta2^t).
  void (*adam)(std::int64_t n, T* param, const T* grad, T* m, T* v, T beta1,
               T beta2, T step_size, T v_scale, T eps);
};

template <class T>
const KernelTable<T>& kernels();

template <class T>
const KernelTable<T>& scalar_kernels();

/// nullptr when the AVX2 variant was not compiled in or the CPU lacks it.
template <class T>
const KernelTable<T>* avx2_kernels();

}  // namespace xmodal::simd
