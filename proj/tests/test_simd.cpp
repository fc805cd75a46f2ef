// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <vector>

#include "doctest.h"
#include "test_util.hpp"
#include "xmodal/simd/kernels.hpp"

using namespace xmodal;
using namespace xmodal::simd;

namespace {

template <class T>
std::vector<T> random_vec(std::size_t n, std::uint64_t seed) {
  auto t = test::random_tensor<T>({static_cast<std::int64_t>(n)}, seed);
  return {t.values().begin(), t.values().end()};
}

// Plain triple loop, independent of both kernel tables.
template <class T>
void naive_gemm(bool ta, bool tb, long m, long n, long k, T alpha, const T* a, long lda, const T* b, long ldb,
                T beta, T* c, long ldc) {
  for (long i = 0; i < m; ++i)
    for (long j = 0; j < n; ++j) {
      double acc = 0.0;
      for (long p = 0; p < k; ++p)
        acc += static_cast<double>(ta ? a[p * lda + i] : a[i * lda + p]) *
               static_cast<double>(tb ? b[j * ldb + p] : b[p * ldb + j]);
      c[i * ldc + j] = static_cast<T>(alpha * acc + beta * c[i * ldc + j]);
    }
}

template <class T>
void check_gemm(const KernelTable<T>& table, double tol) {
  const long shapes[][3] = {{1, 1, 1}, {5, 7, 3}, {6, 16, 256}, {13, 33, 300}, {130, 70, 40}, {7, 2100, 9}};
  std::uint64_t seed = 1;
  for (const auto& s : shapes)
    for (bool ta : {false, true})
      for (bool tb : {false, true})
        for (T beta : {T(0), T(1), T(0.5)}) {
          const long m = s[0], n = s[1], k = s[2];
          auto a = random_vec<T>(static_cast<std::size_t>(m * k), seed++);
          auto b = random_vec<T>(static_cast<std::size_t>(k * n), seed++);
          auto c0 = random_vec<T>(static_cast<std::size_t>(m * n), seed++);
          auto c1 = c0;
          const long lda = ta ? m : k, ldb = tb ? k : n;
          naive_gemm<T>(ta, tb, m, n, k, T(0.75), a.data(), lda, b.data(), ldb, beta, c0.data(), n);
          table.gemm(ta, tb, m, n, k, T(0.75), a.data(), lda, b.data(), ldb, beta, c1.data(), n);
          double worst = 0.0;
          for (std::size_t i = 0; i < c0.size(); ++i) worst = std::max(worst, std::abs(double(c0[i]) - double(c1[i])));
          INFO("m=" << m << " n=" << n << " k=" << k << " ta=" << ta << " tb=" << tb);
          CHECK(worst <= tol * std::sqrt(double(k)));
        }
}

template <class T>
void check_vector_kernels(const KernelTable<T>& ref, const KernelTable<T>& simd, double tol) {
  for (std::size_t n : {0u, 1u, 7u, 8u, 9u, 31u, 1000u, 4099u}) {
    auto x = random_vec<T>(n, 10 + n);
    auto y0 = random_vec<T>(n, 20 + n);
    auto y1 = y0;
    ref.axpy(static_cast<long>(n), T(-1.5), x.data(), y0.data());
    simd.axpy(static_cast<long>(n), T(-1.5), x.data(), y1.data());
    for (std::size_t i = 0; i < n; ++i) CHECK(y0[i] == doctest::Approx(y1[i]).epsilon(tol));
    CHECK(ref.sum(static_cast<long>(n), x.data()) == doctest::Approx(simd.sum(static_cast<long>(n), x.data())).epsilon(tol));
    CHECK(ref.dot(static_cast<long>(n), x.data(), y0.data()) ==
          doctest::Approx(simd.dot(static_cast<long>(n), x.data(), y0.data())).epsilon(tol));
    CHECK(ref.abs_diff_sum(static_cast<long>(n), x.data(), y0.data()) ==
          doctest::Approx(simd.abs_diff_sum(static_cast<long>(n), x.data(), y0.data())).epsilon(tol));

    auto p0 = random_vec<T>(n, 30 + n), g = random_vec<T>(n, 40 + n);
    auto m0 = random_vec<T>(n, 50 + n), v0 = random_vec<T>(n, 60 + n);
    for (auto& v : v0) v = std::abs(v);
    auto p1 = p0, m1 = m0, v1 = v0;
    ref.adam(static_cast<long>(n), p0.data(), g.data(), m0.data(), v0.data(), T(0.5), T(0.999), T(1e-3), T(0.9), T(1e-8));
    simd.adam(static_cast<long>(n), p1.data(), g.data(), m1.data(), v1.data(), T(0.5), T(0.999), T(1e-3), T(0.9), T(1e-8));
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(p0[i] == doctest::Approx(p1[i]).epsilon(tol));
      CHECK(m0[i] == doctest::Approx(m1[i]).epsilon(tol));
      CHECK(v0[i] == doctest::Approx(v1[i]).epsilon(tol));
    }
  }
}

}  // namespace

TEST_SUITE("simd") {
  TEST_CASE("scalar gemm matches the naive oracle") {
    check_gemm(scalar_kernels<float>(), 1e-5);
    check_gemm(scalar_kernels<double>(), 1e-12);
  }

  TEST_CASE("avx2 gemm matches the naive oracle") {
    if (!avx2_kernels<float>()) {
      MESSAGE("AVX2 unavailable on this host");
      return;
    }
    check_gemm(*avx2_kernels<float>(), 1e-5);
    check_gemm(*avx2_kernels<double>(), 1e-12);
  }

  TEST_CASE("avx2 vector kernels match scalar reference") {
    if (!avx2_kernels<float>()) return;
    check_vector_kernels(scalar_kernels<float>(), *avx2_kernels<float>(), 1e-5);
    check_vector_kernels(scalar_kernels<double>(), *avx2_kernels<double>(), 1e-12);
  }

  TEST_CASE("isa selection can be forced") {
    const Isa before = active_isa();
    set_active_isa(Isa::scalar);
    CHECK(active_isa() == Isa::scalar);
    CHECK(&kernels<float>() == &scalar_kernels<float>());
    if (avx2_kernels<float>()) {
      set_active_isa(Isa::avx2);
      CHECK(&kernels<float>() == avx2_kernels<float>());
    }
    set_active_isa(before);
    CHECK(std::string(isa_name(Isa::scalar)) == "scalar");
  }
}
