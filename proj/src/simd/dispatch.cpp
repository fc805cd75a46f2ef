// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <string_view>

#include "kernels_internal.hpp"

namespace xmodal::simd {
namespace {

bool cpu_has_avx2() {
#if defined(XMODAL_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa initial_isa() {
  const Isa best = detected_isa();
  if (const char* env = std::getenv("XMODAL_SIMD")) {
    const std::string_view req(env);
    if (req == "scalar") return Isa::scalar;
    if (req == "avx2" && best == Isa::avx2) return Isa::avx2;
  }
  return best;
}

Isa& active_slot() {
  static Isa isa = initial_isa();
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
  }
  return "unknown";
}

Isa detected_isa() {
  static const Isa isa = cpu_has_avx2() ? Isa::avx2 : Isa::scalar;
  return isa;
}

Isa active_isa() { return active_slot(); }

void set_active_isa(Isa isa) {
  active_slot() = (isa == Isa::avx2 && detected_isa() != Isa::avx2) ? Isa::scalar : isa;
}

template <>
const KernelTable<float>* avx2_kernels<float>() {
#ifdef XMODAL_HAVE_AVX2
  if (detected_isa() == Isa::avx2) return detail::avx2_table_f32();
#endif
  return nullptr;
}

template <>
const KernelTable<double>* avx2_kernels<double>() {
#ifdef XMODAL_HAVE_AVX2
  if (detected_isa() == Isa::avx2) return detail::avx2_table_f64();
#endif
  return nullptr;
}

template <class T>
const KernelTable<T>& kernels() {
  if (active_isa() == Isa::avx2) {
    if (const auto* table = avx2_kernels<T>()) return *table;
  }
  return scalar_kernels<T>();
}

template const KernelTable<float>& kernels<float>();
template const KernelTable<double>& kernels<double>();

}  // namespace xmodal::simd
