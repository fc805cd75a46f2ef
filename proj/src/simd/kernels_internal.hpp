// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "xmodal/simd/kernels.hpp"

namespace xmodal::simd::detail {

#ifdef XMODAL_HAVE_AVX2
const KernelTable<float>* avx2_table_f32();
const KernelTable<double>* avx2_table_f64();
#endif

}  // namespace xmodal::simd::detail
