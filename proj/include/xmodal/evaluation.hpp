// SPDX-License-Identifier: Apache-2.0
//
// Test-set evaluation of a trained checkpoint.

#pragma once

#include "xmodal/checkpoint.hpp"
#include "xmodal/dataset.hpp"
#include "xmodal/metrics.hpp"

namespace xmodal {

/// One row per manifest entry, in manifest order. SUVR columns are filled
/// only when `masks` is non-null.
EvalReport evaluate_testset(const Checkpoint& ckpt, const Manifest& test, const RegionMasks* masks = nullptr);

}  // namespace xmodal
