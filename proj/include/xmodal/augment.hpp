// SPDX-License-Identifier: Apache-2.0
//
// Seeded 3-D augmentations for normalized volumes and the random pipeline
// used during training. Geometric transforms are always shared between the
// two modalities of a pair.

#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "xmodal/volume.hpp"

namespace xmodal {

struct AugmentConfig {
  double noise_sigma = 0.02;
  double smooth_sigma = 1.0;  // voxels
  std::array<double, 3> max_rotation_deg{10.0, 10.0, 10.0};
  std::vector<int> flip_axes{0, 1, 2};
  double brightness_delta = 0.1;
  std::array<double, 2> contrast_range{0.9, 1.1};
  std::array<int, 3> max_translation_voxels{8, 8, 8};
  std::uint64_t seed = 0;
  /// Fill for voxels exposed by rotation/translation, and the lower clamp of
  /// brightness/contrast.
  float fill_value = -1.0f;
  float clamp_hi = 1.0f;

  bool operator==(const AugmentConfig&) const = default;
};

/// Throws UsageError when a field violates its constraint.
void validate(const AugmentConfig& cfg);

Volume additive_gaussian_noise(const Volume& v, double sigma, std::mt19937_64& rng);

/// Separable recursive (IIR) approximation of Gaussian smoothing with
/// symmetric boundary extension.
Volume recursive_gaussian_smooth(const Volume& v, double sigma);

/// Rotation about the volume centre by the given angles (degrees) about axes
/// 0, 1 and 2, applied in that order. Trilinear; out-of-field voxels take `fill`.
Volume rotate(const Volume& v, const std::array<double, 3>& angles_deg, float fill);

/// Draws angles uniformly within +-max_rotation_deg and rotates.
Volume random_rotation(const Volume& v, const std::array<double, 3>& max_deg, float fill,
                       std::mt19937_64& rng);

Volume flip(const Volume& v, int axis);

/// gain * (v - mean) + mean + delta, clamped to [lo, hi].
Volume brightness_contrast(const Volume& v, double delta, double gain, float lo, float hi);

/// Integer shift along (axis0, axis1, axis2); exposed voxels take `fill`.
Volume translate(const Volume& v, const std::array<int, 3>& offset, float fill);

enum class AugmentStep { smooth, noise, rotation, flip, translation, brightness_contrast };
inline constexpr std::array<AugmentStep, 6> kCanonicalAugmentOrder{
    AugmentStep::smooth,      AugmentStep::noise,       AugmentStep::rotation,
    AugmentStep::flip,        AugmentStep::translation, AugmentStep::brightness_contrast};

/// Record of one pipeline draw, for inspection and tests.
struct AugmentDraw {
  std::vector<AugmentStep> steps;
  std::array<double, 3> angles_deg{};
  int flip_axis = -1;
  std::array<int, 3> offset{};
};

/// Applies a uniformly drawn non-empty subset of the six augmentations in
/// canonical order. Geometry is shared by MRI and PET; intensity parameters
/// are drawn independently per modality. abeta_ratio is untouched.
PairedSample compose_random_pipeline(const PairedSample& sample, const AugmentConfig& cfg,
                                     std::mt19937_64& rng, AugmentDraw* draw = nullptr);

}  // namespace xmodal
