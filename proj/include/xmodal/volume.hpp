// SPDX-License-Identifier: Apache-2.0
//
// Volumetric data model shared by every stage of the pipeline.

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "xmodal/tensor.hpp"

namespace xmodal {

struct Dims {
  std::int64_t d = 1, h = 1, w = 1;
  std::int64_t voxels() const { return d * h * w; }
  bool operator==(const Dims&) const = default;
};

std::string to_string(const Dims& dims);

/// 3-D scalar grid, W fastest. Spacing is metadata only.
class Volume {
 public:
  Volume() = default;
  explicit Volume(Dims dims, float fill = 0.0f, std::array<float, 3> spacing = {1.0f, 1.0f, 1.0f});
  Volume(Dims dims, std::vector<float> data, std::array<float, 3> spacing = {1.0f, 1.0f, 1.0f});

  const Dims& dims() const { return dims_; }
  const std::array<float, 3>& spacing() const { return spacing_; }
  void set_spacing(std::array<float, 3> spacing) { spacing_ = spacing; }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }
  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }

  std::int64_t index(std::int64_t z, std::int64_t y, std::int64_t x) const {
    return (z * dims_.h + y) * dims_.w + x;
  }
  float& at(std::int64_t z, std::int64_t y, std::int64_t x) { return data_[static_cast<std::size_t>(index(z, y, x))]; }
  float at(std::int64_t z, std::int64_t y, std::int64_t x) const { return data_[static_cast<std::size_t>(index(z, y, x))]; }

  bool operator==(const Volume&) const = default;

 private:
  Dims dims_;
  std::array<float, 3> spacing_{1.0f, 1.0f, 1.0f};
  std::vector<float> data_;
};

/// Co-registered MRI/PET pair with the subject's plasma Abeta42/40 ratio.
struct PairedSample {
  std::string subject_id;
  Volume mri;
  Volume pet;
  double abeta_ratio = 0.0;
};

/// Throws DataError when the pair is not co-registered or the ratio is not positive.
void validate(const PairedSample& sample);

struct IntensityRange {
  double lo = 0.0;
  double hi = 1.0;
  bool operator==(const IntensityRange&) const = default;
};

struct NormalizationStats {
  IntensityRange mri;
  IntensityRange pet;
  IntensityRange abeta;
  bool operator==(const NormalizationStats&) const = default;
};

void validate(const NormalizationStats& stats);

/// Min/max statistics over a set of samples (the training split).
NormalizationStats compute_normalization_stats(std::span<const PairedSample> samples);

/// Affine map of [lo, hi] onto [-1, 1], clamped.
Volume normalize_intensity(const Volume& v, const IntensityRange& range);
/// Inverse affine map of [-1, 1] onto [lo, hi].
Volume denormalize_intensity(const Volume& v, const IntensityRange& range);
/// Min-max map of the ratio onto [0, 1], clamped.
double normalize_abeta(double ratio, const IntensityRange& range);

/// Trilinear resampling, half-voxel (align-corners false) coordinate mapping.
Volume resample_trilinear(const Volume& v, Dims target);

/// Constant field; throws on non-finite fill.
Volume broadcast_scalar(double s, Dims dims);
/// Constant tensor of arbitrary shape, e.g. a (1, D, H, W) feature channel.
Tensor<float> broadcast_scalar(double s, const Shape& shape);

/// Throws DataError naming the first non-finite voxel.
void require_finite(const Volume& v, const std::string& what);

double mean(const Volume& v);
double variance(const Volume& v);

/// Volume <-> (1, 1, D, H, W) network tensor.
template <class T>
Tensor<T> to_tensor(const Volume& v);
Volume from_tensor(const Tensor<float>& t, std::int64_t sample = 0, std::array<float, 3> spacing = {1.0f, 1.0f, 1.0f});

}  // namespace xmodal
