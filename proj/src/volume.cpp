// SPDX-License-Identifier: Apache-2.0

#include "xmodal/volume.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "xmodal/error.hpp"

namespace xmodal {

std::string to_string(const Dims& dims) {
  return std::to_string(dims.d) + "x" + std::to_string(dims.h) + "x" + std::to_string(dims.w);
}

Volume::Volume(Dims dims, float fill, std::array<float, 3> spacing)
    : dims_(dims), spacing_(spacing) {
  if (dims.d < 1 || dims.h < 1 || dims.w < 1)
    throw UsageError("volume dimensions must be positive, got " + to_string(dims));
  data_.assign(static_cast<std::size_t>(dims.voxels()), fill);
}

Volume::Volume(Dims dims, std::vector<float> data, std::array<float, 3> spacing)
    : dims_(dims), spacing_(spacing), data_(std::move(data)) {
  if (dims.d < 1 || dims.h < 1 || dims.w < 1)
    throw UsageError("volume dimensions must be positive, got " + to_string(dims));
  if (static_cast<std::int64_t>(data_.size()) != dims.voxels())
    throw DataError("volume data holds " + std::to_string(data_.size()) + " voxels, expected " +
                    std::to_string(dims.voxels()));
}

void validate(const PairedSample& sample) {
  if (!(sample.mri.dims() == sample.pet.dims()))
    throw DataError("subject " + sample.subject_id + ": MRI " + to_string(sample.mri.dims()) +
                    " and PET " + to_string(sample.pet.dims()) + " are not co-registered");
  if (!(sample.abeta_ratio > 0.0) || !std::isfinite(sample.abeta_ratio))
    throw DataError("subject " + sample.subject_id + ": abeta ratio must be positive");
}

void validate(const NormalizationStats& stats) {
  for (const auto* r : {&stats.mri, &stats.pet, &stats.abeta}) {
    if (!std::isfinite(r->lo) || !std::isfinite(r->hi) || !(r->hi > r->lo))
      throw UsageError("normalization range requires finite lo < hi");
  }
}

NormalizationStats compute_normalization_stats(std::span<const PairedSample> samples) {
  if (samples.empty()) throw DataError("cannot compute normalization stats from zero samples");
  constexpr double inf = std::numeric_limits<double>::infinity();
  NormalizationStats s{{inf, -inf}, {inf, -inf}, {inf, -inf}};
  auto widen = [](IntensityRange& r, const Volume& v) {
    const auto [lo, hi] = std::minmax_element(v.values().begin(), v.values().end());
    r.lo = std::min(r.lo, static_cast<double>(*lo));
    r.hi = std::max(r.hi, static_cast<double>(*hi));
  };
  for (const auto& sample : samples) {
    widen(s.mri, sample.mri);
    widen(s.pet, sample.pet);
    s.abeta.lo = std::min(s.abeta.lo, sample.abeta_ratio);
    s.abeta.hi = std::max(s.abeta.hi, sample.abeta_ratio);
  }
  // Degenerate ranges (constant images, a single subject) get unit width.
  for (auto* r : {&s.mri, &s.pet, &s.abeta})
    if (!(r->hi > r->lo)) r->hi = r->lo + 1.0;
  return s;
}

void require_finite(const Volume& v, const std::string& what) {
  for (std::int64_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v.values()[static_cast<std::size_t>(i)]))
      throw DataError(what + ": non-finite intensity at voxel " + std::to_string(i));
  }
}

Volume normalize_intensity(const Volume& v, const IntensityRange& range) {
  if (!std::isfinite(range.lo) || !std::isfinite(range.hi) || !(range.hi > range.lo))
    throw UsageError("normalize_intensity requires finite lo < hi");
  require_finite(v, "normalize_intensity");
  Volume out(v.dims(), 0.0f, v.spacing());
  const double inv = 1.0 / (range.hi - range.lo);
  auto src = v.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double y = (static_cast<double>(src[i]) - range.lo) * inv * 2.0 - 1.0;
    dst[i] = static_cast<float>(std::clamp(y, -1.0, 1.0));
  }
  return out;
}

Volume denormalize_intensity(const Volume& v, const IntensityRange& range) {
  require_finite(v, "denormalize_intensity");
  Volume out(v.dims(), 0.0f, v.spacing());
  const double half_width = 0.5 * (range.hi - range.lo);
  auto src = v.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i)
    dst[i] = static_cast<float>((static_cast<double>(src[i]) + 1.0) * half_width + range.lo);
  return out;
}

double normalize_abeta(double ratio, const IntensityRange& range) {
  if (!std::isfinite(ratio)) throw DataError("non-finite abeta ratio");
  if (!(range.hi > range.lo)) throw UsageError("abeta normalization requires lo < hi");
  return std::clamp((ratio - range.lo) / (range.hi - range.lo), 0.0, 1.0);
}

Volume resample_trilinear(const Volume& v, Dims target) {
  if (target.d < 1 || target.h < 1 || target.w < 1)
    throw UsageError("resample target must be positive, got " + to_string(target));
  const Dims in = v.dims();
  struct Tap {
    std::int64_t i0, i1;
    double t;
  };
  auto taps = [](std::int64_t n_in, std::int64_t n_out) {
    std::vector<Tap> out(static_cast<std::size_t>(n_out));
    const double scale = static_cast<double>(n_in) / static_cast<double>(n_out);
    for (std::int64_t o = 0; o < n_out; ++o) {
      double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
      src = std::clamp(src, 0.0, static_cast<double>(n_in - 1));
      const auto i0 = static_cast<std::int64_t>(std::floor(src));
      const auto i1 = std::min(i0 + 1, n_in - 1);
      out[static_cast<std::size_t>(o)] = {i0, i1, src - static_cast<double>(i0)};
    }
    return out;
  };
  const auto tz = taps(in.d, target.d), ty = taps(in.h, target.h), tx = taps(in.w, target.w);
  Volume out(target, 0.0f, v.spacing());
  std::array<float, 3> spacing = v.spacing();
  spacing[0] *= static_cast<float>(in.d) / static_cast<float>(target.d);
  spacing[1] *= static_cast<float>(in.h) / static_cast<float>(target.h);
  spacing[2] *= static_cast<float>(in.w) / static_cast<float>(target.w);
  out.set_spacing(spacing);
  for (std::int64_t z = 0; z < target.d; ++z) {
    const Tap& a = tz[static_cast<std::size_t>(z)];
    for (std::int64_t y = 0; y < target.h; ++y) {
      const Tap& b = ty[static_cast<std::size_t>(y)];
      for (std::int64_t x = 0; x < target.w; ++x) {
        const Tap& c = tx[static_cast<std::size_t>(x)];
        auto lerp_x = [&](std::int64_t zz, std::int64_t yy) {
          return (1.0 - c.t) * v.at(zz, yy, c.i0) + c.t * v.at(zz, yy, c.i1);
        };
        const double v0 = (1.0 - b.t) * lerp_x(a.i0, b.i0) + b.t * lerp_x(a.i0, b.i1);
        const double v1 = (1.0 - b.t) * lerp_x(a.i1, b.i0) + b.t * lerp_x(a.i1, b.i1);
        out.at(z, y, x) = static_cast<float>((1.0 - a.t) * v0 + a.t * v1);
      }
    }
  }
  return out;
}

Volume broadcast_scalar(double s, Dims dims) {
  if (!std::isfinite(s)) throw UsageError("broadcast_scalar of a non-finite value");
  return Volume(dims, static_cast<float>(s));
}

Tensor<float> broadcast_scalar(double s, const Shape& shape) {
  if (!std::isfinite(s)) throw UsageError("broadcast_scalar of a non-finite value");
  for (auto d : shape)
    if (d < 1) throw UsageError("broadcast_scalar shape components must be >= 1");
  return Tensor<float>(shape, static_cast<float>(s));
}

double mean(const Volume& v) {
  double s = 0.0;
  for (float x : v.values()) s += x;
  return s / static_cast<double>(v.size());
}

double variance(const Volume& v) {
  const double mu = mean(v);
  double s = 0.0;
  for (float x : v.values()) s += (x - mu) * (x - mu);
  return s / static_cast<double>(v.size());
}

template <class T>
Tensor<T> to_tensor(const Volume& v) {
  const Dims d = v.dims();
  return Tensor<T>({1, 1, d.d, d.h, d.w}, std::vector<T>(v.values().begin(), v.values().end()));
}

template Tensor<float> to_tensor<float>(const Volume&);
template Tensor<double> to_tensor<double>(const Volume&);

Volume from_tensor(const Tensor<float>& t, std::int64_t sample, std::array<float, 3> spacing) {
  if (t.rank() != 5 || t.dim(1) != 1)
    throw UsageError("expected a single-channel (N,1,D,H,W) tensor, got " + to_string(t.shape()));
  const Dims d{t.dim(2), t.dim(3), t.dim(4)};
  const auto begin = t.values().begin() + sample * d.voxels();
  return Volume(d, std::vector<float>(begin, begin + d.voxels()), spacing);
}

}  // namespace xmodal
