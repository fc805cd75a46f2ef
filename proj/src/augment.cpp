// SPDX-License-Identifier: Apache-2.0

#include "xmodal/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "xmodal/error.hpp"

namespace xmodal {

void validate(const AugmentConfig& cfg) {
  if (!(cfg.noise_sigma >= 0.0)) throw UsageError("augment noise_sigma must be >= 0");
  if (!(cfg.smooth_sigma > 0.0)) throw UsageError("augment smooth_sigma must be > 0");
  if (!(cfg.contrast_range[0] <= cfg.contrast_range[1]))
    throw UsageError("augment contrast range requires lo <= hi");
  for (double a : cfg.max_rotation_deg)
    if (!(a >= 0.0)) throw UsageError("augment max rotation must be >= 0");
  for (int t : cfg.max_translation_voxels)
    if (t < 0) throw UsageError("augment translations must be >= 0");
  for (int a : cfg.flip_axes)
    if (a < 0 || a > 2) throw UsageError("augment flip axes must be in {0,1,2}");
  if (!(cfg.brightness_delta >= 0.0)) throw UsageError("augment brightness delta must be >= 0");
}

Volume additive_gaussian_noise(const Volume& v, double sigma, std::mt19937_64& rng) {
  if (!(sigma >= 0.0)) throw UsageError("noise sigma must be >= 0");
  Volume out = v;
  if (sigma == 0.0) return out;
  std::normal_distribution<double> noise(0.0, sigma);
  for (float& x : out.values()) x = static_cast<float>(x + noise(rng));
  return out;
}

namespace {

std::int64_t mirror(std::int64_t i, std::int64_t n) {
  const std::int64_t period = 2 * n;
  std::int64_t m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - 1 - m;
}

// Deriche fourth-order recursive Gaussian: causal and anti-causal
// sections summed, normalised to unit DC gain.
struct RecursiveCoeffs {
  std::array<double, 4> n;  // causal feed-forward n0..n3
  std::array<double, 4> m;  // anti-causal feed-forward m1..m4
  std::array<double, 4> d;  // shared feedback d1..d4
  double causal_dc = 0.0, anticausal_dc = 0.0;
};

RecursiveCoeffs recursive_coeffs(double sigma) {
  const double a0 = 1.680, a1 = 3.735, b0 = 1.783, w0 = 0.6318;
  const double c0 = -0.6803, c1 = -0.2598, b1 = 1.723, w1 = 1.997;
  const double l0 = b0 / sigma, l1 = b1 / sigma, o0 = w0 / sigma, o1 = w1 / sigma;
  const double e0 = std::exp(-l0), e1 = std::exp(-l1);
  const double cs0 = std::cos(o0), sn0 = std::sin(o0), cs1 = std::cos(o1), sn1 = std::sin(o1);
  RecursiveCoeffs c;
  c.n[0] = a0 + c0;
  c.n[1] = e1 * (c1 * sn1 - (c0 + 2 * a0) * cs1) + e0 * (a1 * sn0 - (2 * c0 + a0) * cs0);
  c.n[2] = 2 * e0 * e1 * ((a0 + c0) * cs1 * cs0 - a1 * cs1 * sn0 - c1 * cs0 * sn1) + c0 * e0 * e0 + a0 * e1 * e1;
  c.n[3] = e1 * e0 * e0 * (c1 * sn1 - c0 * cs1) + e0 * e1 * e1 * (a1 * sn0 - a0 * cs0);
  c.d[0] = -2 * e1 * cs1 - 2 * e0 * cs0;
  c.d[1] = 4 * cs1 * cs0 * e0 * e1 + e1 * e1 + e0 * e0;
  c.d[2] = -2 * cs0 * e0 * e1 * e1 - 2 * cs1 * e1 * e0 * e0;
  c.d[3] = e0 * e0 * e1 * e1;
  for (int k = 0; k < 3; ++k) c.m[k] = c.n[k + 1] - c.d[k] * c.n[0];
  c.m[3] = -c.d[3] * c.n[0];
  const double dsum = 1 + c.d[0] + c.d[1] + c.d[2] + c.d[3];
  const double nsum = c.n[0] + c.n[1] + c.n[2] + c.n[3], msum = c.m[0] + c.m[1] + c.m[2] + c.m[3];
  const double scale = dsum / (nsum + msum);
  for (auto& x : c.n) x *= scale;
  for (auto& x : c.m) x *= scale;
  c.causal_dc = nsum * scale / dsum;
  c.anticausal_dc = msum * scale / dsum;
  return c;
}

// Filters `line` (length n, stride 1) in place.
void smooth_line(std::vector<double>& line, double sigma, std::vector<double>& work) {
  const auto n = static_cast<std::int64_t>(line.size());
  if (sigma < 0.5) {
    // Below the recursive filter's valid range: small direct kernel.
    const int radius = 2;
    double taps[2 * radius + 1];
    double norm = 0.0;
    for (int k = -radius; k <= radius; ++k) {
      taps[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
      norm += taps[k + radius];
    }
    work.assign(line.size(), 0.0);
    for (std::int64_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) acc += taps[k + radius] * line[static_cast<std::size_t>(mirror(i + k, n))];
      work[static_cast<std::size_t>(i)] = acc / norm;
    }
    line.swap(work);
    return;
  }
  const RecursiveCoeffs c = recursive_coeffs(sigma);
  const auto pad = static_cast<std::int64_t>(std::ceil(6.0 * sigma)) + 4;
  const std::int64_t m = n + 2 * pad;
  std::vector<double> x(static_cast<std::size_t>(m));
  for (std::int64_t i = 0; i < m; ++i) x[static_cast<std::size_t>(i)] = line[static_cast<std::size_t>(mirror(i - pad, n))];
  work.assign(static_cast<std::size_t>(m), 0.0);
  auto at = [&](std::int64_t i) { return x[static_cast<std::size_t>(std::clamp<std::int64_t>(i, 0, m - 1))]; };

  // Causal pass, steady-state start.
  std::array<double, 4> y;
  y.fill(c.causal_dc * x.front());
  for (std::int64_t i = 0; i < m; ++i) {
    const double v = c.n[0] * at(i) + c.n[1] * at(i - 1) + c.n[2] * at(i - 2) + c.n[3] * at(i - 3) -
                     c.d[0] * y[0] - c.d[1] * y[1] - c.d[2] * y[2] - c.d[3] * y[3];
    y = {v, y[0], y[1], y[2]};
    work[static_cast<std::size_t>(i)] = v;
  }
  // Anti-causal pass.
  y.fill(c.anticausal_dc * x.back());
  for (std::int64_t i = m - 1; i >= 0; --i) {
    const double v = c.m[0] * at(i + 1) + c.m[1] * at(i + 2) + c.m[2] * at(i + 3) + c.m[3] * at(i + 4) -
                     c.d[0] * y[0] - c.d[1] * y[1] - c.d[2] * y[2] - c.d[3] * y[3];
    y = {v, y[0], y[1], y[2]};
    work[static_cast<std::size_t>(i)] += v;
  }
  for (std::int64_t i = 0; i < n; ++i) line[static_cast<std::size_t>(i)] = work[static_cast<std::size_t>(i + pad)];
}

}  // namespace

Volume recursive_gaussian_smooth(const Volume& v, double sigma) {
  if (!(sigma > 0.0)) throw UsageError("smoothing sigma must be > 0");
  const Dims d = v.dims();
  std::vector<double> buf(v.values().begin(), v.values().end());
  std::vector<double> line, work;
  const std::array<std::int64_t, 3> extent{d.d, d.h, d.w};
  const std::array<std::int64_t, 3> stride{d.h * d.w, d.w, 1};
  for (int axis = 0; axis < 3; ++axis) {
    const std::int64_t n = extent[static_cast<std::size_t>(axis)];
    if (n < 2) continue;
    const std::int64_t s = stride[static_cast<std::size_t>(axis)];
    line.resize(static_cast<std::size_t>(n));
    for (std::int64_t base = 0; base < d.voxels(); ++base) {
      // Visit each line once: start voxels have zero coordinate on `axis`.
      if ((base / s) % n != 0) continue;
      for (std::int64_t i = 0; i < n; ++i) line[static_cast<std::size_t>(i)] = buf[static_cast<std::size_t>(base + i * s)];
      smooth_line(line, sigma, work);
      for (std::int64_t i = 0; i < n; ++i) buf[static_cast<std::size_t>(base + i * s)] = line[static_cast<std::size_t>(i)];
    }
  }
  Volume out(d, 0.0f, v.spacing());
  std::transform(buf.begin(), buf.end(), out.values().begin(), [](double x) { return static_cast<float>(x); });
  return out;
}

namespace {

float sample_trilinear(const Volume& v, double z, double y, double x, float fill) {
  const Dims d = v.dims();
  constexpr double tol = 1e-9;
  if (z < -tol || y < -tol || x < -tol || z > d.d - 1 + tol || y > d.h - 1 + tol || x > d.w - 1 + tol)
    return fill;
  z = std::clamp(z, 0.0, static_cast<double>(d.d - 1));
  y = std::clamp(y, 0.0, static_cast<double>(d.h - 1));
  x = std::clamp(x, 0.0, static_cast<double>(d.w - 1));
  const auto z0 = static_cast<std::int64_t>(std::floor(z));
  const auto y0 = static_cast<std::int64_t>(std::floor(y));
  const auto x0 = static_cast<std::int64_t>(std::floor(x));
  const std::int64_t z1 = std::min(z0 + 1, d.d - 1), y1 = std::min(y0 + 1, d.h - 1),
                     x1 = std::min(x0 + 1, d.w - 1);
  const double tz = z - z0, ty = y - y0, tx = x - x0;
  auto lx = [&](std::int64_t zz, std::int64_t yy) {
    return (1 - tx) * v.at(zz, yy, x0) + tx * v.at(zz, yy, x1);
  };
  const double a = (1 - ty) * lx(z0, y0) + ty * lx(z0, y1);
  const double b = (1 - ty) * lx(z1, y0) + ty * lx(z1, y1);
  return static_cast<float>((1 - tz) * a + tz * b);
}

using Mat3 = std::array<std::array<double, 3>, 3>;

Mat3 multiply(const Mat3& a, const Mat3& b) {
  Mat3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) r[i][j] += a[i][k] * b[k][j];
  return r;
}

// Rotation in the plane of the two axes other than `axis`.
Mat3 axis_rotation(int axis, double rad) {
  Mat3 r{};
  for (int i = 0; i < 3; ++i) r[i][i] = 1.0;
  const int a = (axis + 1) % 3, b = (axis + 2) % 3;
  const double c = std::cos(rad), s = std::sin(rad);
  r[a][a] = c;
  r[a][b] = -s;
  r[b][a] = s;
  r[b][b] = c;
  return r;
}

}  // namespace

Volume rotate(const Volume& v, const std::array<double, 3>& angles_deg, float fill) {
  if (angles_deg == std::array<double, 3>{0.0, 0.0, 0.0}) return v;
  Mat3 rot{};
  for (int i = 0; i < 3; ++i) rot[i][i] = 1.0;
  for (int axis = 0; axis < 3; ++axis)
    rot = multiply(axis_rotation(axis, angles_deg[static_cast<std::size_t>(axis)] * std::numbers::pi / 180.0), rot);
  const Dims d = v.dims();
  const std::array<double, 3> centre{(d.d - 1) / 2.0, (d.h - 1) / 2.0, (d.w - 1) / 2.0};
  Volume out(d, fill, v.spacing());
  // Inverse mapping: source = R^T (p - c) + c.
  for (std::int64_t z = 0; z < d.d; ++z)
    for (std::int64_t y = 0; y < d.h; ++y)
      for (std::int64_t x = 0; x < d.w; ++x) {
        const std::array<double, 3> p{z - centre[0], y - centre[1], x - centre[2]};
        std::array<double, 3> src{};
        for (int i = 0; i < 3; ++i)
          src[i] = rot[0][i] * p[0] + rot[1][i] * p[1] + rot[2][i] * p[2] + centre[i];
        out.at(z, y, x) = sample_trilinear(v, src[0], src[1], src[2], fill);
      }
  return out;
}

Volume random_rotation(const Volume& v, const std::array<double, 3>& max_deg, float fill,
                       std::mt19937_64& rng) {
  std::array<double, 3> angles{};
  for (int i = 0; i < 3; ++i) {
    std::uniform_real_distribution<double> u(-max_deg[static_cast<std::size_t>(i)], max_deg[static_cast<std::size_t>(i)]);
    angles[static_cast<std::size_t>(i)] = u(rng);
  }
  return rotate(v, angles, fill);
}

Volume flip(const Volume& v, int axis) {
  if (axis < 0 || axis > 2) throw UsageError("flip axis must be 0, 1 or 2");
  const Dims d = v.dims();
  Volume out(d, 0.0f, v.spacing());
  for (std::int64_t z = 0; z < d.d; ++z)
    for (std::int64_t y = 0; y < d.h; ++y)
      for (std::int64_t x = 0; x < d.w; ++x) {
        const std::int64_t sz = axis == 0 ? d.d - 1 - z : z;
        const std::int64_t sy = axis == 1 ? d.h - 1 - y : y;
        const std::int64_t sx = axis == 2 ? d.w - 1 - x : x;
        out.at(z, y, x) = v.at(sz, sy, sx);
      }
  return out;
}

Volume brightness_contrast(const Volume& v, double delta, double gain, float lo, float hi) {
  const double mu = mean(v);
  Volume out(v.dims(), 0.0f, v.spacing());
  auto src = v.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double y = gain * (src[i] - mu) + mu + delta;
    dst[i] = static_cast<float>(std::clamp(y, static_cast<double>(lo), static_cast<double>(hi)));
  }
  return out;
}

Volume translate(const Volume& v, const std::array<int, 3>& offset, float fill) {
  const Dims d = v.dims();
  Volume out(d, fill, v.spacing());
  for (std::int64_t z = 0; z < d.d; ++z) {
    const std::int64_t sz = z - offset[0];
    if (sz < 0 || sz >= d.d) continue;
    for (std::int64_t y = 0; y < d.h; ++y) {
      const std::int64_t sy = y - offset[1];
      if (sy < 0 || sy >= d.h) continue;
      for (std::int64_t x = 0; x < d.w; ++x) {
        const std::int64_t sx = x - offset[2];
        if (sx >= 0 && sx < d.w) out.at(z, y, x) = v.at(sz, sy, sx);
      }
    }
  }
  return out;
}

PairedSample compose_random_pipeline(const PairedSample& sample, const AugmentConfig& cfg,
                                     std::mt19937_64& rng, AugmentDraw* draw) {
  validate(cfg);
  std::bernoulli_distribution coin(0.5);
  std::array<bool, 6> chosen{};
  do {
    for (auto& c : chosen) c = coin(rng);
  } while (std::none_of(chosen.begin(), chosen.end(), [](bool b) { return b; }));

  PairedSample out = sample;
  AugmentDraw record;
  for (std::size_t i = 0; i < kCanonicalAugmentOrder.size(); ++i) {
    if (!chosen[i]) continue;
    const AugmentStep step = kCanonicalAugmentOrder[i];
    record.steps.push_back(step);
    switch (step) {
      case AugmentStep::smooth:
        out.mri = recursive_gaussian_smooth(out.mri, cfg.smooth_sigma);
        out.pet = recursive_gaussian_smooth(out.pet, cfg.smooth_sigma);
        break;
      case AugmentStep::noise:
        out.mri = additive_gaussian_noise(out.mri, cfg.noise_sigma, rng);
        out.pet = additive_gaussian_noise(out.pet, cfg.noise_sigma, rng);
        break;
      case AugmentStep::rotation: {
        for (int a = 0; a < 3; ++a) {
          const double m = cfg.max_rotation_deg[static_cast<std::size_t>(a)];
          std::uniform_real_distribution<double> u(-m, m);
          record.angles_deg[static_cast<std::size_t>(a)] = u(rng);
        }
        out.mri = rotate(out.mri, record.angles_deg, cfg.fill_value);
        out.pet = rotate(out.pet, record.angles_deg, cfg.fill_value);
        break;
      }
      case AugmentStep::flip: {
        if (cfg.flip_axes.empty()) break;
        std::uniform_int_distribution<std::size_t> pick(0, cfg.flip_axes.size() - 1);
        record.flip_axis = cfg.flip_axes[pick(rng)];
        out.mri = flip(out.mri, record.flip_axis);
        out.pet = flip(out.pet, record.flip_axis);
        break;
      }
      case AugmentStep::translation: {
        for (int a = 0; a < 3; ++a) {
          const int m = cfg.max_translation_voxels[static_cast<std::size_t>(a)];
          std::uniform_int_distribution<int> u(-m, m);
          record.offset[static_cast<std::size_t>(a)] = u(rng);
        }
        out.mri = translate(out.mri, record.offset, cfg.fill_value);
        out.pet = translate(out.pet, record.offset, cfg.fill_value);
        break;
      }
      case AugmentStep::brightness_contrast: {
        std::uniform_real_distribution<double> delta(-cfg.brightness_delta, cfg.brightness_delta);
        std::uniform_real_distribution<double> gain(cfg.contrast_range[0], cfg.contrast_range[1]);
        for (Volume* v : {&out.mri, &out.pet}) {
          const double dlt = cfg.brightness_delta > 0.0 ? delta(rng) : 0.0;
          const double g = cfg.contrast_range[0] < cfg.contrast_range[1] ? gain(rng) : cfg.contrast_range[0];
          *v = brightness_contrast(*v, dlt, g, cfg.fill_value, cfg.clamp_hi);
        }
        break;
      }
    }
  }
  if (draw) *draw = std::move(record);
  return out;
}

}  // namespace xmodal
