// SPDX-License-Identifier: Apache-2.0

#include "xmodal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>
#include "json.hpp"

#include "xmodal/error.hpp"

namespace xmodal {

namespace {

void require_same_dims(const Volume& a, const Volume& b, const char* what) {
  if (a.dims() != b.dims())
    throw UsageError(std::string(what) + ": dimension mismatch " + to_string(a.dims()) + " vs " +
                     to_string(b.dims()));
  if (a.size() == 0) throw UsageError(std::string(what) + ": empty volume");
}

// Valid-mode separable filtering along one axis of a (d, h, w) double grid.
std::vector<double> filter_axis(const std::vector<double>& in, std::array<std::int64_t, 3> ext, int axis,
                                const std::vector<double>& taps, std::array<std::int64_t, 3>& out_ext) {
  const auto k = static_cast<std::int64_t>(taps.size());
  out_ext = ext;
  out_ext[axis] = ext[axis] - k + 1;
  std::vector<double> out(static_cast<std::size_t>(out_ext[0] * out_ext[1] * out_ext[2]), 0.0);
  const std::int64_t stride = axis == 0 ? ext[1] * ext[2] : axis == 1 ? ext[2] : 1;
  for (std::int64_t z = 0; z < out_ext[0]; ++z)
    for (std::int64_t y = 0; y < out_ext[1]; ++y) {
      double* o = out.data() + (z * out_ext[1] + y) * out_ext[2];
      const double* src = in.data() + (z * ext[1] + y) * ext[2];
      for (std::int64_t t = 0; t < k; ++t) {
        const double g = taps[static_cast<std::size_t>(t)];
        const double* s = src + t * stride;
        for (std::int64_t x = 0; x < out_ext[2]; ++x) o[x] += g * s[x];
      }
    }
  return out;
}

std::vector<double> filter3(const std::vector<double>& in, std::array<std::int64_t, 3> ext,
                            const std::vector<double>& taps) {
  std::array<std::int64_t, 3> e1{}, e2{}, e3{};
  auto a = filter_axis(in, ext, 2, taps, e1);
  auto b = filter_axis(a, e1, 1, taps, e2);
  return filter_axis(b, e2, 0, taps, e3);
}

}  // namespace

Volume to_metric_range(const Volume& normalized) {
  Volume out(normalized.dims(), 0.0f, normalized.spacing());
  auto src = normalized.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double v = (static_cast<double>(src[i]) + 1.0) * 127.5;
    dst[i] = static_cast<float>(std::clamp(v, 0.0, kMetricMax));
  }
  return out;
}

double mse(const Volume& a, const Volume& b) {
  require_same_dims(a, b, "mse");
  double acc = 0.0;
  auto x = a.values();
  auto y = b.values();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(x.size());
}

double psnr_from_mse(double mse_value, double max_val) {
  if (mse_value < 0.0 || !std::isfinite(mse_value)) throw UsageError("psnr: invalid mse");
  if (mse_value == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(max_val * max_val / mse_value);
}

double psnr(const Volume& a, const Volume& b, double max_val) { return psnr_from_mse(mse(a, b), max_val); }

std::vector<double> gaussian_window(int size, double sigma) {
  if (size < 1 || sigma <= 0.0) throw UsageError("gaussian window needs size >= 1 and sigma > 0");
  std::vector<double> g(static_cast<std::size_t>(size));
  const double c = (size - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    g[static_cast<std::size_t>(i)] = std::exp(-(i - c) * (i - c) / (2.0 * sigma * sigma));
    sum += g[static_cast<std::size_t>(i)];
  }
  for (auto& v : g) v /= sum;
  return g;
}

double ssim3d(const Volume& a, const Volume& b, const SsimOptions& opt) {
  require_same_dims(a, b, "ssim");
  const Dims& d = a.dims();
  if (d.d < opt.window || d.h < opt.window || d.w < opt.window)
    throw UsageError("ssim: volume " + to_string(d) + " smaller than the " + std::to_string(opt.window) +
                     "-voxel window");
  const auto taps = gaussian_window(opt.window, opt.sigma);
  const std::array<std::int64_t, 3> ext{d.d, d.h, d.w};
  const auto n = static_cast<std::size_t>(d.voxels());
  std::vector<double> xa(n), xb(n), aa(n), bb(n), ab(n);
  auto va = a.values();
  auto vb = b.values();
  for (std::size_t i = 0; i < n; ++i) {
    xa[i] = va[i];
    xb[i] = vb[i];
    aa[i] = xa[i] * xa[i];
    bb[i] = xb[i] * xb[i];
    ab[i] = xa[i] * xb[i];
  }
  const auto mu_a = filter3(xa, ext, taps);
  const auto mu_b = filter3(xb, ext, taps);
  const auto e_aa = filter3(aa, ext, taps);
  const auto e_bb = filter3(bb, ext, taps);
  const auto e_ab = filter3(ab, ext, taps);
  const double c1 = (opt.k1 * opt.max_val) * (opt.k1 * opt.max_val);
  const double c2 = (opt.k2 * opt.max_val) * (opt.k2 * opt.max_val);
  double acc = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma2 = mu_a[i] * mu_a[i];
    const double mb2 = mu_b[i] * mu_b[i];
    const double mab = mu_a[i] * mu_b[i];
    const double sa = e_aa[i] - ma2;
    const double sb = e_bb[i] - mb2;
    const double sab = e_ab[i] - mab;
    acc += ((2.0 * mab + c1) * (2.0 * sab + c2)) / ((ma2 + mb2 + c1) * (sa + sb + c2));
  }
  return acc / static_cast<double>(mu_a.size());
}

void validate(const RegionMasks& masks, const Dims& dims) {
  if (masks.target.dims() != dims || masks.cerebellum.dims() != dims)
    throw DataError("region masks " + to_string(masks.target.dims()) + "/" + to_string(masks.cerebellum.dims()) +
                    " do not match volume " + to_string(dims));
  std::int64_t nt = 0, nc = 0;
  auto t = masks.target.values();
  auto c = masks.cerebellum.values();
  for (std::size_t i = 0; i < t.size(); ++i) {
    const bool in_t = t[i] > 0.5f;
    const bool in_c = c[i] > 0.5f;
    if (in_t && in_c) throw DataError("target and reference masks overlap");
    nt += in_t;
    nc += in_c;
  }
  if (nt == 0) throw DataError("target mask is empty");
  if (nc == 0) throw DataError("cerebellum mask is empty");
}

double mcsuvr(const Volume& pet, const RegionMasks& masks) {
  validate(masks, pet.dims());
  double st = 0.0, sc = 0.0;
  std::int64_t nt = 0, nc = 0;
  auto p = pet.values();
  auto t = masks.target.values();
  auto c = masks.cerebellum.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (t[i] > 0.5f) {
      st += p[i];
      ++nt;
    } else if (c[i] > 0.5f) {
      sc += p[i];
      ++nc;
    }
  }
  const double ref = sc / static_cast<double>(nc);
  if (!(ref > 0.0)) throw DataError("non-positive cerebellar reference mean");
  return (st / static_cast<double>(nt)) / ref;
}

PearsonResult pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw UsageError("pearson: length mismatch");
  const std::size_t n = x.size();
  if (n < 3) throw UsageError("pearson: needs at least 3 samples");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw UsageError("pearson: zero variance input");
  PearsonResult res;
  res.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double dof = static_cast<double>(n - 2);
  if (std::abs(res.r) >= 1.0) {
    res.p_value = 0.0;
    return res;
  }
  const double t = res.r * std::sqrt(dof / (1.0 - res.r * res.r));
  boost::math::students_t dist(dof);
  res.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  return res;
}

std::vector<bool> classify_amyloid(std::span<const double> mcsuvr_values, double threshold) {
  std::vector<bool> out;
  out.reserve(mcsuvr_values.size());
  for (double v : mcsuvr_values) out.push_back(v > threshold);
  return out;
}

ClassificationStats accuracy_f1(const std::vector<bool>& pred, const std::vector<bool>& truth) {
  if (pred.size() != truth.size()) throw UsageError("accuracy_f1: length mismatch");
  if (pred.empty()) throw UsageError("accuracy_f1: no samples");
  ClassificationStats s;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] && truth[i]) ++s.true_positive;
    else if (pred[i]) ++s.false_positive;
    else if (truth[i]) ++s.false_negative;
    else ++s.true_negative;
  }
  s.accuracy = static_cast<double>(s.true_positive + s.true_negative) / static_cast<double>(pred.size());
  const int denom = 2 * s.true_positive + s.false_positive + s.false_negative;
  s.f1 = denom == 0 ? 0.0 : 2.0 * s.true_positive / static_cast<double>(denom);
  return s;
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd r;
  std::vector<double> v;
  for (double x : values)
    if (std::isfinite(x)) v.push_back(x);
  if (v.empty()) {
    r.mean = values.empty() ? 0.0 : std::numeric_limits<double>::infinity();
    return r;
  }
  for (double x : v) r.mean += x;
  r.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - r.mean) * (x - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return r;
}

void aggregate(EvalReport& report, double threshold) {
  std::vector<double> s, p, m, gen, tru;
  report.has_suvr = !report.rows.empty();
  for (const auto& row : report.rows) {
    s.push_back(row.ssim);
    p.push_back(row.psnr);
    m.push_back(row.mse);
    if (std::isnan(row.mcsuvr_generated) || std::isnan(row.mcsuvr_true)) report.has_suvr = false;
    gen.push_back(row.mcsuvr_generated);
    tru.push_back(row.mcsuvr_true);
  }
  report.ssim = mean_std(s);
  report.psnr = mean_std(p);
  report.mse = mean_std(m);
  if (!report.has_suvr) return;
  const auto pg = classify_amyloid(gen, threshold);
  const auto pt = classify_amyloid(tru, threshold);
  report.classification = accuracy_f1(pg, pt);
  report.positives_generated = static_cast<int>(std::count(pg.begin(), pg.end(), true));
  report.positives_true = static_cast<int>(std::count(pt.begin(), pt.end(), true));
  try {
    report.suvr_correlation = pearson(gen, tru);
  } catch (const UsageError&) {
    report.suvr_correlation = {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  }
}

namespace {
std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}
double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  return std::stod(s);
}
nlohmann::json json_number(double v) {
  if (std::isfinite(v)) return v;
  return fmt(v);
}
}  // namespace

void write_report_csv(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "subject_id,image_id,ssim,psnr,mse,mcsuvr_generated,mcsuvr_true\n";
  for (const auto& r : report.rows)
    out << r.subject_id << ',' << r.image_id << ',' << fmt(r.ssim) << ',' << fmt(r.psnr) << ',' << fmt(r.mse)
        << ',' << fmt(r.mcsuvr_generated) << ',' << fmt(r.mcsuvr_true) << '\n';
  if (!out) throw DataError("write failed: " + path.string());
}

EvalReport read_report_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  EvalReport rep;
  std::string line;
  std::getline(in, line);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 7) throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected 7 fields");
    EvalRow r{f[0], f[1], parse_double(f[2]), parse_double(f[3]), parse_double(f[4]), parse_double(f[5]),
              parse_double(f[6])};
    rep.rows.push_back(r);
  }
  aggregate(rep);
  return rep;
}

void write_report_json(const EvalReport& report, const std::filesystem::path& path) {
  nlohmann::json j;
  j["n"] = report.rows.size();
  auto ms = [](const MeanStd& m) { return nlohmann::json{{"mean", json_number(m.mean)}, {"std", json_number(m.std)}}; };
  j["ssim"] = ms(report.ssim);
  j["psnr"] = ms(report.psnr);
  j["mse"] = ms(report.mse);
  if (report.has_suvr) {
    j["suvr"] = {{"pearson_r", json_number(report.suvr_correlation.r)},
                 {"p_value", json_number(report.suvr_correlation.p_value)},
                 {"accuracy", report.classification.accuracy},
                 {"f1", report.classification.f1},
                 {"positives_true", report.positives_true},
                 {"positives_generated", report.positives_generated},
                 {"threshold", kAmyloidThreshold}};
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace xmodal
