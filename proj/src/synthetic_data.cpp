// SPDX-License-Identifier: Apache-2.0

#include "xmodal/synthetic_data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>

#include "xmodal/dataset.hpp"
#include "xmodal/error.hpp"
#include "xmodal/random.hpp"
#include "xmodal/volume_io.hpp"

namespace fs = std::filesystem;

namespace xmodal {

namespace {

struct Ellipsoid {
  std::array<double, 3> center;  // (z, y, x) in [-1, 1] units
  std::array<double, 3> radii;
};

struct Anatomy {
  Ellipsoid brain{{0.0, 0.0, 0.0}, {0.80, 0.85, 0.70}};
  Ellipsoid white{{0.05, 0.0, 0.0}, {0.50, 0.55, 0.42}};
  Ellipsoid ventricle{{0.10, -0.05, 0.0}, {0.18, 0.28, 0.12}};
  Ellipsoid cerebellum{{-0.55, 0.45, 0.0}, {0.22, 0.28, 0.40}};
};

struct Tissue {
  std::vector<float> grey, white, csf, cerebellum;
};

constexpr double kMriWhite = 1.0, kMriGrey = 0.6, kMriCsf = 0.2, kMriCerebellum = 0.65;
constexpr double kPetWhite = 1.3, kPetCsf = 0.3, kPetCerebellum = 1.0;

// Soft membership: logistic in (1 - rho) with a roughly one-voxel transition.
double membership(const Ellipsoid& e, double z, double y, double x, double tau) {
  const double dz = (z - e.center[0]) / e.radii[0];
  const double dy = (y - e.center[1]) / e.radii[1];
  const double dx = (x - e.center[2]) / e.radii[2];
  const double rho = std::sqrt(dz * dz + dy * dy + dx * dx);
  return 1.0 / (1.0 + std::exp(-(1.0 - rho) / tau));
}

Tissue render_tissue(const Anatomy& a, Dims dims) {
  const auto n = static_cast<std::size_t>(dims.voxels());
  Tissue t{std::vector<float>(n), std::vector<float>(n), std::vector<float>(n), std::vector<float>(n)};
  const double tau = 1.0 / static_cast<double>(std::min({dims.d, dims.h, dims.w}));
  auto coord = [](std::int64_t i, std::int64_t extent) {
    return 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(extent) - 1.0;
  };
  std::size_t i = 0;
  for (std::int64_t z = 0; z < dims.d; ++z)
    for (std::int64_t y = 0; y < dims.h; ++y)
      for (std::int64_t x = 0; x < dims.w; ++x, ++i) {
        const double uz = coord(z, dims.d), uy = coord(y, dims.h), ux = coord(x, dims.w);
        const double b = membership(a.brain, uz, uy, ux, tau);
        const double w = membership(a.white, uz, uy, ux, tau);
        const double v = membership(a.ventricle, uz, uy, ux, tau);
        const double c = membership(a.cerebellum, uz, uy, ux, tau);
        const double rest = 1.0 - c;
        t.cerebellum[i] = static_cast<float>(c);
        t.csf[i] = static_cast<float>(v * rest);
        t.white[i] = static_cast<float>(std::max(0.0, w - v) * rest);
        t.grey[i] = static_cast<float>(std::max(0.0, b - w) * rest);
      }
  return t;
}

Volume compose(const Tissue& t, Dims dims, double grey_value, double white, double csf, double cerebellum) {
  Volume v(dims);
  auto out = v.values();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<float>(white * t.white[i] + grey_value * t.grey[i] + csf * t.csf[i] +
                                cerebellum * t.cerebellum[i]);
  return v;
}

Anatomy jittered_anatomy(const PhantomSpec& spec, int subject_index) {
  std::mt19937_64 rng(derive_seed(derive_seed(spec.seed, static_cast<std::uint64_t>(subject_index)), 0));
  std::normal_distribution<double> n01(0.0, 1.0);
  Anatomy a;
  for (Ellipsoid* e : {&a.brain, &a.white, &a.ventricle, &a.cerebellum})
    for (double& r : e->radii) r *= 1.0 + spec.shape_jitter * std::clamp(n01(rng), -3.0, 3.0);
  return a;
}

std::array<float, 3> phantom_spacing(Dims dims) {
  return {static_cast<float>(256.0 / static_cast<double>(dims.d)), static_cast<float>(256.0 / static_cast<double>(dims.h)),
          static_cast<float>(256.0 / static_cast<double>(dims.w))};
}

std::string subject_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sub-%03d", index + 1);
  return buf;
}

}  // namespace

void validate(const PhantomSpec& spec) {
  if (spec.shape.d <= 0 || spec.shape.h <= 0 || spec.shape.w <= 0 || spec.shape.d % 8 || spec.shape.h % 8 ||
      spec.shape.w % 8)
    throw UsageError("phantom shape " + to_string(spec.shape) + " must be positive multiples of 8");
  if (!(spec.abeta_lo > 0.0) || !(spec.abeta_hi > spec.abeta_lo))
    throw UsageError("abeta range must satisfy 0 < lo < hi");
  if (spec.n_subjects < 3) throw UsageError("phantom needs at least 3 subjects");
  if (spec.images_per_subject < 1) throw UsageError("images_per_subject must be at least 1");
  if (spec.uptake_coupling < 0.0 || spec.uptake_jitter < 0.0 || spec.shape_jitter < 0.0 || spec.mri_noise < 0.0 ||
      spec.pet_noise < 0.0 || spec.label_margin < 0.0)
    throw UsageError("phantom coupling, jitter, noise and margin must be non-negative");
  if (!(spec.uptake_base > 0.0)) throw UsageError("uptake_base must be positive");
}

RegionMasks phantom_masks(const PhantomSpec& spec) {
  validate(spec);
  const Tissue t = render_tissue(Anatomy{}, spec.shape);
  RegionMasks m{Volume(spec.shape, 0.0f, phantom_spacing(spec.shape)), Volume(spec.shape, 0.0f, phantom_spacing(spec.shape))};
  auto tv = m.target.values();
  auto cv = m.cerebellum.values();
  for (std::size_t i = 0; i < tv.size(); ++i) {
    tv[i] = t.grey[i] > 0.9f ? 1.0f : 0.0f;
    cv[i] = t.cerebellum[i] > 0.9f ? 1.0f : 0.0f;
  }
  return m;
}

PhantomSubject phantom_subject(const PhantomSpec& spec, int subject_index) {
  validate(spec);
  if (subject_index < 0) throw UsageError("negative subject index");
  const RegionMasks masks = phantom_masks(spec);
  const Tissue t = render_tissue(jittered_anatomy(spec, subject_index), spec.shape);
  std::mt19937_64 rng(derive_seed(derive_seed(spec.seed, static_cast<std::uint64_t>(subject_index)), 1));
  std::uniform_real_distribution<double> ratio(spec.abeta_lo, spec.abeta_hi);
  std::normal_distribution<double> n01(0.0, 1.0);
  PhantomSubject s;
  s.subject_id = subject_name(subject_index);
  for (int attempt = 0; attempt < 256; ++attempt) {
    s.abeta_ratio = ratio(rng);
    s.cortical_uptake = spec.uptake_base +
                        spec.uptake_coupling * (spec.abeta_hi - s.abeta_ratio) / (spec.abeta_hi - spec.abeta_lo) +
                        spec.uptake_jitter * n01(rng);
    const Volume pet = compose(t, spec.shape, s.cortical_uptake, kPetWhite, kPetCsf, kPetCerebellum);
    s.mcsuvr_noise_free = mcsuvr(pet, masks);
    if (std::abs(s.mcsuvr_noise_free - kAmyloidThreshold) >= spec.label_margin) break;
  }
  s.amyloid_positive = s.mcsuvr_noise_free > kAmyloidThreshold;
  return s;
}

PhantomPair generate_phantom_pair(const PhantomSpec& spec, int subject_index, int image_index) {
  PhantomPair p;
  p.subject = phantom_subject(spec, subject_index);
  p.masks = phantom_masks(spec);
  const Tissue t = render_tissue(jittered_anatomy(spec, subject_index), spec.shape);
  std::mt19937_64 rng(derive_seed(derive_seed(spec.seed, static_cast<std::uint64_t>(subject_index)),
                                  2 + static_cast<std::uint64_t>(image_index)));
  std::normal_distribution<double> n01(0.0, 1.0);
  p.sample.subject_id = p.subject.subject_id;
  p.sample.abeta_ratio = p.subject.abeta_ratio;
  p.sample.mri = compose(t, spec.shape, kMriGrey, kMriWhite, kMriCsf, kMriCerebellum);
  p.sample.pet = compose(t, spec.shape, p.subject.cortical_uptake, kPetWhite, kPetCsf, kPetCerebellum);
  const double pet_gain = 1.0 + 0.05 * std::clamp(n01(rng), -3.0, 3.0);
  for (float& v : p.sample.mri.values()) v = static_cast<float>(v + spec.mri_noise * n01(rng));
  for (float& v : p.sample.pet.values()) v = static_cast<float>(pet_gain * v + spec.pet_noise * n01(rng));
  p.sample.mri.set_spacing(phantom_spacing(spec.shape));
  p.sample.pet.set_spacing(phantom_spacing(spec.shape));
  return p;
}

DatasetLayout dataset_layout(const fs::path& dir) {
  return {dir / "manifest.csv", dir / "masks" / "target.xvol", dir / "masks" / "cerebellum.xvol",
          dir / "subjects.csv"};
}

fs::path write_dataset(const std::vector<PhantomPair>& pairs, const RegionMasks& masks, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir / "images", ec);
  fs::create_directories(dir / "masks", ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
  const DatasetLayout layout = dataset_layout(dir);
  write_xvol(masks.target, layout.target_mask);
  write_xvol(masks.cerebellum, layout.cerebellum_mask);
  Manifest manifest;
  std::map<std::string, int> image_counter;
  std::vector<PhantomSubject> subjects;
  for (const auto& p : pairs) {
    const int k = image_counter[p.sample.subject_id]++;
    if (k == 0) subjects.push_back(p.subject);
    const std::string stem = p.sample.subject_id + "_img" + std::to_string(k);
    ManifestEntry e{p.sample.subject_id, dir / "images" / (stem + "_mri.xvol"), dir / "images" / (stem + "_pet.xvol"),
                    p.sample.abeta_ratio};
    write_xvol(p.sample.mri, e.mri_path);
    write_xvol(p.sample.pet, e.pet_path);
    manifest.push_back(std::move(e));
  }
  write_manifest(manifest, layout.manifest);
  std::ofstream out(layout.subjects);
  if (!out) throw DataError("cannot write " + layout.subjects.string());
  out << "subject_id,abeta_ratio,mcsuvr,amyloid_positive\n" << std::setprecision(17);
  for (const auto& s : subjects)
    out << s.subject_id << ',' << s.abeta_ratio << ',' << s.mcsuvr_noise_free << ',' << (s.amyloid_positive ? 1 : 0)
        << '\n';
  if (!out) throw DataError("write failed: " + layout.subjects.string());
  return layout.manifest;
}

fs::path synthesize_dataset(const PhantomSpec& spec, const fs::path& dir) {
  validate(spec);
  std::vector<PhantomPair> pairs;
  for (int s = 0; s < spec.n_subjects; ++s)
    for (int k = 0; k < spec.images_per_subject; ++k) pairs.push_back(generate_phantom_pair(spec, s, k));
  return write_dataset(pairs, phantom_masks(spec), dir);
}

RegionMasks read_masks(const fs::path& target, const fs::path& cerebellum) {
  for (const auto& p : {target, cerebellum})
    if (!fs::exists(p)) throw DataError("missing mask " + p.string());
  return {read_volume(target), read_volume(cerebellum)};
}

std::vector<SubjectLabel> read_subject_labels(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<SubjectLabel> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f[4];
    for (auto& cell : f) std::getline(ss, cell, ',');
    try {
      out.push_back({f[0], std::stod(f[1]), std::stod(f[2]), f[3] == "1"});
    } catch (const std::exception&) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed subject row");
    }
  }
  return out;
}

}  // namespace xmodal
