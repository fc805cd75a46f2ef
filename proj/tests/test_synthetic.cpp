// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "test_util.hpp"
#include "xmodal/dataset.hpp"
#include "xmodal/error.hpp"
#include "xmodal/synthetic_data.hpp"
#include "xmodal/volume_io.hpp"

using namespace xmodal;

namespace {

PhantomSpec small(int subjects = 50) {
  PhantomSpec s;
  s.shape = Dims{32, 32, 32};
  s.n_subjects = subjects;
  s.seed = 11;
  return s;
}

double correlation(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i] / n, my += y[i] / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

double subject_correlation(const PhantomSpec& spec) {
  std::vector<double> a, m;
  for (int i = 0; i < spec.n_subjects; ++i) {
    auto s = phantom_subject(spec, i);
    a.push_back(s.abeta_ratio);
    m.push_back(s.mcsuvr_noise_free);
  }
  return correlation(a, m);
}

}  // namespace

TEST_SUITE("synthetic") {
  TEST_CASE("spec validation") {
    auto s = small();
    CHECK_NOTHROW(validate(s));
    s.shape = Dims{30, 32, 32};
    CHECK_THROWS_AS(validate(s), UsageError);
    s = small(2);
    CHECK_THROWS_AS(validate(s), UsageError);
    s = small();
    s.abeta_lo = 0.2;
    CHECK_THROWS_AS(validate(s), UsageError);
    s = small();
    s.pet_noise = -1;
    CHECK_THROWS_AS(validate(s), UsageError);
  }

  TEST_CASE("generation is deterministic and co-registered") {
    auto spec = small();
    auto a = generate_phantom_pair(spec, 3, 1), b = generate_phantom_pair(spec, 3, 1);
    CHECK(a.sample.mri == b.sample.mri);
    CHECK(a.sample.pet == b.sample.pet);
    CHECK(a.sample.abeta_ratio == b.sample.abeta_ratio);
    CHECK(a.sample.mri.dims() == spec.shape);
    CHECK(a.sample.pet.dims() == spec.shape);
    CHECK_NOTHROW(validate(a.sample));
    CHECK(a.sample.mri.spacing()[0] == doctest::Approx(8.0));
    auto c = generate_phantom_pair(spec, 3, 0);
    CHECK_FALSE(c.sample.pet == a.sample.pet);
    CHECK(c.sample.abeta_ratio == a.sample.abeta_ratio);
    CHECK(a.subject.subject_id == "sub-004");
  }

  TEST_CASE("masks are valid and shared") {
    auto spec = small();
    auto m = phantom_masks(spec);
    CHECK_NOTHROW(validate(m, spec.shape));
    auto p = generate_phantom_pair(spec, 0);
    CHECK(p.masks.target == m.target);
  }

  TEST_CASE("abeta draws stay in range and away from the threshold") {
    auto spec = small();
    int positives = 0;
    for (int i = 0; i < spec.n_subjects; ++i) {
      auto s = phantom_subject(spec, i);
      CHECK(s.abeta_ratio >= spec.abeta_lo);
      CHECK(s.abeta_ratio <= spec.abeta_hi);
      CHECK(std::abs(s.mcsuvr_noise_free - kAmyloidThreshold) >= spec.label_margin);
      CHECK(s.amyloid_positive == (s.mcsuvr_noise_free > kAmyloidThreshold));
      positives += s.amyloid_positive;
    }
    CHECK(positives > 0);
    CHECK(positives < spec.n_subjects);
  }

  TEST_CASE("uptake follows the ratio only when coupled") {
    auto spec = small();
    CHECK(subject_correlation(spec) < -0.8);
    spec.uptake_coupling = 0.0;
    CHECK(std::abs(subject_correlation(spec)) < 0.2);
  }

  TEST_CASE("written dataset reads back bit-exactly") {
    auto spec = small(4);
    spec.shape = Dims{16, 16, 16};
    auto dir = test::scratch_dir("synth_ds");
    auto manifest_path = synthesize_dataset(spec, dir);
    auto layout = dataset_layout(dir);
    CHECK(manifest_path == layout.manifest);
    auto m = read_manifest(layout.manifest);
    REQUIRE(m.size() == 8);
    for (std::size_t i = 0; i < m.size(); ++i) {
      const int subject = static_cast<int>(i) / 2, image = static_cast<int>(i) % 2;
      auto p = generate_phantom_pair(spec, subject, image);
      CHECK(m[i].subject_id == p.subject.subject_id);
      CHECK(m[i].abeta_ratio == p.sample.abeta_ratio);
      CHECK(read_volume(m[i].mri_path) == p.sample.mri);
      CHECK(read_volume(m[i].pet_path) == p.sample.pet);
    }
    auto masks = read_masks(layout.target_mask, layout.cerebellum_mask);
    CHECK(masks.target == phantom_masks(spec).target);
    auto labels = read_subject_labels(layout.subjects);
    REQUIRE(labels.size() == 4);
    for (int i = 0; i < 4; ++i) {
      auto s = phantom_subject(spec, i);
      CHECK(labels[i].subject_id == s.subject_id);
      CHECK(labels[i].abeta_ratio == s.abeta_ratio);
      CHECK(labels[i].mcsuvr == s.mcsuvr_noise_free);
      CHECK(labels[i].amyloid_positive == s.amyloid_positive);
    }
    auto again = test::scratch_dir("synth_ds2");
    synthesize_dataset(spec, again);
    CHECK(test::slurp(again / "manifest.csv") == test::slurp(dir / "manifest.csv"));
    CHECK(test::slurp(again / "images" / "sub-002_img1_pet.xvol") == test::slurp(dir / "images" / "sub-002_img1_pet.xvol"));
  }
}
