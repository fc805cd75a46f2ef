// SPDX-License-Identifier: Apache-2.0
//
// Deterministic paired MRI/PET phantoms whose cortical uptake depends
// linearly on a synthetic plasma Abeta42/40 ratio.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "xmodal/metrics.hpp"
#include "xmodal/volume.hpp"

namespace xmodal {

struct PhantomSpec {
  Dims shape{64, 64, 64};
  int n_subjects = 40;
  int images_per_subject = 2;
  double abeta_lo = 0.05;
  double abeta_hi = 0.12;
  /// Cortical uptake relative to cerebellum at the highest ratio.
  double uptake_base = 1.0;
  /// Extra cortical uptake at the lowest ratio.
  double uptake_coupling = 0.45;
  /// Per-subject standard deviation of cortical uptake around the linear law.
  double uptake_jitter = 0.02;
  /// Relative standard deviation of per-subject ellipsoid radii.
  double shape_jitter = 0.03;
  double mri_noise = 0.02;
  double pet_noise = 0.03;
  /// Minimum |MCSUVR - threshold| of a noise-free render; abeta is redrawn otherwise.
  double label_margin = 0.02;
  std::uint64_t seed = 0;
};

/// Throws UsageError: extents not multiples of 8, non-positive or inverted
/// abeta range, fewer than 3 subjects, negative noise or coupling.
void validate(const PhantomSpec& spec);

struct PhantomSubject {
  std::string subject_id;
  double abeta_ratio = 0.0;
  /// Cortical uptake used to render the subject.
  double cortical_uptake = 0.0;
  /// MCSUVR of the noise-free PET under the template masks.
  double mcsuvr_noise_free = 0.0;
  bool amyloid_positive = false;
};

struct PhantomPair {
  PairedSample sample;
  RegionMasks masks;
  PhantomSubject subject;
};

/// Template-space region masks shared by every subject.
RegionMasks phantom_masks(const PhantomSpec& spec);

/// Per-subject draw (abeta, uptake, anatomy jitter); depends only on
/// (spec, subject_index).
PhantomSubject phantom_subject(const PhantomSpec& spec, int subject_index);

/// One noisy image of a subject; depends only on (spec, subject_index, image_index).
PhantomPair generate_phantom_pair(const PhantomSpec& spec, int subject_index, int image_index = 0);

struct DatasetLayout {
  std::filesystem::path manifest;
  std::filesystem::path target_mask;
  std::filesystem::path cerebellum_mask;
  std::filesystem::path subjects;
};

DatasetLayout dataset_layout(const std::filesystem::path& dir);

/// Writes images/, masks/, manifest.csv and subjects.csv under `dir`.
/// Returns the manifest path.
std::filesystem::path write_dataset(const std::vector<PhantomPair>& pairs, const RegionMasks& masks,
                                    const std::filesystem::path& dir);

/// All subjects x images of `spec`, written to `dir`.
std::filesystem::path synthesize_dataset(const PhantomSpec& spec, const std::filesystem::path& dir);

RegionMasks read_masks(const std::filesystem::path& target, const std::filesystem::path& cerebellum);

struct SubjectLabel {
  std::string subject_id;
  double abeta_ratio = 0.0;
  double mcsuvr = 0.0;
  bool amyloid_positive = false;
};

std::vector<SubjectLabel> read_subject_labels(const std::filesystem::path& path);

}  // namespace xmodal
