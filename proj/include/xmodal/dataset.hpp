// SPDX-License-Identifier: Apache-2.0
//
// Manifest-driven paired dataset and subject-level splitting.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "xmodal/volume.hpp"

namespace xmodal {

/// One manifest row. Paths are absolute once read.
struct ManifestEntry {
  std::string subject_id;
  std::filesystem::path mri_path;
  std::filesystem::path pet_path;
  double abeta_ratio = 0.0;

  /// Image identifier: the MRI file name without its volume extension.
  std::string image_id() const;
};

using Manifest = std::vector<ManifestEntry>;

/// Header `subject_id,mri_path,pet_path,abeta_ratio`; relative paths resolve
/// against the manifest's directory. Throws DataError with file:line context.
Manifest read_manifest(const std::filesystem::path& path);
/// Paths are written relative to the manifest directory when possible.
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

PairedSample load_sample(const ManifestEntry& entry);

enum class Split { train, val, test };
std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct SplitSizes {
  std::int64_t train = 0, val = 0, test = 0;
  std::int64_t total() const { return train + val + test; }
  std::int64_t operator[](Split s) const { return s == Split::train ? train : s == Split::val ? val : test; }
  bool operator==(const SplitSizes&) const = default;
};

/// Image counts proportional to 910/242/186.
SplitSizes default_split_sizes(std::int64_t images);

using SplitAssignment = std::map<std::string, Split>;

/// Shuffles subjects, then assigns each whole subject to the split with the
/// largest remaining image deficit. Throws UsageError when the sizes do not
/// sum to the image count or are negative.
SplitAssignment split_by_subject(const Manifest& manifest, const SplitSizes& sizes, std::uint64_t seed);

/// Rows of `manifest` whose subject is assigned to `split`, in manifest order.
Manifest select(const Manifest& manifest, const SplitAssignment& assignment, Split split);

/// Image totals per split.
SplitSizes split_totals(const Manifest& manifest, const SplitAssignment& assignment);

/// Throws DataError when any subject appears in more than one split or a
/// manifest subject is unassigned.
void check_no_leakage(const Manifest& manifest, const SplitAssignment& assignment);

/// CSV `subject_id,split`.
void write_splits(const SplitAssignment& assignment, const std::filesystem::path& path);
SplitAssignment read_splits(const std::filesystem::path& path);

}  // namespace xmodal
