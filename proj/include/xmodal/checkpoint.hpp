// SPDX-License-Identifier: Apache-2.0
//
// Binary checkpoint: "XCKPT1", u32 header length, JSON header, raw float32
// parameter data in header order (little-endian).

#pragma once

#include <filesystem>
#include <string>

#include "xmodal/networks.hpp"
#include "xmodal/volume.hpp"

namespace xmodal {

struct Checkpoint {
  TranslationModel<float> model;
  NormalizationStats stats;
  /// Canonical key=value text of the training configuration.
  std::string config;
  int epoch = 0;
  double val_ssim = 0.0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

/// Throws DataError("missing checkpoint ...") when the file does not exist and
/// DataError for malformed content.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace xmodal
