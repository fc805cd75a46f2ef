// SPDX-License-Identifier: Apache-2.0
//
// Minimal 8-bit grayscale PNG output and three-view slice montages.

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "xmodal/volume.hpp"

namespace xmodal {

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, top row first
};

void write_png(const GrayImage& image, const std::filesystem::path& path);

/// Central axial, coronal and sagittal slices side by side, intensities
/// mapped linearly from [lo, hi] to [0, 255].
GrayImage three_view(const Volume& v, double lo, double hi);

/// Stacks images vertically, left-aligned, padding with black.
GrayImage stack_rows(const std::vector<GrayImage>& rows);

}  // namespace xmodal
