// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>

#include "xmodal/volume.hpp"

namespace xmodal {

/// Raw little-endian container: "XVOL1", u32 D,H,W, f32 spacing[3], then
/// D*H*W f32 voxels with W fastest.
void write_xvol(const Volume& v, const std::filesystem::path& path);
Volume read_xvol(const std::filesystem::path& path);

/// NIfTI-1 single-file images (.nii, optionally gzip-compressed). Axis i
/// (fastest) maps to W, j to H, k to D; scl_slope/scl_inter are applied.
Volume read_nifti(const std::filesystem::path& path);

/// Dispatches on extension: .nii / .nii.gz via NIfTI, anything else XVOL1.
Volume read_volume(const std::filesystem::path& path);

}  // namespace xmodal
