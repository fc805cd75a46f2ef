// SPDX-License-Identifier: Apache-2.0
//
// Image-quality and SUVR evaluation mathematics.

#pragma once

#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "xmodal/volume.hpp"

namespace xmodal {

/// Maximum intensity of the metric domain.
inline constexpr double kMetricMax = 255.0;
/// Amyloid-positivity cut-off on MCSUVR (strict inequality).
inline constexpr double kAmyloidThreshold = 1.19;

/// Maps a [-1, 1] normalized volume onto the [0, 255] metric domain.
Volume to_metric_range(const Volume& normalized);

double mse(const Volume& a, const Volume& b);

/// +infinity when the volumes are identical.
double psnr(const Volume& a, const Volume& b, double max_val = kMetricMax);
double psnr_from_mse(double mse_value, double max_val = kMetricMax);

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double max_val = kMetricMax;
};

/// Mean of the local SSIM map over every position where the Gaussian window
/// lies fully inside the volume.
double ssim3d(const Volume& a, const Volume& b, const SsimOptions& opt = {});

/// Normalized 1-D Gaussian taps of the SSIM window.
std::vector<double> gaussian_window(int size, double sigma);

struct RegionMasks {
  Volume target;      // cortical composite
  Volume cerebellum;  // reference region
};

/// Throws DataError when masks mismatch `dims`, overlap, or are empty.
void validate(const RegionMasks& masks, const Dims& dims);

/// mean(pet | target) / mean(pet | cerebellum).
double mcsuvr(const Volume& pet, const RegionMasks& masks);

struct PearsonResult {
  double r = 0.0;
  double p_value = 1.0;
};

/// Sample correlation and two-sided p-value from Student's t with n-2 dof.
PearsonResult pearson(std::span<const double> x, std::span<const double> y);

std::vector<bool> classify_amyloid(std::span<const double> mcsuvr_values,
                                   double threshold = kAmyloidThreshold);

struct ClassificationStats {
  double accuracy = 0.0;
  double f1 = 0.0;
  int true_positive = 0, false_positive = 0, true_negative = 0, false_negative = 0;
};

ClassificationStats accuracy_f1(const std::vector<bool>& pred, const std::vector<bool>& truth);

struct EvalRow {
  std::string subject_id;
  std::string image_id;
  double ssim = 0.0;
  double psnr = 0.0;
  double mse = 0.0;
  double mcsuvr_generated = std::numeric_limits<double>::quiet_NaN();
  double mcsuvr_true = std::numeric_limits<double>::quiet_NaN();
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  MeanStd ssim, psnr, mse;
  bool has_suvr = false;
  PearsonResult suvr_correlation;
  ClassificationStats classification;
  int positives_true = 0;
  int positives_generated = 0;
};

/// Sample mean and (n-1) standard deviation; infinite values are skipped.
MeanStd mean_std(std::span<const double> values);

/// Fills every aggregate field of `report` from its rows.
void aggregate(EvalReport& report, double threshold = kAmyloidThreshold);

void write_report_csv(const EvalReport& report, const std::filesystem::path& path);
void write_report_json(const EvalReport& report, const std::filesystem::path& path);
EvalReport read_report_csv(const std::filesystem::path& path);

}  // namespace xmodal
