// SPDX-License-Identifier: Apache-2.0

#include "xmodal/evaluation.hpp"

#include "xmodal/error.hpp"
#include "xmodal/training.hpp"

namespace xmodal {

EvalReport evaluate_testset(const Checkpoint& ckpt, const Manifest& test, const RegionMasks* masks) {
  if (test.empty()) throw DataError("test split is empty");
  EvalReport report;
  for (const auto& entry : test) {
    const PairedSample s = load_sample(entry);
    if (masks) validate(*masks, s.pet.dims());
    const Volume generated = translate_normalized(ckpt.model, ckpt.stats, s.mri, s.abeta_ratio);
    const Volume gen_metric = to_metric_range(generated);
    const Volume true_metric = to_metric_range(normalize_intensity(s.pet, ckpt.stats.pet));
    EvalRow row;
    row.subject_id = s.subject_id;
    row.image_id = entry.image_id();
    row.ssim = ssim3d(gen_metric, true_metric);
    row.mse = mse(gen_metric, true_metric);
    row.psnr = psnr_from_mse(row.mse);
    if (masks) {
      row.mcsuvr_generated = mcsuvr(denormalize_intensity(generated, ckpt.stats.pet), *masks);
      row.mcsuvr_true = mcsuvr(s.pet, *masks);
    }
    report.rows.push_back(std::move(row));
  }
  aggregate(report);
  return report;
}

}  // namespace xmodal
