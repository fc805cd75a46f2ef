// SPDX-License-Identifier: Apache-2.0
//
// Training configuration, the three adversarial training loops, and
// inference from a checkpoint.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "xmodal/augment.hpp"
#include "xmodal/checkpoint.hpp"
#include "xmodal/dataset.hpp"
#include "xmodal/losses.hpp"
#include "xmodal/networks.hpp"
#include "xmodal/volume.hpp"

namespace xmodal {

enum class LrSchedule { constant, linear_decay };
std::string_view to_string(LrSchedule s);
LrSchedule parse_lr_schedule(std::string_view text);

struct TrainConfig {
  ModelKind model = ModelKind::cyclegan;
  ConditioningMode conditioning = ConditioningMode::none;
  double learning_rate = 2e-4;
  int epochs = 100;
  LossWeights weights = default_loss_weights(ModelKind::cyclegan);
  AdversarialLoss adversarial = AdversarialLoss::cross_entropy;
  int batch_size = 2;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  bool augment = true;
  AugmentConfig augment_config;
  /// All zero: proportional to 910/242/186 of the dataset.
  SplitSizes split_sizes;
  LrSchedule lr_schedule = LrSchedule::constant;
  /// First epoch (0-based) of the linear decay towards zero.
  int decay_start_epoch = 50;
  /// Stop after this many optimizer steps (0: no cap).
  long max_steps = 0;

  bool operator==(const TrainConfig&) const = default;
};

/// Defaults for a model kind, including its loss weights.
TrainConfig default_train_config(ModelKind kind);

/// Throws UsageError for any out-of-range field.
void validate(const TrainConfig& cfg);

using KeyValues = std::map<std::string, std::string>;

/// `key=value` lines, `#` comments, blank lines ignored.
KeyValues read_key_values(const std::filesystem::path& path);
KeyValues parse_key_values(const std::string& text, const std::string& origin = "<config>");

/// Builds a config: `model` is applied first (selecting per-model defaults),
/// then every other key. Unknown keys and malformed values are UsageErrors.
TrainConfig config_from_key_values(const KeyValues& kv);
KeyValues to_key_values(const TrainConfig& cfg);
/// Canonical text: sorted key=value lines.
std::string to_text(const TrainConfig& cfg);
/// Every key accepted by config_from_key_values.
std::vector<std::string> config_keys();
/// 16 hex digits of FNV-1a over to_text(cfg).
std::string config_hash(const TrainConfig& cfg);

struct TrainingData {
  std::vector<PairedSample> train;
  std::vector<PairedSample> val;
};

struct StepInfo {
  long step = 0;  // 1-based
  int epoch = 0;  // 0-based
  std::vector<std::pair<std::string, double>> losses;
};

using StepCallback =
    std::function<void(const StepInfo&, const TranslationModel<float>&, const NormalizationStats&)>;

struct TrainResult {
  /// Live model after the last step.
  Checkpoint final_checkpoint;
  std::filesystem::path best_path;
  std::filesystem::path final_path;
  std::vector<double> val_ssim;  // per epoch; empty without a validation split
  long steps = 0;
};

/// Runs the configured loop. When `run_dir` is non-empty it receives
/// config.txt, losses.csv, val.csv, best.ckpt and final.ckpt. Throws
/// DivergenceError on any non-finite loss.
TrainResult train(const TrainConfig& cfg, const TrainingData& data, const std::filesystem::path& run_dir,
                  const StepCallback& on_step = {});

/// `<runs_root>/<hash>-<UTC timestamp>`, created.
std::filesystem::path make_run_dir(const std::filesystem::path& runs_root, const TrainConfig& cfg);

/// Network output for one raw MRI, still in the normalized [-1, 1] PET domain.
Volume translate_normalized(const TranslationModel<float>& model, const NormalizationStats& stats, const Volume& mri,
                            double abeta_ratio);

/// PET-range volume with the shape of `mri`. Throws UsageError when the
/// extents are not divisible by the encoder's downsampling factor or the
/// ratio is not positive.
Volume generate_pet(const Checkpoint& ckpt, const Volume& mri, double abeta_ratio);

/// Mean SSIM over `samples` in the metric domain (NaN when empty).
double validation_ssim(const TranslationModel<float>& model, const NormalizationStats& stats,
                       const std::vector<PairedSample>& samples);

}  // namespace xmodal
