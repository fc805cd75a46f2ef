// SPDX-License-Identifier: Apache-2.0

#include "xmodal/training.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "xmodal/error.hpp"
#include "xmodal/metrics.hpp"
#include "xmodal/optim.hpp"
#include "xmodal/random.hpp"

namespace fs = std::filesystem;

namespace xmodal {

std::string_view to_string(LrSchedule s) { return s == LrSchedule::constant ? "constant" : "linear_decay"; }

LrSchedule parse_lr_schedule(std::string_view text) {
  if (text == "constant") return LrSchedule::constant;
  if (text == "linear_decay") return LrSchedule::linear_decay;
  throw UsageError("unknown lr_schedule '" + std::string(text) + "' (expected constant|linear_decay)");
}

TrainConfig default_train_config(ModelKind kind) {
  TrainConfig cfg;
  cfg.model = kind;
  cfg.weights = default_loss_weights(kind);
  return cfg;
}

void validate(const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0.0) || !std::isfinite(cfg.learning_rate)) throw UsageError("learning_rate must be > 0");
  if (cfg.epochs < 1) throw UsageError("epochs must be >= 1");
  if (cfg.batch_size < 1) throw UsageError("batch_size must be >= 1");
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) || !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0))
    throw UsageError("beta1 and beta2 must lie in [0, 1)");
  if (!(cfg.adam_eps > 0.0)) throw UsageError("adam_eps must be > 0");
  if (cfg.decay_start_epoch < 0) throw UsageError("decay_start_epoch must be >= 0");
  if (cfg.max_steps < 0) throw UsageError("max_steps must be >= 0");
  if (cfg.split_sizes.train < 0 || cfg.split_sizes.val < 0 || cfg.split_sizes.test < 0)
    throw UsageError("split sizes must be non-negative");
  validate(cfg.weights);
  if (cfg.augment) validate(cfg.augment_config);
}

// ---------------------------------------------------------------------------
// key=value configuration

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(out))
    throw UsageError("config key '" + key + "': '" + v + "' is not a number");
  return out;
}

template <class I>
I to_integer(const std::string& key, const std::string& v) {
  I out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw UsageError("config key '" + key + "': '" + v + "' is not an integer");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw UsageError("config key '" + key + "': '" + v + "' is not a boolean");
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    cell = trim(cell);
    if (!cell.empty()) out.push_back(to_integer<int>(key, cell));
  }
  return out;
}

struct Field {
  const char* name;
  std::function<void(TrainConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

#define XMODAL_DOUBLE_FIELD(key, member)                                                               \
  Field {                                                                                              \
    key, [](TrainConfig& c, const std::string& k, const std::string& v) { c.member = to_double(k, v); }, \
        [](const TrainConfig& c) { return fmt_double(c.member); }                                      \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"model", [](TrainConfig& c, const std::string&, const std::string& v) { c.model = parse_model_kind(v); },
       [](const TrainConfig& c) { return std::string(to_string(c.model)); }},
      {"conditioning",
       [](TrainConfig& c, const std::string&, const std::string& v) { c.conditioning = parse_conditioning_mode(v); },
       [](const TrainConfig& c) { return std::string(to_string(c.conditioning)); }},
      XMODAL_DOUBLE_FIELD("learning_rate", learning_rate),
      {"epochs", [](TrainConfig& c, const std::string& k, const std::string& v) { c.epochs = to_integer<int>(k, v); },
       [](const TrainConfig& c) { return std::to_string(c.epochs); }},
      XMODAL_DOUBLE_FIELD("lambda_l1", weights.lambda_l1),
      XMODAL_DOUBLE_FIELD("lambda_cyc1", weights.lambda_cyc1),
      XMODAL_DOUBLE_FIELD("lambda_cyc2", weights.lambda_cyc2),
      XMODAL_DOUBLE_FIELD("lambda_idt", weights.lambda_idt),
      XMODAL_DOUBLE_FIELD("lambda_cls", weights.lambda_cls),
      {"adversarial_loss",
       [](TrainConfig& c, const std::string&, const std::string& v) { c.adversarial = parse_adversarial_loss(v); },
       [](const TrainConfig& c) { return std::string(to_string(c.adversarial)); }},
      {"batch_size",
       [](TrainConfig& c, const std::string& k, const std::string& v) { c.batch_size = to_integer<int>(k, v); },
       [](const TrainConfig& c) { return std::to_string(c.batch_size); }},
      XMODAL_DOUBLE_FIELD("beta1", beta1),
      XMODAL_DOUBLE_FIELD("beta2", beta2),
      XMODAL_DOUBLE_FIELD("adam_eps", adam_eps),
      {"seed", [](TrainConfig& c, const std::string& k, const std::string& v) { c.seed = to_integer<std::uint64_t>(k, v); },
       [](const TrainConfig& c) { return std::to_string(c.seed); }},
      {"augment", [](TrainConfig& c, const std::string& k, const std::string& v) { c.augment = to_bool(k, v); },
       [](const TrainConfig& c) { return std::string(c.augment ? "true" : "false"); }},
      XMODAL_DOUBLE_FIELD("aug_noise_sigma", augment_config.noise_sigma),
      XMODAL_DOUBLE_FIELD("aug_smooth_sigma", augment_config.smooth_sigma),
      {"aug_max_rotation_deg",
       [](TrainConfig& c, const std::string& k, const std::string& v) {
         const double d = to_double(k, v);
         c.augment_config.max_rotation_deg = {d, d, d};
       },
       [](const TrainConfig& c) { return fmt_double(c.augment_config.max_rotation_deg[0]); }},
      {"aug_flip_axes",
       [](TrainConfig& c, const std::string& k, const std::string& v) { c.augment_config.flip_axes = to_int_list(k, v); },
       [](const TrainConfig& c) { return join_ints(c.augment_config.flip_axes); }},
      XMODAL_DOUBLE_FIELD("aug_brightness_delta", augment_config.brightness_delta),
      XMODAL_DOUBLE_FIELD("aug_contrast_lo", augment_config.contrast_range[0]),
      XMODAL_DOUBLE_FIELD("aug_contrast_hi", augment_config.contrast_range[1]),
      {"aug_max_translation",
       [](TrainConfig& c, const std::string& k, const std::string& v) {
         const int t = to_integer<int>(k, v);
         c.augment_config.max_translation_voxels = {t, t, t};
       },
       [](const TrainConfig& c) { return std::to_string(c.augment_config.max_translation_voxels[0]); }},
      {"split_train",
       [](TrainConfig& c, const std::string& k, const std::string& v) { c.split_sizes.train = to_integer<std::int64_t>(k, v); },
       [](const TrainConfig& c) { return std::to_string(c.split_sizes.train); }},
      {"split_val",
       [](TrainConfig& c, const std::string& k, const std::string& v) { c.split_sizes.val = to_integer<std::int64_t>(k, v); },
       [](const TrainConfig& c) { return std::to_string(c.split_sizes.val); }},
      {"split_test",
       [](TrainConfig& c, const std::string& k, const std::string& v) { c.split_sizes.test = to_integer<std::int64_t>(k, v); },
       [](const TrainConfig& c) { return std::to_string(c.split_sizes.test); }},
      {"lr_schedule",
       [](TrainConfig& c, const std::string&, const std::string& v) { c.lr_schedule = parse_lr_schedule(v); },
       [](const TrainConfig& c) { return std::string(to_string(c.lr_schedule)); }},
      {"decay_start_epoch",
       [](TrainConfig& c, const std::string& k, const std::string& v) { c.decay_start_epoch = to_integer<int>(k, v); },
       [](const TrainConfig& c) { return std::to_string(c.decay_start_epoch); }},
      {"max_steps",
       [](TrainConfig& c, const std::string& k, const std::string& v) { c.max_steps = to_integer<long>(k, v); },
       [](const TrainConfig& c) { return std::to_string(c.max_steps); }},
  };
  return table;
}

#undef XMODAL_DOUBLE_FIELD

}  // namespace

KeyValues parse_key_values(const std::string& text, const std::string& origin) {
  KeyValues kv;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError(origin + ":" + std::to_string(lineno) + ": expected key=value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues read_key_values(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str(), path.string());
}

TrainConfig config_from_key_values(const KeyValues& kv) {
  TrainConfig cfg;
  if (auto it = kv.find("model"); it != kv.end()) cfg = default_train_config(parse_model_kind(it->second));
  for (const auto& [key, value] : kv) {
    if (key == "model") continue;
    bool known = false;
    for (const auto& f : fields())
      if (key == f.name) {
        f.set(cfg, key, value);
        known = true;
        break;
      }
    if (!known) throw UsageError("unknown config key '" + key + "'");
  }
  return cfg;
}

KeyValues to_key_values(const TrainConfig& cfg) {
  KeyValues kv;
  for (const auto& f : fields()) kv[f.name] = f.get(cfg);
  return kv;
}

std::string to_text(const TrainConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : to_key_values(cfg)) out += k + "=" + v + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.emplace_back(f.name);
  return out;
}

std::string config_hash(const TrainConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : to_text(cfg)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

fs::path make_run_dir(const fs::path& runs_root, const TrainConfig& cfg) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &tm);
  const std::string base = config_hash(cfg) + "-" + stamp;
  fs::path dir = runs_root / base;
  for (int k = 1; fs::exists(dir); ++k) dir = runs_root / (base + "-" + std::to_string(k));
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create run directory " + dir.string() + ": " + ec.message());
  return dir;
}

// ---------------------------------------------------------------------------
// inference

namespace {

Tensor<float> stack(const std::vector<const Volume*>& vols) {
  const Dims d = vols.front()->dims();
  Tensor<float> t({static_cast<std::int64_t>(vols.size()), 1, d.d, d.h, d.w});
  float* dst = t.data();
  for (const Volume* v : vols) {
    if (v->dims() != d) throw DataError("batch volumes differ in shape");
    dst = std::copy(v->values().begin(), v->values().end(), dst);
  }
  return t;
}

void check_generator_input(const GeneratorSpec& spec, const Dims& d) {
  const auto f = spec.downsampling();
  if (d.d % f || d.h % f || d.w % f)
    throw UsageError("input " + to_string(d) + " is not divisible by " + std::to_string(f));
}

}  // namespace

Volume translate_normalized(const TranslationModel<float>& model, const NormalizationStats& stats, const Volume& mri,
                            double abeta_ratio) {
  check_generator_input(model.generator_spec, mri.dims());
  if (!(abeta_ratio > 0.0)) throw UsageError("abeta ratio must be positive");
  validate(stats);
  const Volume x = normalize_intensity(mri, stats.mri);
  const float a = static_cast<float>(normalize_abeta(abeta_ratio, stats.abeta));
  ag::NoGradGuard no_grad;
  auto out = model.generators.mri_to_pet->forward(ag::Var<float>(to_tensor<float>(x)),
                                                  ag::Var<float>(Tensor<float>({1}, a)), Mode::eval);
  return from_tensor(out.value(), 0, mri.spacing());
}

Volume generate_pet(const Checkpoint& ckpt, const Volume& mri, double abeta_ratio) {
  return denormalize_intensity(translate_normalized(ckpt.model, ckpt.stats, mri, abeta_ratio), ckpt.stats.pet);
}

double validation_ssim(const TranslationModel<float>& model, const NormalizationStats& stats,
                       const std::vector<PairedSample>& samples) {
  if (samples.empty()) return std::numeric_limits<double>::quiet_NaN();
  double acc = 0.0;
  for (const auto& s : samples) {
    const Volume gen = to_metric_range(translate_normalized(model, stats, s.mri, s.abeta_ratio));
    const Volume tru = to_metric_range(normalize_intensity(s.pet, stats.pet));
    acc += ssim3d(gen, tru);
  }
  return acc / static_cast<double>(samples.size());
}

// ---------------------------------------------------------------------------
// training loop

namespace {

using V = ag::Var<float>;

void set_requires_grad(const std::vector<Parameter<float>>& params, bool on) {
  for (auto p : params) p.var.set_requires_grad(on);
}

struct Batch {
  V mri, pet, abeta;
};

class Trainer {
 public:
  Trainer(const TrainConfig& cfg, const TrainingData& data, const fs::path& run_dir, const StepCallback& cb)
      : cfg_(cfg), data_(data), run_dir_(run_dir), cb_(cb) {}

  TrainResult run();

 private:
  Batch make_batch(const std::vector<std::size_t>& idx);
  void step_pix2pix(const Batch& b, StepInfo& info);
  void step_cycle(const Batch& b, StepInfo& info);
  void audit_sharing() const;
  double record(StepInfo& info, const std::string& term, const V& v) const;
  void write_checkpoint(const fs::path& path, int epoch, double ssim) const;

  const TrainConfig& cfg_;
  const TrainingData& data_;
  fs::path run_dir_;
  const StepCallback& cb_;

  NormalizationStats stats_;
  std::vector<PairedSample> normalized_;
  TranslationModel<float> model_;
  std::unique_ptr<Adam<float>> opt_g_, opt_d_;
  std::vector<Parameter<float>> g_params_, d_params_;
  std::mt19937_64 shuffle_rng_, augment_rng_, dropout_rng_;
  long step_ = 0;
};

double Trainer::record(StepInfo& info, const std::string& term, const V& v) const {
  const double value = static_cast<double>(v.item());
  if (!std::isfinite(value))
    throw DivergenceError("non-finite loss " + term + " at step " + std::to_string(info.step));
  info.losses.emplace_back(term, value);
  return value;
}

Batch Trainer::make_batch(const std::vector<std::size_t>& idx) {
  std::vector<PairedSample> local;
  local.reserve(idx.size());
  for (std::size_t i : idx) {
    if (cfg_.augment)
      local.push_back(compose_random_pipeline(normalized_[i], cfg_.augment_config, augment_rng_));
    else
      local.push_back(normalized_[i]);
  }
  std::vector<const Volume*> mri, pet;
  Tensor<float> abeta({static_cast<std::int64_t>(idx.size())});
  for (std::size_t k = 0; k < local.size(); ++k) {
    mri.push_back(&local[k].mri);
    pet.push_back(&local[k].pet);
    abeta[static_cast<std::int64_t>(k)] = static_cast<float>(normalize_abeta(local[k].abeta_ratio, stats_.abeta));
  }
  return {V(stack(mri)), V(stack(pet)), V(std::move(abeta))};
}

void Trainer::step_pix2pix(const Batch& b, StepInfo& info) {
  const auto& g = *model_.generators.mri_to_pet;
  const auto& d = *model_.disc_pet;
  set_requires_grad(d_params_, false);
  V fake = g.forward(b.mri, b.abeta, Mode::train, &dropout_rng_);
  Pix2pixTerms<V> terms{generator_adversarial_loss(d.forward(ag::concat_channels(b.mri, fake)), cfg_.adversarial),
                        l1_loss(fake, b.pet)};
  V total = pix2pix_objective(terms, cfg_.weights);
  record(info, "g_adv", terms.adversarial);
  record(info, "l1", terms.l1);
  record(info, "g_total", total);
  ag::backward(total);
  opt_g_->step();
  opt_g_->zero_grad();

  set_requires_grad(d_params_, true);
  V d_loss = discriminator_loss(d.forward(ag::concat_channels(b.mri, b.pet)),
                                d.forward(ag::concat_channels(b.mri, fake.detach())), cfg_.adversarial);
  record(info, "d_total", d_loss);
  ag::backward(d_loss);
  opt_d_->step();
  opt_d_->zero_grad();
}

void Trainer::step_cycle(const Batch& b, StepInfo& info) {
  const auto& g1 = *model_.generators.mri_to_pet;
  const auto& g2 = *model_.generators.pet_to_mri;
  const auto& dp = *model_.disc_pet;
  const auto& dm = *model_.disc_mri;
  set_requires_grad(d_params_, false);
  V fake_pet = g1.forward(b.mri, b.abeta, Mode::train, &dropout_rng_);
  V rec_mri = g2.forward(fake_pet, b.abeta, Mode::train, &dropout_rng_);
  V fake_mri = g2.forward(b.pet, b.abeta, Mode::train, &dropout_rng_);
  V rec_pet = g1.forward(fake_mri, b.abeta, Mode::train, &dropout_rng_);
  CycleTerms<V> t;
  t.adv_mri_to_pet = generator_adversarial_loss(dp.forward(fake_pet), cfg_.adversarial);
  t.adv_pet_to_mri = generator_adversarial_loss(dm.forward(fake_mri), cfg_.adversarial);
  t.cycle_mri = cycle_loss(b.mri, rec_mri);
  t.cycle_pet = cycle_loss(b.pet, rec_pet);
  if (cfg_.weights.lambda_idt > 0.0)
    t.identity = identity_loss(g1.forward(b.pet, b.abeta, Mode::train, &dropout_rng_), b.pet,
                               g2.forward(b.mri, b.abeta, Mode::train, &dropout_rng_), b.mri);
  else
    t.identity = V::scalar(0.0f);
  V total;
  if (cfg_.model == ModelKind::sharegan)
    total = sharegan_objective(ShareTerms<V>{t, V::scalar(0.0f)}, cfg_.weights);
  else
    total = cyclegan_objective(t, cfg_.weights);
  record(info, "g_adv_mri_to_pet", t.adv_mri_to_pet);
  record(info, "g_adv_pet_to_mri", t.adv_pet_to_mri);
  record(info, "cycle_mri", t.cycle_mri);
  record(info, "cycle_pet", t.cycle_pet);
  record(info, "identity", t.identity);
  record(info, "g_total", total);
  ag::backward(total);
  opt_g_->step();
  opt_g_->zero_grad();

  set_requires_grad(d_params_, true);
  V d_pet = discriminator_loss(dp.forward(b.pet), dp.forward(fake_pet.detach()), cfg_.adversarial);
  V d_mri = discriminator_loss(dm.forward(b.mri), dm.forward(fake_mri.detach()), cfg_.adversarial);
  V d_total = d_pet + d_mri;
  record(info, "d_pet", d_pet);
  record(info, "d_mri", d_mri);
  record(info, "d_total", d_total);
  ag::backward(d_total);
  opt_d_->step();
  opt_d_->zero_grad();
}

void Trainer::audit_sharing() const {
  if (cfg_.model != ModelKind::sharegan) return;
  const auto single = model_.generators.mri_to_pet->parameter_count();
  if (!model_.generators.tied() || count_parameters(g_params_) != single ||
      g_params_.size() != model_.generators.mri_to_pet->parameters().size())
    throw std::logic_error("shared generator audit failed: optimizer holds " +
                           std::to_string(count_parameters(g_params_)) + " parameters, expected " +
                           std::to_string(single));
}

void Trainer::write_checkpoint(const fs::path& path, int epoch, double ssim) const {
  save_checkpoint(Checkpoint{model_, stats_, to_text(cfg_), epoch, ssim}, path);
}

TrainResult Trainer::run() {
  validate(cfg_);
  if (data_.train.empty()) throw DataError("training split is empty");
  for (const auto& s : data_.train) validate(s);
  for (const auto& s : data_.val) validate(s);
  const Dims dims = data_.train.front().mri.dims();
  for (const auto* set : {&data_.train, &data_.val})
    for (const auto& s : *set)
      if (s.mri.dims() != dims) throw DataError("sample " + s.subject_id + " has shape " + to_string(s.mri.dims()) +
                                                ", expected " + to_string(dims));

  stats_ = compute_normalization_stats(data_.train);
  for (const auto& s : data_.train)
    normalized_.push_back({s.subject_id, normalize_intensity(s.mri, stats_.mri), normalize_intensity(s.pet, stats_.pet),
                           s.abeta_ratio});

  GeneratorSpec gspec = default_generator_spec(cfg_.model);
  check_generator_input(gspec, dims);
  model_ = build_model<float>(cfg_.model, cfg_.conditioning, gspec, default_discriminator_spec(cfg_.model, dims),
                              derive_seed(cfg_.seed, 100));
  g_params_ = model_.generator_parameters();
  d_params_ = model_.discriminator_parameters();
  const AdamOptions adam{cfg_.learning_rate, cfg_.beta1, cfg_.beta2, cfg_.adam_eps};
  opt_g_ = std::make_unique<Adam<float>>(g_params_, adam);
  opt_d_ = std::make_unique<Adam<float>>(d_params_, adam);
  shuffle_rng_.seed(derive_seed(cfg_.seed, 200));
  augment_rng_.seed(derive_seed(cfg_.seed, 300));
  dropout_rng_.seed(derive_seed(cfg_.seed, 400));

  std::ofstream losses, val_log;
  if (!run_dir_.empty()) {
    std::error_code ec;
    fs::create_directories(run_dir_, ec);
    std::ofstream(run_dir_ / "config.txt") << to_text(cfg_);
    losses.open(run_dir_ / "losses.csv");
    val_log.open(run_dir_ / "val.csv");
    if (!losses || !val_log) throw DataError("cannot write logs under " + run_dir_.string());
    losses << "epoch,step,term,value\n" << std::setprecision(17);
    val_log << "epoch,ssim\n" << std::setprecision(17);
  }

  TrainResult result;
  double best = -std::numeric_limits<double>::infinity();
  bool stop = false;
  int epoch = 0;
  for (; epoch < cfg_.epochs && !stop; ++epoch) {
    double lr = cfg_.learning_rate;
    if (cfg_.lr_schedule == LrSchedule::linear_decay && epoch >= cfg_.decay_start_epoch)
      lr *= 1.0 - static_cast<double>(epoch - cfg_.decay_start_epoch + 1) /
                      static_cast<double>(cfg_.epochs - cfg_.decay_start_epoch + 1);
    opt_g_->set_learning_rate(lr);
    opt_d_->set_learning_rate(lr);
    audit_sharing();

    std::vector<std::size_t> order(normalized_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[std::uniform_int_distribution<std::size_t>(0, i - 1)(shuffle_rng_)]);

    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg_.batch_size)) {
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(std::min(
                                                             order.size(), start + static_cast<std::size_t>(cfg_.batch_size))));
      StepInfo info;
      info.step = ++step_;
      info.epoch = epoch;
      const Batch b = make_batch(idx);
      if (cfg_.model == ModelKind::pix2pix)
        step_pix2pix(b, info);
      else
        step_cycle(b, info);
      if (losses)
        for (const auto& [term, value] : info.losses) losses << epoch << ',' << step_ << ',' << term << ',' << value << '\n';
      if (cb_) cb_(info, model_, stats_);
      if (cfg_.max_steps > 0 && step_ >= cfg_.max_steps) {
        stop = true;
        break;
      }
    }
    if (losses) losses.flush();

    if (!data_.val.empty()) {
      const double ssim = validation_ssim(model_, stats_, data_.val);
      result.val_ssim.push_back(ssim);
      if (val_log) val_log << epoch << ',' << ssim << '\n' << std::flush;
      if (ssim > best) {
        best = ssim;
        if (!run_dir_.empty()) write_checkpoint(run_dir_ / "best.ckpt", epoch, ssim);
      }
    }
  }
  audit_sharing();

  const int last_epoch = epoch - 1;
  const double last_ssim = result.val_ssim.empty() ? 0.0 : result.val_ssim.back();
  result.final_checkpoint = Checkpoint{model_, stats_, to_text(cfg_), last_epoch, last_ssim};
  result.steps = step_;
  if (!run_dir_.empty()) {
    result.final_path = run_dir_ / "final.ckpt";
    result.best_path = run_dir_ / "best.ckpt";
    save_checkpoint(result.final_checkpoint, result.final_path);
    if (data_.val.empty()) save_checkpoint(result.final_checkpoint, result.best_path);
  }
  return result;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const TrainingData& data, const fs::path& run_dir, const StepCallback& on_step) {
  Trainer trainer(cfg, data, run_dir, on_step);
  return trainer.run();
}

}  // namespace xmodal
