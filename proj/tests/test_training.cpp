// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "doctest.h"
#include "test_util.hpp"
#include "xmodal/checkpoint.hpp"
#include "xmodal/error.hpp"
#include "xmodal/synthetic_data.hpp"
#include "xmodal/training.hpp"

using namespace xmodal;

namespace {

TrainingData phantom_data(int train, int val, std::uint64_t seed = 5) {
  PhantomSpec spec;
  spec.shape = Dims{32, 32, 32};
  spec.n_subjects = std::max(3, train + val);
  spec.seed = seed;
  TrainingData d;
  for (int i = 0; i < train + val; ++i) (i < train ? d.train : d.val).push_back(generate_phantom_pair(spec, i).sample);
  return d;
}

Checkpoint fresh_checkpoint(ModelKind kind, ConditioningMode mode) {
  Checkpoint c;
  c.model = build_model<float>(kind, mode, default_generator_spec(kind), default_discriminator_spec(kind, Dims{32, 32, 32}), 9);
  c.stats = {{0.0, 1.2}, {0.0, 1.8}, {0.05, 0.12}};
  c.config = to_text(default_train_config(kind));
  c.epoch = 3;
  c.val_ssim = 0.5;
  return c;
}

std::size_t count_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

}  // namespace

TEST_SUITE("training") {
  TEST_CASE("config text parses with comments and blank lines") {
    auto kv = parse_key_values("# comment\nmodel = sharegan\n\nepochs=3\nconditioning=latent_add\n");
    auto cfg = config_from_key_values(kv);
    CHECK(cfg.model == ModelKind::sharegan);
    CHECK(cfg.epochs == 3);
    CHECK(cfg.conditioning == ConditioningMode::latent_add);
    CHECK(cfg.weights.lambda_idt == 0.5);
    CHECK_THROWS_AS(parse_key_values("novalue\n"), UsageError);
  }

  TEST_CASE("config rejects unknown keys and bad values") {
    CHECK_THROWS_AS(config_from_key_values({{"lambda_gp", "1"}}), UsageError);
    CHECK_THROWS_AS(config_from_key_values({{"epochs", "two"}}), UsageError);
    CHECK_THROWS_AS(config_from_key_values({{"model", "unet"}}), UsageError);
    auto cfg = config_from_key_values({{"model", "sharegan"}, {"lambda_cls", "0.1"}});
    CHECK_THROWS_AS(validate(cfg), UsageError);
  }

  TEST_CASE("canonical text round trips and hashes stably") {
    auto cfg = default_train_config(ModelKind::cyclegan);
    cfg.conditioning = ConditioningMode::latent_concat;
    cfg.augment_config.flip_axes = {0, 2};
    cfg.learning_rate = 1e-4;
    auto back = config_from_key_values(to_key_values(cfg));
    CHECK(back == cfg);
    CHECK(config_hash(back) == config_hash(cfg));
    CHECK(config_hash(cfg).size() == 16);
    auto other = cfg;
    other.seed = 1;
    CHECK(config_hash(other) != config_hash(cfg));
    CHECK(to_key_values(cfg).size() == config_keys().size());
    const std::string text = to_text(cfg);
    CHECK(text.find("conditioning=latent_concat\n") != std::string::npos);
  }

  TEST_CASE("config file plus later keys override") {
    auto dir = test::scratch_dir("cfgfile");
    std::ofstream(dir / "c.txt") << "model=pix2pix\nepochs=7\nlambda_l1=50\n";
    auto kv = read_key_values(dir / "c.txt");
    kv["epochs"] = "2";
    auto cfg = config_from_key_values(kv);
    CHECK(cfg.epochs == 2);
    CHECK(cfg.weights.lambda_l1 == 50.0);
    CHECK_THROWS_AS(read_key_values(dir / "missing.txt"), DataError);
  }

  TEST_CASE("run directory names carry the config hash") {
    auto root = test::scratch_dir("runs");
    auto cfg = default_train_config(ModelKind::cyclegan);
    auto dir = make_run_dir(root, cfg);
    CHECK(std::filesystem::is_directory(dir));
    CHECK(dir.filename().string().rfind(config_hash(cfg) + "-", 0) == 0);
  }

  TEST_CASE("checkpoint round trip generates identical volumes") {
    auto dir = test::scratch_dir("ckpt");
    for (auto mode : {ConditioningMode::none, ConditioningMode::latent_concat}) {
      auto ckpt = fresh_checkpoint(ModelKind::cyclegan, mode);
      save_checkpoint(ckpt, dir / "a.ckpt");
      auto back = load_checkpoint(dir / "a.ckpt");
      CHECK(back.stats == ckpt.stats);
      CHECK(back.config == ckpt.config);
      CHECK(back.epoch == 3);
      CHECK(back.model.conditioning == mode);
      auto mri = test::random_volume(Dims{16, 16, 16}, 3, 0.0, 1.2);
      CHECK(generate_pet(back, mri, 0.08) == generate_pet(ckpt, mri, 0.08));
      const auto a = ckpt.model.all_parameters(), b = back.model.all_parameters();
      REQUIRE(a.size() == b.size());
      for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].var.value() == b[i].var.value());
    }
  }

  TEST_CASE("checkpoint errors") {
    auto dir = test::scratch_dir("ckpt_bad");
    try {
      load_checkpoint(dir / "none.ckpt");
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("missing checkpoint") != std::string::npos);
    }
    std::ofstream(dir / "junk.ckpt") << "XCKPT1 nonsense";
    CHECK_THROWS_AS(load_checkpoint(dir / "junk.ckpt"), DataError);
    save_checkpoint(fresh_checkpoint(ModelKind::pix2pix, ConditioningMode::image_add), dir / "p.ckpt");
    const auto bytes = test::slurp(dir / "p.ckpt");
    std::ofstream(dir / "short.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() - 100);
    CHECK_THROWS_AS(load_checkpoint(dir / "short.ckpt"), DataError);
  }

  TEST_CASE("generate_pet shape, range and errors") {
    auto ckpt = fresh_checkpoint(ModelKind::sharegan, ConditioningMode::image_add);
    auto mri = test::random_volume(Dims{16, 24, 8}, 4, 0.0, 1.2);
    auto pet = generate_pet(ckpt, mri, 0.07);
    CHECK(pet.dims() == mri.dims());
    for (float v : pet.values()) CHECK((v >= 0.0f && v <= 1.8f + 1e-5f));
    CHECK_THROWS_AS(generate_pet(ckpt, test::random_volume(Dims{16, 20, 8}, 4), 0.07), UsageError);
    CHECK_THROWS_AS(generate_pet(ckpt, mri, 0.0), UsageError);
    CHECK_THROWS_AS(generate_pet(ckpt, mri, -0.1), UsageError);
  }

  TEST_CASE("short pix2pix run writes logs and checkpoints") {
    auto dir = test::scratch_dir("run_pix2pix");
    auto cfg = default_train_config(ModelKind::pix2pix);
    cfg.conditioning = ConditioningMode::latent_add;
    cfg.epochs = 1;
    cfg.batch_size = 1;
    cfg.max_steps = 2;
    auto res = train(cfg, phantom_data(3, 1), dir);
    CHECK(res.steps == 2);
    CHECK(res.val_ssim.size() == 1);
    CHECK(std::isfinite(res.val_ssim[0]));
    for (const char* f : {"config.txt", "losses.csv", "val.csv", "best.ckpt", "final.ckpt"})
      CHECK(std::filesystem::exists(dir / f));
    CHECK(count_lines(dir / "losses.csv") == 1 + 2 * 4);
    CHECK(test::slurp(dir / "config.txt") == to_text(cfg));
    CHECK(load_checkpoint(res.final_path).model.kind == ModelKind::pix2pix);
  }

  TEST_CASE("short sharegan run keeps one parameter set") {
    auto cfg = default_train_config(ModelKind::sharegan);
    cfg.conditioning = ConditioningMode::latent_concat;
    cfg.epochs = 1;
    cfg.batch_size = 2;
    cfg.max_steps = 1;
    std::vector<std::string> terms;
    auto res = train(cfg, phantom_data(2, 0), {}, [&](const StepInfo& info, const TranslationModel<float>& m, const NormalizationStats&) {
      for (const auto& t : info.losses) terms.push_back(t.first);
      CHECK(m.generators.tied());
    });
    CHECK(res.steps == 1);
    CHECK(res.val_ssim.empty());
    CHECK(res.final_checkpoint.model.generators.tied());
    CHECK(std::find(terms.begin(), terms.end(), "cycle_mri") != terms.end());
    CHECK(std::find(terms.begin(), terms.end(), "identity") != terms.end());
  }

  TEST_CASE("training is reproducible for a seed") {
    auto cfg = default_train_config(ModelKind::pix2pix);
    cfg.epochs = 1;
    cfg.batch_size = 1;
    cfg.max_steps = 2;
    auto data = phantom_data(2, 0);
    std::vector<double> a, b;
    train(cfg, data, {}, [&](const StepInfo& i, const auto&, const auto&) { for (auto& t : i.losses) a.push_back(t.second); });
    train(cfg, data, {}, [&](const StepInfo& i, const auto&, const auto&) { for (auto& t : i.losses) b.push_back(t.second); });
    CHECK(a == b);
  }

  TEST_CASE("non-finite loss raises a divergence error") {
    auto cfg = default_train_config(ModelKind::cyclegan);
    cfg.augment = false;
    cfg.epochs = 1;
    cfg.batch_size = 1;
    cfg.max_steps = 3;
    auto poison = [](const StepInfo& info, const TranslationModel<float>& m, const NormalizationStats&) {
      if (info.step != 1) return;
      auto w = m.generators.mri_to_pet->parameters().front().var;
      w.mutable_value()[0] = std::numeric_limits<float>::quiet_NaN();
    };
    CHECK_THROWS_AS(train(cfg, phantom_data(3, 0), {}, poison), DivergenceError);
  }

  TEST_CASE("training input checks") {
    auto cfg = default_train_config(ModelKind::cyclegan);
    CHECK_THROWS_AS(train(cfg, TrainingData{}, {}), DataError);
    auto data = phantom_data(2, 0);
    data.train[1].pet = Volume(Dims{32, 32, 24});
    CHECK_THROWS_AS(train(cfg, data, {}), DataError);
    cfg.epochs = 0;
    CHECK_THROWS_AS(train(cfg, phantom_data(2, 0), {}), UsageError);
  }
}
