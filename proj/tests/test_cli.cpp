// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <sstream>

#include "doctest.h"
#include "test_util.hpp"
#include "xmodal/cli.hpp"
#include "xmodal/dataset.hpp"

using namespace xmodal;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string value_of(const std::string& out, const std::string& key) {
  std::istringstream in(out);
  for (std::string line; std::getline(in, line);)
    if (line.rfind(key + "=", 0) == 0) return line.substr(key.size() + 1);
  return {};
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit 2") {
    auto r = invoke({"train", "--manifest", "m.csv", "--no-such-flag", "1"});
    CHECK(r.code == cli::kExitUsage);
    CHECK(r.err.rfind("error: usage: ", 0) == 0);
    CHECK(invoke({}).code == cli::kExitUsage);
    CHECK(invoke({"frobnicate"}).code == cli::kExitUsage);
    CHECK(invoke({"synth-data", "--out", "x", "--shape", "30"}).code == cli::kExitUsage);
    CHECK(invoke({"evaluate", "--split", "holdout"}).code == cli::kExitUsage);
    CHECK(invoke({"--help"}).code == cli::kExitOk);
  }

  TEST_CASE("evaluate without checkpoint exits 3") {
    auto r = invoke({"evaluate", "--manifest", "m.csv"});
    CHECK(r.code == cli::kExitData);
    CHECK(r.err.find("missing checkpoint") != std::string::npos);
    auto dir = test::scratch_dir("cli_missing");
    r = invoke({"evaluate", "--checkpoint", (dir / "nope.ckpt").string(), "--manifest", "m.csv"});
    CHECK(r.code == cli::kExitData);
    CHECK(r.err.rfind("error: data: missing checkpoint", 0) == 0);
  }

  TEST_CASE("missing manifest is a data error") {
    auto dir = test::scratch_dir("cli_nomanifest");
    CHECK(invoke({"split", "--manifest", (dir / "m.csv").string()}).code == cli::kExitData);
  }

  TEST_CASE("synth-data is bitwise reproducible") {
    auto a = test::scratch_dir("cli_synth_a"), b = test::scratch_dir("cli_synth_b");
    for (const auto& d : {a, b})
      REQUIRE(invoke({"synth-data", "--out", d.string(), "--subjects", "3", "--shape", "16", "--seed", "4"}).code == 0);
    for (const char* f : {"manifest.csv", "subjects.csv", "masks/target.xvol", "images/sub-001_img1_mri.xvol",
                          "images/sub-002_img0_pet.xvol"})
      CHECK(test::slurp(a / f) == test::slurp(b / f));
    auto c = test::scratch_dir("cli_synth_c");
    REQUIRE(invoke({"synth-data", "--out", c.string(), "--subjects", "3", "--shape", "16", "--seed", "5"}).code == 0);
    CHECK(test::slurp(a / "images/sub-001_img1_pet.xvol") != test::slurp(c / "images/sub-001_img1_pet.xvol"));
  }

  TEST_CASE("split writes a leak-free assignment") {
    auto d = test::scratch_dir("cli_split");
    REQUIRE(invoke({"synth-data", "--out", d.string(), "--subjects", "10", "--shape", "16"}).code == 0);
    auto r = invoke({"split", "--manifest", (d / "manifest.csv").string(), "--seed", "3"});
    REQUIRE(r.code == 0);
    auto m = read_manifest(d / "manifest.csv");
    auto a = read_splits(d / "splits.csv");
    CHECK_NOTHROW(check_no_leakage(m, a));
    CHECK(value_of(r.out, "train") == "14");
    CHECK(invoke({"split", "--manifest", (d / "manifest.csv").string(), "--train", "5"}).code == cli::kExitUsage);
    CHECK(invoke({"split", "--manifest", (d / "manifest.csv").string(), "--train", "5", "--val", "5", "--test", "5"}).code ==
          cli::kExitUsage);
  }

  TEST_CASE("nonzero classification weight is rejected") {
    auto d = test::scratch_dir("cli_cls");
    REQUIRE(invoke({"synth-data", "--out", d.string(), "--subjects", "3", "--shape", "32"}).code == 0);
    auto r = invoke({"train", "--manifest", (d / "manifest.csv").string(), "--model", "sharegan", "--lambda-cls", "0.1",
                     "--run-dir", (d / "run").string()});
    CHECK(r.code == cli::kExitUsage);
    CHECK(r.err.find("lambda_cls") != std::string::npos);
  }

  TEST_CASE("flags override the config file") {
    auto d = test::scratch_dir("cli_cfg");
    REQUIRE(invoke({"synth-data", "--out", d.string(), "--subjects", "3", "--shape", "32"}).code == 0);
    std::ofstream(d / "cfg.txt") << "model=pix2pix\nepochs=5\nbatch_size=1\nmax_steps=1\nlearning_rate=0.001\n";
    auto r = invoke({"train", "--manifest", (d / "manifest.csv").string(), "--config", (d / "cfg.txt").string(), "--epochs",
                     "1", "--run-dir", (d / "run").string()});
    REQUIRE(r.code == 0);
    CHECK(value_of(r.out, "epochs") == "1");
    CHECK(value_of(r.out, "learning_rate") == "0.001");
    CHECK(value_of(r.out, "model") == "pix2pix");
    CHECK(value_of(r.out, "steps") == "1");
    std::ofstream(d / "bad.txt") << "colour=blue\n";
    CHECK(invoke({"train", "--manifest", (d / "manifest.csv").string(), "--config", (d / "bad.txt").string()}).code ==
          cli::kExitUsage);
  }

  TEST_CASE("smoke: synth, one epoch of conditioned cyclegan, generate") {
    auto d = test::scratch_dir("cli_smoke");
    auto data = d / "data";
    REQUIRE(invoke({"synth-data", "--out", data.string(), "--subjects", "6", "--shape", "64"}).code == 0);
    auto r = invoke({"train", "--manifest", (data / "manifest.csv").string(), "--model", "cyclegan", "--cond",
                     "latent_concat", "--epochs", "1", "--runs-root", (d / "runs").string()});
    INFO(r.err);
    REQUIRE(r.code == 0);
    const fs::path ckpt = value_of(r.out, "checkpoint");
    CHECK(fs::exists(ckpt));
    CHECK(fs::exists(value_of(r.out, "final_checkpoint")));
    CHECK(fs::path(value_of(r.out, "run_dir")).parent_path() == d / "runs");
    auto m = read_manifest(data / "manifest.csv");
    auto g = invoke({"generate", "--checkpoint", ckpt.string(), "--mri", m[0].mri_path.string(), "--abeta", "0.08",
                     "--out", (d / "gen.xvol").string()});
    CHECK(g.code == 0);
    CHECK(fs::exists(d / "gen.xvol"));
    CHECK(invoke({"generate", "--checkpoint", ckpt.string(), "--mri", m[0].mri_path.string(), "--abeta", "-1", "--out",
                  (d / "bad.xvol").string()})
              .code == cli::kExitUsage);
  }
}
