// SPDX-License-Identifier: Apache-2.0

#include "xmodal/cli.hpp"

#include <algorithm>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "xmodal/checkpoint.hpp"
#include "xmodal/dataset.hpp"
#include "xmodal/error.hpp"
#include "xmodal/evaluation.hpp"
#include "xmodal/png.hpp"
#include "xmodal/simd/kernels.hpp"
#include "xmodal/synthetic_data.hpp"
#include "xmodal/training.hpp"
#include "xmodal/volume_io.hpp"

namespace fs = std::filesystem;

namespace xmodal::cli {

namespace {

Dims parse_shape(const std::string& text) {
  std::vector<std::int64_t> v;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, 'x')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stoll(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw UsageError("--shape expects N or DxHxW, got '" + text + "'");
    }
  }
  if (v.size() == 1) return {v[0], v[0], v[0]};
  if (v.size() == 3) return {v[0], v[1], v[2]};
  throw UsageError("--shape expects N or DxHxW, got '" + text + "'");
}

std::string flag_name(const std::string& key) {
  std::string f = key;
  std::replace(f.begin(), f.end(), '_', '-');
  return "--" + f;
}

void echo(std::ostream& out, const std::vector<std::pair<std::string, std::string>>& kv) {
  for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

struct MaskArgs {
  std::string dir;
  std::string target;
  std::string cerebellum;

  void add(CLI::App* app) {
    app->add_option("--masks", dir, "Directory holding target.xvol and cerebellum.xvol");
    app->add_option("--target-mask", target, "Target (cortical) region mask volume");
    app->add_option("--cerebellum-mask", cerebellum, "Cerebellum reference mask volume");
  }
  bool given() const { return !dir.empty() || !target.empty() || !cerebellum.empty(); }
  RegionMasks load() const {
    fs::path t = target, c = cerebellum;
    if (!dir.empty()) {
      if (t.empty()) t = fs::path(dir) / "target.xvol";
      if (c.empty()) c = fs::path(dir) / "cerebellum.xvol";
    }
    if (t.empty() || c.empty()) throw UsageError("both target and cerebellum masks are required");
    return read_masks(t, c);
  }
};

/// Manifest restricted to one split when a splits file is given.
Manifest load_subset(const std::string& manifest_path, const std::string& splits_path, const std::string& split) {
  if (manifest_path.empty()) throw UsageError("--manifest is required");
  Manifest m = read_manifest(manifest_path);
  if (splits_path.empty()) return m;
  const auto assignment = read_splits(splits_path);
  check_no_leakage(m, assignment);
  return select(m, assignment, parse_split(split));
}

std::string require_checkpoint(const std::string& path) {
  if (path.empty()) throw DataError("missing checkpoint (pass --checkpoint)");
  if (!fs::exists(path)) throw DataError("missing checkpoint " + path);
  return path;
}

void print_summary(std::ostream& out, const EvalReport& r) {
  out << "images=" << r.rows.size() << '\n'
      << "ssim_mean=" << fmt(r.ssim.mean) << " ssim_std=" << fmt(r.ssim.std) << '\n'
      << "psnr_mean=" << fmt(r.psnr.mean) << " psnr_std=" << fmt(r.psnr.std) << '\n'
      << "mse_mean=" << fmt(r.mse.mean) << " mse_std=" << fmt(r.mse.std) << '\n';
  if (r.has_suvr)
    out << "suvr_pcc=" << fmt(r.suvr_correlation.r) << " suvr_p=" << fmt(r.suvr_correlation.p_value) << '\n'
        << "accuracy=" << fmt(r.classification.accuracy) << " f1=" << fmt(r.classification.f1) << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Conditional MRI to PET translation"};
  app.name("xmodal");
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  // synth-data
  PhantomSpec phantom;
  std::string synth_out, synth_shape = "64";
  auto* synth = app.add_subcommand("synth-data", "Write a synthetic paired phantom dataset");
  synth->add_option("--out", synth_out, "Output dataset directory")->required();
  synth->add_option("--subjects", phantom.n_subjects, "Number of subjects")->capture_default_str();
  synth->add_option("--images-per-subject", phantom.images_per_subject)->capture_default_str();
  synth->add_option("--shape", synth_shape, "N or DxHxW, multiples of 8")->capture_default_str();
  synth->add_option("--abeta-lo", phantom.abeta_lo)->capture_default_str();
  synth->add_option("--abeta-hi", phantom.abeta_hi)->capture_default_str();
  synth->add_option("--uptake-base", phantom.uptake_base)->capture_default_str();
  synth->add_option("--uptake-coupling", phantom.uptake_coupling)->capture_default_str();
  synth->add_option("--uptake-jitter", phantom.uptake_jitter)->capture_default_str();
  synth->add_option("--shape-jitter", phantom.shape_jitter)->capture_default_str();
  synth->add_option("--mri-noise", phantom.mri_noise)->capture_default_str();
  synth->add_option("--pet-noise", phantom.pet_noise)->capture_default_str();
  synth->add_option("--seed", phantom.seed)->capture_default_str();

  // split
  std::string split_manifest, split_out;
  std::int64_t split_train = -1, split_val = -1, split_test = -1;
  std::uint64_t split_seed = 0;
  auto* split = app.add_subcommand("split", "Assign whole subjects to train/val/test");
  split->add_option("--manifest", split_manifest)->required();
  split->add_option("--out", split_out, "Splits CSV (default: splits.csv beside the manifest)");
  split->add_option("--train", split_train, "Training image count");
  split->add_option("--val", split_val, "Validation image count");
  split->add_option("--test", split_test, "Test image count");
  split->add_option("--seed", split_seed)->capture_default_str();

  // train
  std::string train_manifest, train_splits, train_config, runs_root = "runs", run_dir;
  std::map<std::string, std::string> train_flags;
  auto* train_cmd = app.add_subcommand("train", "Train a translation model");
  train_cmd->add_option("--manifest", train_manifest)->required();
  train_cmd->add_option("--splits", train_splits, "Splits CSV (default: computed from split sizes and seed)");
  train_cmd->add_option("--config", train_config, "key=value config file; flags override it");
  train_cmd->add_option("--runs-root", runs_root, "Parent of hashed run directories")->capture_default_str();
  train_cmd->add_option("--run-dir", run_dir, "Explicit run directory");
  std::map<std::string, CLI::Option*> train_opts;
  for (const auto& key : config_keys()) {
    std::string names = flag_name(key);
    if (key == "conditioning") names += ",--cond";
    train_opts[key] = train_cmd->add_option(names, train_flags[key]);
  }

  // generate
  std::string gen_ckpt, gen_mri, gen_out;
  double gen_abeta = 0.0;
  auto* gen = app.add_subcommand("generate", "Synthesize PET from one MRI volume");
  gen->add_option("--checkpoint", gen_ckpt);
  gen->add_option("--mri", gen_mri)->required();
  gen->add_option("--abeta", gen_abeta, "Plasma Abeta42/40 ratio")->required();
  gen->add_option("--out", gen_out, "Output .xvol")->required();

  // evaluate / report
  std::string ev_ckpt, ev_manifest, ev_splits, ev_split = "test", ev_out;
  MaskArgs ev_masks;
  auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint on a test set");
  evaluate->add_option("--checkpoint", ev_ckpt);
  evaluate->add_option("--manifest", ev_manifest);
  evaluate->add_option("--splits", ev_splits);
  evaluate->add_option("--split", ev_split)->capture_default_str()->check(CLI::IsMember({"train", "val", "test"}));
  evaluate->add_option("--out", ev_out, "Directory for report.csv and report.json");
  ev_masks.add(evaluate);

  std::string rp_ckpt, rp_manifest, rp_splits, rp_split = "test", rp_out;
  MaskArgs rp_masks;
  auto* report = app.add_subcommand("report", "Evaluation report with three-view PNG montages");
  report->add_option("--checkpoint", rp_ckpt);
  report->add_option("--manifest", rp_manifest);
  report->add_option("--splits", rp_splits);
  report->add_option("--split", rp_split)->capture_default_str()->check(CLI::IsMember({"train", "val", "test"}));
  report->add_option("--out", rp_out)->required();
  rp_masks.add(report);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*synth) {
      phantom.shape = parse_shape(synth_shape);
      validate(phantom);
      echo(out, {{"command", "synth-data"}, {"out", synth_out}, {"subjects", std::to_string(phantom.n_subjects)},
                 {"images_per_subject", std::to_string(phantom.images_per_subject)}, {"shape", to_string(phantom.shape)},
                 {"abeta_lo", fmt(phantom.abeta_lo)}, {"abeta_hi", fmt(phantom.abeta_hi)},
                 {"uptake_base", fmt(phantom.uptake_base)}, {"uptake_coupling", fmt(phantom.uptake_coupling)},
                 {"uptake_jitter", fmt(phantom.uptake_jitter)}, {"shape_jitter", fmt(phantom.shape_jitter)},
                 {"mri_noise", fmt(phantom.mri_noise)}, {"pet_noise", fmt(phantom.pet_noise)},
                 {"seed", std::to_string(phantom.seed)}});
      const fs::path manifest = synthesize_dataset(phantom, synth_out);
      out << "manifest=" << manifest.string() << '\n';
      return kExitOk;
    }

    if (*split) {
      const Manifest m = read_manifest(split_manifest);
      SplitSizes sizes = default_split_sizes(static_cast<std::int64_t>(m.size()));
      const int given = (split_train >= 0) + (split_val >= 0) + (split_test >= 0);
      if (given == 3) sizes = {split_train, split_val, split_test};
      else if (given != 0) throw UsageError("pass all of --train, --val, --test or none");
      const fs::path path = split_out.empty() ? fs::path(split_manifest).parent_path() / "splits.csv" : fs::path(split_out);
      echo(out, {{"command", "split"}, {"manifest", split_manifest}, {"out", path.string()},
                 {"train", std::to_string(sizes.train)}, {"val", std::to_string(sizes.val)},
                 {"test", std::to_string(sizes.test)}, {"seed", std::to_string(split_seed)}});
      const auto assignment = split_by_subject(m, sizes, split_seed);
      check_no_leakage(m, assignment);
      write_splits(assignment, path);
      const auto totals = split_totals(m, assignment);
      out << "assigned_train=" << totals.train << " assigned_val=" << totals.val << " assigned_test=" << totals.test
          << '\n';
      return kExitOk;
    }

    if (*train_cmd) {
      KeyValues kv;
      if (!train_config.empty()) kv = read_key_values(train_config);
      for (const auto& [key, opt] : train_opts)
        if (opt->count() > 0) kv[key] = train_flags[key];
      const TrainConfig cfg = config_from_key_values(kv);
      validate(cfg);

      const Manifest manifest = read_manifest(train_manifest);
      SplitAssignment assignment;
      if (!train_splits.empty()) {
        assignment = read_splits(train_splits);
      } else {
        SplitSizes sizes = cfg.split_sizes;
        if (sizes.total() == 0) sizes = default_split_sizes(static_cast<std::int64_t>(manifest.size()));
        assignment = split_by_subject(manifest, sizes, cfg.seed);
      }
      check_no_leakage(manifest, assignment);

      const fs::path dir = run_dir.empty() ? make_run_dir(runs_root, cfg) : fs::path(run_dir);
      fs::create_directories(dir);
      write_splits(assignment, dir / "splits.csv");
      out << "command=train\n" << to_text(cfg) << "run_dir=" << dir.string() << '\n'
          << "simd=" << simd::isa_name(simd::active_isa()) << '\n';

      TrainingData data;
      for (const auto& e : select(manifest, assignment, Split::train)) data.train.push_back(load_sample(e));
      for (const auto& e : select(manifest, assignment, Split::val)) data.val.push_back(load_sample(e));
      out << "train_images=" << data.train.size() << " val_images=" << data.val.size() << '\n';
      const TrainResult result = train(cfg, data, dir);
      out << "steps=" << result.steps << '\n'
          << "checkpoint=" << result.best_path.string() << '\n'
          << "final_checkpoint=" << result.final_path.string() << '\n';
      return kExitOk;
    }

    if (*gen) {
      const Checkpoint ckpt = load_checkpoint(require_checkpoint(gen_ckpt));
      echo(out, {{"command", "generate"}, {"checkpoint", gen_ckpt}, {"mri", gen_mri}, {"abeta", fmt(gen_abeta)},
                 {"out", gen_out}});
      const Volume pet = generate_pet(ckpt, read_volume(gen_mri), gen_abeta);
      write_xvol(pet, gen_out);
      out << "wrote=" << gen_out << '\n';
      return kExitOk;
    }

    if (*evaluate) {
      const Checkpoint ckpt = load_checkpoint(require_checkpoint(ev_ckpt));
      echo(out, {{"command", "evaluate"}, {"checkpoint", ev_ckpt}, {"manifest", ev_manifest}, {"splits", ev_splits},
                 {"split", ev_split}, {"out", ev_out}});
      const Manifest test = load_subset(ev_manifest, ev_splits, ev_split);
      std::optional<RegionMasks> masks;
      if (ev_masks.given()) masks = ev_masks.load();
      const EvalReport r = evaluate_testset(ckpt, test, masks ? &*masks : nullptr);
      if (!ev_out.empty()) {
        fs::create_directories(ev_out);
        write_report_csv(r, fs::path(ev_out) / "report.csv");
        write_report_json(r, fs::path(ev_out) / "report.json");
      }
      print_summary(out, r);
      return kExitOk;
    }

    if (*report) {
      const Checkpoint ckpt = load_checkpoint(require_checkpoint(rp_ckpt));
      echo(out, {{"command", "report"}, {"checkpoint", rp_ckpt}, {"manifest", rp_manifest}, {"splits", rp_splits},
                 {"split", rp_split}, {"out", rp_out}});
      const Manifest test = load_subset(rp_manifest, rp_splits, rp_split);
      std::optional<RegionMasks> masks;
      if (rp_masks.given()) masks = rp_masks.load();
      const EvalReport r = evaluate_testset(ckpt, test, masks ? &*masks : nullptr);
      const fs::path dir = rp_out;
      fs::create_directories(dir / "montages");
      write_report_csv(r, dir / "report.csv");
      write_report_json(r, dir / "report.json");
      for (const auto& e : test) {
        const PairedSample s = load_sample(e);
        const Volume generated = generate_pet(ckpt, s.mri, s.abeta_ratio);
        const auto& st = ckpt.stats;
        const GrayImage montage = stack_rows({three_view(s.mri, st.mri.lo, st.mri.hi),
                                              three_view(s.pet, st.pet.lo, st.pet.hi),
                                              three_view(generated, st.pet.lo, st.pet.hi)});
        write_png(montage, dir / "montages" / (e.image_id() + ".png"));
      }
      print_summary(out, r);
      out << "montages=" << test.size() << '\n';
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "error: usage: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    err << "error: data: " << e.what() << '\n';
    return kExitData;
  } catch (const DivergenceError& e) {
    err << "error: divergence: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const fs::filesystem_error& e) {
    err << "error: data: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: internal: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace xmodal::cli
