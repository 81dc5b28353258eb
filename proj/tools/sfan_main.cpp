// Command-line pipeline driver: synthetic data generation, preprocessing,
// training, inference, and evaluation for liver tumor segmentation.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "sfan/dataset.hpp"
#include "sfan/errors.hpp"
#include "sfan/evaluation.hpp"
#include "sfan/inference.hpp"
#include "sfan/plot.hpp"
#include "sfan/preprocess.hpp"
#include "sfan/synthdata.hpp"
#include "sfan/training.hpp"
#include "sfan/volume_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) sfan::fail(sfan::Errc::missing_file, "cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    sfan::fail(sfan::Errc::corrupt_header, "invalid JSON in " + path + ": " + e.what());
  }
  return j;
}

// ---------------------------------------------------------------- synth ----

struct SynthArgs {
  std::string out_dir;
  int cases = 12;
  unsigned long long seed = 0;
  std::vector<int> size_mix = {1, 1, 1};
};

void run_synth(const SynthArgs& a) {
  if (a.size_mix.size() != 3)
    sfan::fail(sfan::Errc::bad_arguments, "--size-mix expects three comma-separated counts");
  sfan::SizeMix mix;
  mix.small = a.size_mix[0];
  mix.middle = a.size_mix[1];
  mix.large = a.size_mix[2];
  auto entries = sfan::generate_suite(a.out_dir, a.cases, a.seed, mix);
  std::printf("wrote %zu cases to %s\n", entries.size(), a.out_dir.c_str());
}

// ----------------------------------------------------------------- prep ----

struct PrepArgs {
  std::string manifest;
  std::string out_dir;
  std::vector<double> window = {sfan::kDefaultWindowLo, sfan::kDefaultWindowHi};
  double margin_mm = sfan::kDefaultRoiMarginMm;
};

void run_prep(const PrepArgs& a) {
  if (a.window.size() != 2)
    sfan::fail(sfan::Errc::bad_arguments, "--window expects two comma-separated values lo,hi");
  const float lo = static_cast<float>(a.window[0]);
  const float hi = static_cast<float>(a.window[1]);
  if (!(lo < hi))
    sfan::fail(sfan::Errc::bad_arguments, "--window lower bound must be below upper bound");
  if (!(a.margin_mm >= 0.0))
    sfan::fail(sfan::Errc::bad_arguments, "--margin-mm must be non-negative");

  auto entries = sfan::load_manifest(a.manifest);
  std::error_code ec;
  fs::create_directories(a.out_dir, ec);
  if (ec) sfan::fail(sfan::Errc::unwritable_path, "cannot create directory: " + a.out_dir);

  std::vector<sfan::CaseEntry> out_entries;
  for (const auto& entry : entries) {
    sfan::CtVolume vol = sfan::load_volume(entry.volume_path);
    vol.phase = entry.phase;
    vol.case_id = entry.case_id;
    sfan::SegmentationMask tumor =
        sfan::load_mask(entry.tumor_mask_path, sfan::MaskSemantics::tumor_mask, vol.dims());
    sfan::SegmentationMask liver =
        sfan::load_mask(entry.liver_mask_path, sfan::MaskSemantics::liver_mask, vol.dims());

    auto [canon_first, canon_tumor_opt] = sfan::normalize_orientation(vol, tumor);
    auto [canon, canon_liver_opt] = sfan::normalize_orientation(vol, liver);
    (void)canon_first;
    sfan::SegmentationMask canon_tumor = std::move(*canon_tumor_opt);
    sfan::SegmentationMask canon_liver = std::move(*canon_liver_opt);

    canon = sfan::clip_hu(canon, lo, hi);
    canon = sfan::rescale_intensity(canon, lo, hi);

    sfan::RoiBox roi = sfan::liver_roi(canon_liver, static_cast<float>(a.margin_mm), canon.spacing);

    sfan::CaseEntry out = entry;
    fs::path dir(a.out_dir);
    out.volume_path = (dir / (entry.case_id + ".json")).string();
    out.tumor_mask_path = (dir / (entry.case_id + "_tumor.json")).string();
    out.liver_mask_path = (dir / (entry.case_id + "_liver.json")).string();
    out.roi = roi;

    sfan::save_volume(canon, out.volume_path);
    sfan::VolumeMeta meta = sfan::meta_of(canon);
    sfan::save_mask(canon_tumor, out.tumor_mask_path, &meta);
    sfan::save_mask(canon_liver, out.liver_mask_path, &meta);
    out_entries.push_back(std::move(out));
  }
  std::string manifest_out = (fs::path(a.out_dir) / "manifest.json").string();
  sfan::save_manifest(out_entries, manifest_out);
  std::printf("preprocessed %zu cases into %s\n", out_entries.size(), a.out_dir.c_str());
}

// ---------------------------------------------------------------- train ----

struct TrainArgs {
  std::string manifest;
  std::string task = "tumor";
  std::string model_config;
  std::string train_config;
  std::string ckpt_out;
  unsigned long long seed = 0;
  bool seed_given = false;
};

void run_train(const TrainArgs& a) {
  sfan::TrainTask task = sfan::train_task_from_name(a.task);

  sfan::ModelConfig mcfg;
  mcfg.kind = (task == sfan::TrainTask::liver) ? "unet" : "sfan";
  if (!a.model_config.empty()) {
    json j = load_json_file(a.model_config);
    try {
      j.get_to(mcfg);
    } catch (const json::exception& e) {
      sfan::fail(sfan::Errc::bad_arguments, std::string("invalid model config: ") + e.what());
    }
  }
  mcfg.validate();

  sfan::TrainConfig tcfg;
  if (!a.train_config.empty()) {
    json j = load_json_file(a.train_config);
    try {
      j.get_to(tcfg);
    } catch (const json::exception& e) {
      sfan::fail(sfan::Errc::bad_arguments, std::string("invalid train config: ") + e.what());
    }
  }
  if (a.seed_given) tcfg.seed = a.seed;
  tcfg.validate();

  auto entries = sfan::load_manifest(a.manifest);
  sfan::SliceDataset ds = sfan::load_training_slices(entries, task, mcfg.pool_factor());
  std::printf("task=%s slices=%zu grid=%dx%d\n", a.task.c_str(), ds.slices.size(), ds.height,
              ds.width);

  sfan::FitResult result = sfan::fit(ds, mcfg, tcfg, a.ckpt_out);
  std::printf("trained %zu steps, final loss %.6f, checkpoint %s\n", result.loss_history.size(),
              result.loss_history.empty() ? 0.0 : result.loss_history.back(), a.ckpt_out.c_str());
}

// ---------------------------------------------------------------- infer ----

struct InferArgs {
  std::string liver_ckpt;
  std::string tumor_ckpt;
  std::string in_path;
  std::string out_path;
  std::string liver_mask_path;
  std::vector<double> scales = {0.5, 1.0, 1.5};
  bool no_msi = false;
  double threshold = sfan::kDefaultThreshold;
};

void run_infer(const InferArgs& a) {
  if (!(a.threshold >= 0.0 && a.threshold <= 1.0))
    sfan::fail(sfan::Errc::bad_arguments, "--threshold must lie in [0,1]");
  if (a.scales.empty())
    sfan::fail(sfan::Errc::bad_arguments, "--scales must list at least one factor");

  sfan::Predictor tumor_model = sfan::Predictor::load(a.tumor_ckpt);
  std::optional<sfan::Predictor> liver_model;
  if (!a.liver_ckpt.empty()) liver_model.emplace(sfan::Predictor::load(a.liver_ckpt));

  sfan::CtVolume vol = sfan::load_volume(a.in_path);

  std::optional<sfan::SegmentationMask> liver_override;
  if (!a.liver_mask_path.empty())
    liver_override =
        sfan::load_mask(a.liver_mask_path, sfan::MaskSemantics::liver_mask, vol.dims());

  sfan::InferOptions opts;
  opts.scales.assign(a.scales.begin(), a.scales.end());
  opts.multi_scale = !a.no_msi;
  opts.threshold = static_cast<float>(a.threshold);

  sfan::PredictOutcome outcome =
      sfan::predict_volume(tumor_model, liver_model ? &*liver_model : nullptr, vol, opts,
                           liver_override ? &*liver_override : nullptr);
  if (!outcome.liver_found)
    std::fprintf(stderr, "warning: no liver region detected in %s; writing empty mask\n",
                 a.in_path.c_str());

  fs::path out_path(a.out_path);
  if (out_path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(out_path.parent_path(), ec);
    if (ec) sfan::fail(sfan::Errc::unwritable_path, "cannot create directory for: " + a.out_path);
  }
  sfan::VolumeMeta meta = sfan::meta_of(vol);
  sfan::save_mask(outcome.mask, out_path, &meta);
  std::printf("wrote %s (%lld positive voxels)\n", a.out_path.c_str(),
              static_cast<long long>(outcome.mask.positive_count()));
}

// ----------------------------------------------------------------- eval ----

struct EvalArgs {
  std::string pred_dir;
  std::string manifest;
  std::string report_out;
  std::string plot_out;
};

void run_eval(const EvalArgs& a) {
  auto entries = sfan::load_manifest(a.manifest);
  std::vector<sfan::EvalCase> cases;
  for (const auto& entry : entries) {
    sfan::EvalCase ec;
    ec.case_id = entry.case_id;
    std::string pred_path = (fs::path(a.pred_dir) / (entry.case_id + ".json")).string();
    sfan::CtVolume vol = sfan::load_volume(entry.volume_path);
    ec.pred = sfan::load_mask(pred_path, sfan::MaskSemantics::tumor_mask, vol.dims());
    ec.gt = sfan::load_mask(entry.tumor_mask_path, sfan::MaskSemantics::tumor_mask, vol.dims());
    ec.spacing = vol.spacing;
    ec.phase = entry.phase;
    cases.push_back(std::move(ec));
  }
  sfan::EvalReport report = sfan::evaluate(cases);

  std::string text = sfan::report_to_text(report);
  std::fputs(text.c_str(), stdout);

  if (!a.report_out.empty()) {
    fs::path rp(a.report_out);
    if (rp.has_parent_path()) {
      std::error_code dir_ec;
      fs::create_directories(rp.parent_path(), dir_ec);
    }
    std::ofstream out(a.report_out);
    if (!out) sfan::fail(sfan::Errc::unwritable_path, "cannot write report: " + a.report_out);
    out << sfan::report_to_json(report).dump(2) << "\n";
  }
  if (!a.plot_out.empty()) sfan::write_report_chart(a.plot_out, report);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Liver tumor segmentation pipeline: synthesize, preprocess, train, infer, evaluate"};
  app.require_subcommand(1);

  SynthArgs synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic CT phantom suite");
  synth_cmd->add_option("--out", synth.out_dir, "Output directory for the suite")->required();
  synth_cmd->add_option("--cases", synth.cases, "Number of cases to generate")
      ->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "Base random seed")->capture_default_str();
  synth_cmd
      ->add_option("--size-mix", synth.size_mix,
                   "Small,middle,large tumor counts per cycle (e.g. 1,1,1)")
      ->delimiter(',')
      ->capture_default_str();

  PrepArgs prep;
  CLI::App* prep_cmd = app.add_subcommand("prep", "Preprocess a dataset for training/inference");
  prep_cmd->add_option("--manifest", prep.manifest, "Input dataset manifest")->required();
  prep_cmd->add_option("--out", prep.out_dir, "Output directory")->required();
  prep_cmd
      ->add_option("--window", prep.window,
                   "Intensity window lo,hi in HU (use --window=-75,175 form)")
      ->delimiter(',')
      ->capture_default_str();
  prep_cmd->add_option("--margin-mm", prep.margin_mm, "Liver region margin in millimeters")
      ->capture_default_str();

  TrainArgs train;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a segmentation model");
  train_cmd->add_option("--manifest", train.manifest, "Preprocessed dataset manifest")->required();
  train_cmd->add_option("--task", train.task, "Training task: liver or tumor")
      ->check(CLI::IsMember({"liver", "tumor"}))
      ->capture_default_str();
  train_cmd->add_option("--model-config", train.model_config, "JSON file overriding model defaults");
  train_cmd->add_option("--train-config", train.train_config,
                        "JSON file overriding training defaults");
  train_cmd->add_option("--ckpt-out", train.ckpt_out, "Checkpoint output base path")->required();
  CLI::Option* seed_opt =
      train_cmd->add_option("--seed", train.seed, "Random seed (overrides train config)");

  InferArgs infer;
  CLI::App* infer_cmd = app.add_subcommand("infer", "Segment tumors in one volume");
  infer_cmd->add_option("--liver-ckpt", infer.liver_ckpt, "Liver model checkpoint");
  infer_cmd->add_option("--tumor-ckpt", infer.tumor_ckpt, "Tumor model checkpoint")->required();
  infer_cmd->add_option("--in", infer.in_path, "Preprocessed input volume")->required();
  infer_cmd->add_option("--out", infer.out_path, "Output mask path")->required();
  infer_cmd->add_option("--liver-mask", infer.liver_mask_path,
                        "Ground-truth liver mask to use instead of the liver model");
  infer_cmd->add_option("--scales", infer.scales, "Multi-scale inference factors")
      ->delimiter(',')
      ->capture_default_str();
  infer_cmd->add_flag("--no-msi", infer.no_msi, "Disable multi-scale inference");
  infer_cmd->add_option("--threshold", infer.threshold, "Tumor probability threshold")
      ->capture_default_str();

  EvalArgs eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate predicted masks against ground truth");
  eval_cmd->add_option("--pred-dir", eval.pred_dir, "Directory holding <case_id>.json masks")
      ->required();
  eval_cmd->add_option("--manifest", eval.manifest, "Dataset manifest with ground truth")
      ->required();
  eval_cmd->add_option("--report-out", eval.report_out, "Write the JSON report here");
  eval_cmd->add_option("--plot-out", eval.plot_out, "Write a PNG summary chart here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error[bad-arguments]: %s\n", e.what());
    return 2;
  }

  try {
    if (synth_cmd->parsed()) {
      run_synth(synth);
    } else if (prep_cmd->parsed()) {
      run_prep(prep);
    } else if (train_cmd->parsed()) {
      train.seed_given = seed_opt->count() > 0;
      run_train(train);
    } else if (infer_cmd->parsed()) {
      run_infer(infer);
    } else if (eval_cmd->parsed()) {
      run_eval(eval);
    }
  } catch (const sfan::Error& e) {
    std::fprintf(stderr, "error[%s]: %s\n", e.category(), e.message().c_str());
    return sfan::exit_code(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error[internal]: %s\n", e.what());
    return 3;
  }
  return 0;
}
