#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <fstream>
#include <string>

#include <json.hpp>

#include "sfan/dataset.hpp"
#include "support/temp_dir.hpp"

using testutil::TempDir;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// Run the installed command-line binary with the given arguments.
RunResult run_cli(const std::string& args) {
  static int counter = 0;
  std::string base = "/tmp/sfan_cli_capture_" + std::to_string(::getpid()) + "_" +
                     std::to_string(counter++);
  std::string cmd = std::string(SFAN_CLI_PATH) + " " + args + " > " + base + ".out 2> " +
                    base + ".err";
  int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(base + ".out");
  r.err = slurp(base + ".err");
  std::remove((base + ".out").c_str());
  std::remove((base + ".err").c_str());
  return r;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

}  // namespace

TEST_CASE("running without a subcommand fails with usage guidance") {
  RunResult r = run_cli("");
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("error[bad-arguments]") != std::string::npos);
}

TEST_CASE("help text lists every stage and exits cleanly") {
  RunResult r = run_cli("--help");
  CHECK(r.exit_code == 0);
  for (const char* stage : {"synth", "prep", "train", "infer", "eval"})
    CHECK(r.out.find(stage) != std::string::npos);
}

TEST_CASE("unknown flags are argument errors") {
  RunResult r = run_cli("synth --out /tmp/x --frobnicate");
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("error[bad-arguments]") != std::string::npos);
}

TEST_CASE("missing input files map to the file-not-found exit code") {
  TempDir dir("cli_missing");
  RunResult r = run_cli("train --manifest " + (dir.path / "nope.json").string() +
                        " --task liver --ckpt-out " + (dir.path / "ckpt").string());
  CHECK(r.exit_code == 3);
  CHECK(r.err.find("error[missing-file]") != std::string::npos);
}

TEST_CASE("degenerate option values are rejected up front") {
  TempDir dir("cli_badopt");
  RunResult mix = run_cli("synth --out " + dir.path.string() + " --cases 2 --size-mix 0,0,0");
  CHECK(mix.exit_code == 2);

  RunResult thr = run_cli("infer --tumor-ckpt x --in y --out z --threshold 1.5");
  CHECK(thr.exit_code == 2);
}

TEST_CASE("the window bounds must be ordered") {
  TempDir dir("cli_window");
  RunResult synth = run_cli("synth --out " + dir.path.string() + " --cases 1 --size-mix 1,0,0");
  REQUIRE(synth.exit_code == 0);
  RunResult r = run_cli("prep --manifest " + (dir.path / "manifest.json").string() + " --out " +
                        (dir.path / "prep").string() + " --window=175,-75");
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("error[bad-arguments]") != std::string::npos);
}

TEST_CASE("the five stages chain into a working miniature pipeline") {
  TempDir dir("cli_chain");
  std::string raw = (dir.path / "raw").string();
  std::string prep = (dir.path / "prep").string();
  std::string pred = (dir.path / "pred").string();

  RunResult synth = run_cli("synth --out " + raw + " --cases 2 --seed 11 --size-mix 0,1,0");
  REQUIRE(synth.exit_code == 0);

  RunResult prep_r = run_cli("prep --manifest " + raw + "/manifest.json --out " + prep +
                             " --window=-75,175 --margin-mm 8");
  REQUIRE(prep_r.exit_code == 0);
  auto entries = sfan::load_manifest(prep + "/manifest.json");
  REQUIRE(entries.size() == 2);
  CHECK(entries[0].roi.has_value());

  // Intensities were rescaled into the unit range.
  sfan::CtVolume vol = sfan::load_volume(entries[0].volume_path);
  for (float v : vol.voxels.raw()) {
    REQUIRE(v >= 0.0f);
    REQUIRE(v <= 1.0f);
  }

  write_text((dir.path / "model.json").string(),
             "{\"levels\": 2, \"encoder_channels\": [2, 4], \"aligned_channels\": 2}\n");
  write_text((dir.path / "train.json").string(),
             "{\"max_steps\": 2, \"batch_size\": 1}\n");
  std::string cfg_flags = " --model-config " + (dir.path / "model.json").string() +
                          " --train-config " + (dir.path / "train.json").string();
  RunResult train = run_cli("train --manifest " + prep + "/manifest.json --task tumor" +
                            cfg_flags + " --ckpt-out " + (dir.path / "tumor").string() +
                            " --seed 4");
  REQUIRE(train.exit_code == 0);
  CHECK(std::ifstream(dir.path / "tumor.loss.csv").good());

  RunResult infer = run_cli("infer --tumor-ckpt " + (dir.path / "tumor").string() +
                            " --liver-mask " + entries[0].liver_mask_path.string() + " --in " +
                            entries[0].volume_path.string() + " --out " + pred + "/" +
                            entries[0].case_id + ".json --scales 1.0");
  REQUIRE(infer.exit_code == 0);

  RunResult infer2 = run_cli("infer --tumor-ckpt " + (dir.path / "tumor").string() +
                             " --liver-mask " + entries[1].liver_mask_path.string() + " --in " +
                             entries[1].volume_path.string() + " --out " + pred + "/" +
                             entries[1].case_id + ".json --no-msi");
  REQUIRE(infer2.exit_code == 0);

  RunResult eval = run_cli("eval --pred-dir " + pred + " --manifest " + prep +
                           "/manifest.json --report-out " + (dir.path / "report.json").string());
  REQUIRE(eval.exit_code == 0);
  CHECK(eval.out.find("mean dice") != std::string::npos);

  nlohmann::json report = nlohmann::json::parse(slurp((dir.path / "report.json").string()));
  REQUIRE(report["cases"].size() == 2);
  CHECK(report.contains("mean_dice"));
  CHECK(report.contains("by_size"));
  CHECK(report.contains("by_phase"));
  CHECK(report["cases"][0]["size_group"] == "middle");
}

TEST_CASE("evaluation requires every predicted mask to exist") {
  TempDir dir("cli_nopred");
  RunResult synth = run_cli("synth --out " + dir.path.string() + " --cases 1 --size-mix 1,0,0");
  REQUIRE(synth.exit_code == 0);
  RunResult r = run_cli("eval --pred-dir " + (dir.path / "empty").string() + " --manifest " +
                        (dir.path / "manifest.json").string());
  CHECK(r.exit_code == 3);
  CHECK(r.err.find("error[missing-file]") != std::string::npos);
}
