#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "weakdiff/cli.hpp"
#include "weakdiff/io.hpp"

using namespace weakdiff;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("weakdiff_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  std::string sub(const std::string& name) const {
    fs::create_directories(dir_ / name);
    return path(name);
  }

  // Small model and schedule so training subcommands finish quickly.
  std::vector<std::string> small(std::vector<std::string> args) const {
    std::vector<std::string> out{"--set", "schedule.steps=20", "--set", "codec.latent_dim=2", "--set",
                                 "model.hidden_dim=8", "--set", "data.pretrain_n=200", "--set", "data.n=100",
                                 "--set", "train.eval_samples=2", "--set", "train.eval_denoise_examples=8"};
    out.insert(out.end(), args.begin(), args.end());
    return out;
  }

  fs::path dir_;
};

std::string slurp(const std::string& p) { return read_file(p); }

}  // namespace

TEST_F(CliTest, HelpAndUsageErrors) {
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_EQ(run({"gen-data", "--help"}).code, 0);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"--out", path("x"), "gen-data", "--bogus"}).code, 2);
  EXPECT_EQ(run({"--out", path("x"), "--set", "nokey=1", "gen-data"}).code, 2);
  EXPECT_EQ(run({"--out", path("x"), "--set", "malformed", "gen-data"}).code, 2);
  EXPECT_EQ(run({"--config", path("missing.conf"), "gen-data"}).code, 2);
  EXPECT_EQ(run({"filter"}).code, 2);
  EXPECT_EQ(run({"eval"}).code, 2);
}

TEST_F(CliTest, CorruptionRateOutOfRangeNamesFlag) {
  const auto r = run({"--out", dir_.string(), "gen-data", "--n", "10", "--corruption-rate", "1.5"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--corruption-rate"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir_ / "dataset.jsonl"));
}

TEST_F(CliTest, GenDataZeroRateIsAllClean) {
  ASSERT_EQ(run({"--out", dir_.string(), "gen-data", "--n", "100", "--corruption-rate", "0"}).code, 0);
  std::ifstream in(path("dataset.jsonl"));
  const auto rs = read_dataset(in, "dataset.jsonl");
  ASSERT_EQ(rs.size(), 100u);
  for (const auto& r : rs) EXPECT_FALSE(*r.corrupted);
  const auto summary = nlohmann::json::parse(slurp(path("dataset_summary.json")));
  EXPECT_EQ(summary["corrupted"], 0);
  EXPECT_EQ(summary["config_hash"].get<std::string>().size(), 16u);
  EXPECT_TRUE(fs::exists(dir_ / "resolved_config.txt"));
}

TEST_F(CliTest, GenDataIsByteIdenticalForFixedSeed) {
  const auto a = sub("a"), b = sub("b"), c = sub("c");
  ASSERT_EQ(run({"--seed", "5", "--out", a, "gen-data", "--n", "50"}).code, 0);
  ASSERT_EQ(run({"--seed", "5", "--out", b, "gen-data", "--n", "50"}).code, 0);
  ASSERT_EQ(run({"--seed", "6", "--out", c, "gen-data", "--n", "50"}).code, 0);
  EXPECT_EQ(slurp(a + "/dataset.jsonl"), slurp(b + "/dataset.jsonl"));
  EXPECT_NE(slurp(a + "/dataset.jsonl"), slurp(c + "/dataset.jsonl"));
}

TEST_F(CliTest, FilterExtremesAndEmptyResult) {
  ASSERT_EQ(run({"--out", dir_.string(), "gen-data", "--n", "80"}).code, 0);
  const auto data = path("dataset.jsonl");
  const auto keep = sub("keep"), drop = sub("drop");
  ASSERT_EQ(run({"--out", keep, "filter", "--input", data, "--tau", "-1"}).code, 0);
  std::ifstream kin(keep + "/filtered.jsonl");
  EXPECT_EQ(read_dataset(kin, "k").size(), 80u);

  const auto empty = run({"--out", drop, "filter", "--input", data, "--tau", "1"});
  EXPECT_EQ(empty.code, 0);
  EXPECT_NE(empty.err.find("warning"), std::string::npos);
  EXPECT_EQ(slurp(drop + "/filtered.jsonl"), "");
  const auto report = nlohmann::json::parse(slurp(drop + "/filter_report.json"));
  EXPECT_EQ(report["kept"], 0);
  EXPECT_EQ(report["dropped"], 80);
  EXPECT_TRUE(report.contains("config_hash"));
  EXPECT_EQ(run({"--out", drop, "filter", "--input", data, "--tau", "1", "--fail-on-empty"}).code, 1);
  EXPECT_EQ(run({"--out", drop, "filter", "--input", data, "--tau", "2"}).code, 2);
  EXPECT_EQ(run({"--out", drop, "filter", "--input", path("nope.jsonl")}).code, 1);
}

TEST_F(CliTest, TrainZeroStepsWritesOnlyInitialCheckpoint) {
  ASSERT_EQ(run(small({"--out", dir_.string(), "train", "--phase1-steps", "0", "--phase2-steps", "0"})).code, 0);
  EXPECT_TRUE(fs::exists(dir_ / "checkpoint_initial.ckpt"));
  EXPECT_FALSE(fs::exists(dir_ / "checkpoint_phase1.ckpt"));
  EXPECT_FALSE(fs::exists(dir_ / "checkpoint_phase2.ckpt"));
  EXPECT_TRUE(fs::exists(dir_ / "train_log.csv"));
  const std::string cfg = slurp(path("resolved_config.txt"));
  EXPECT_NE(cfg.find("train.phase1_steps = 0"), std::string::npos) << cfg;
}

TEST_F(CliTest, TrainSampleEvalEndToEnd) {
  ASSERT_EQ(run(small({"--out", dir_.string(), "train", "--phase1-steps", "30", "--phase2-steps", "20"})).code, 0);
  const auto ckpt = path("checkpoint_phase2.ckpt");
  ASSERT_TRUE(fs::exists(ckpt));
  std::ifstream cin(ckpt);
  const auto c = read_checkpoint(cin, ckpt);
  EXPECT_EQ(c.stage, "phase2");
  EXPECT_NE(slurp(path("train_log.csv")).find("config_hash=" + c.config_hash), std::string::npos);

  ASSERT_EQ(run(small({"--out", dir_.string(), "sample", "--checkpoint", ckpt, "--prompt", "sari", "--n", "12",
                       "--pgm"}))
                .code,
            0);
  std::ifstream sin(path("samples.csv"));
  const auto t = read_samples(sin, "samples.csv");
  EXPECT_EQ(t.latents.size(), 12u);
  EXPECT_EQ(t.images.size(), 12u);
  EXPECT_EQ(t.meta.at("prompt"), "sari");
  EXPECT_EQ(t.meta.at("config_hash").size(), 16u);
  EXPECT_TRUE(t.meta.at("refined").find("silk") != std::string::npos);
  EXPECT_TRUE(fs::exists(dir_ / "samples.pgm"));

  const auto e = run(small({"--out", dir_.string(), "eval", "--samples", path("samples.csv"), "--reference",
                            path("samples.csv"), "--k", "3"}));
  ASSERT_EQ(e.code, 0) << e.err;
  const auto report = nlohmann::json::parse(slurp(path("eval_report.json")));
  EXPECT_NEAR(report["files"][0]["fd_latent"].get<double>(), 0.0, 1e-8);
  EXPECT_TRUE(report.contains("alignment"));
  EXPECT_EQ(report["config_hash"].get<std::string>().size(), 16u);

  EXPECT_EQ(run({"--out", dir_.string(), "sample", "--checkpoint", ckpt}).code, 2);
  EXPECT_EQ(run(small({"--out", dir_.string(), "sample", "--checkpoint", path("missing.ckpt")})).code, 1);
  EXPECT_EQ(run(small({"--out", dir_.string(), "sample"})).code, 2);
}

TEST_F(CliTest, SampleZeroWritesHeaderOnly) {
  ASSERT_EQ(run({"--out", dir_.string(), "sample", "--oracle", "--n", "0"}).code, 0);
  const std::string text = slurp(path("samples.csv"));
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
  EXPECT_NE(text.find("z0,z1"), std::string::npos);
}

TEST_F(CliTest, EvalShiftedCopyGivesSquaredShift) {
  ASSERT_EQ(run({"--out", dir_.string(), "sample", "--oracle", "--n", "200"}).code, 0);
  std::ifstream in(path("samples.csv"));
  auto t = read_samples(in, "samples.csv");
  for (auto& z : t.latents) z[0] += 0.5;
  std::ostringstream shifted;
  write_samples(shifted, t.meta, t.latent_dim, 0, t.latents, {});
  write_file(path("shifted.csv"), shifted.str());
  const auto r = run({"--out", dir_.string(), "eval", "--samples", path("shifted.csv"), "--samples", path("samples.csv"),
                      "--reference", path("samples.csv"), "--k", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = nlohmann::json::parse(slurp(path("eval_report.json")));
  EXPECT_NEAR(report["files"][0]["fd_latent"].get<double>(), 0.25, 1e-8);
  EXPECT_NEAR(report["files"][1]["fd_latent"].get<double>(), 0.0, 1e-8);
  EXPECT_GE(report["files"][1]["diversity_proxy"].get<double>(), 1.5);
}
