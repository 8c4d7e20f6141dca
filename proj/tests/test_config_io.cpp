#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "oracles.hpp"
#include "weakdiff/config.hpp"
#include "weakdiff/io.hpp"

using namespace weakdiff;

namespace {

const EncoderSuite& suite() {
  static const EncoderSuite s = EncoderSuite::make(default_vocabulary(), 32, 64, 7);
  return s;
}

std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("weakdiff_io_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST(Config, SetMergeAndValidate) {
  auto c = RunConfig::defaults();
  c.set("train.lr", "0.01");
  c.set("filter.policy", "percentile");
  EXPECT_EQ(c.train.lr, 0.01);
  EXPECT_EQ(c.train.tau_policy, TauPolicyKind::percentile);
  EXPECT_THROW(c.set("train.learning_rate", "0.1"), ConfigError);
  EXPECT_THROW(c.set("train.lr", "fast"), ConfigError);
  EXPECT_THROW(c.set("data.n", "-3"), ConfigError);
  std::istringstream bad("data.n = 10\nno equals sign\n");
  try {
    c.merge(bad, "bad.conf");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.conf:2"), std::string::npos) << e.what();
  }
  auto v = RunConfig::defaults();
  v.corruption_rate = 1.5;
  EXPECT_THROW(v.validate(), ConfigError);
  EXPECT_NO_THROW(RunConfig::defaults().validate());
}

TEST(Config, HashIgnoresLayoutAndOrder) {
  std::istringstream a("# one\nseed = 3\ndata.n=40\n\ntrain.lr = 0.5\n");
  std::istringstream b("train.lr=0.5\n  data.n = 40   \nseed=3\n");
  auto ca = RunConfig::defaults(), cb = RunConfig::defaults();
  ca.merge(a, "a");
  cb.merge(b, "b");
  EXPECT_EQ(ca.hash(), cb.hash());
  EXPECT_EQ(ca.to_text(), cb.to_text());
  EXPECT_EQ(ca.hash().size(), 16u);
  cb.set("seed", "4");
  EXPECT_NE(ca.hash(), cb.hash());
}

TEST(Config, ResolvedTextRoundTrips) {
  auto c = RunConfig::defaults();
  c.set("oracle.mean_a", "-2, 0.25");
  c.set("train.gradient_mode", "differentiable");
  c.set("train.lr", "0.1");
  std::istringstream in(c.to_text());
  auto back = RunConfig::defaults();
  back.merge(in, "resolved");
  EXPECT_EQ(back.hash(), c.hash());
  EXPECT_EQ(back.oracle_mean_a, (std::vector<double>{-2.0, 0.25}));
  EXPECT_EQ(back.train.lr, 0.1);
}

TEST(Config, ShippedConfigsParse) {
  for (const char* name : {"smoke.conf", "ablation.conf"}) {
    auto c = RunConfig::defaults();
    EXPECT_NO_THROW(c.merge_file(std::filesystem::path(WEAKDIFF_SOURCE_DIR) / "configs" / name)) << name;
    EXPECT_NO_THROW(c.validate()) << name;
  }
  EXPECT_THROW(RunConfig::defaults().merge_file("/nonexistent/weakdiff.conf"), ConfigError);
}

TEST(DatasetIo, RoundTripIsExact) {
  auto rs = generate_dataset(suite(), {30, 0.3, 0.2, 1});
  rs[4].corrupted.reset();
  rs[4].true_attributes.clear();
  std::stringstream s;
  write_dataset(s, rs);
  EXPECT_EQ(read_dataset(s, "mem"), rs);
}

TEST(DatasetIo, ErrorsNameTheLine) {
  std::stringstream s;
  write_dataset(s, generate_dataset(suite(), {2, 0.0, 0.0, 1}));
  std::istringstream bad(s.str() + "{\"id\": 3}\n");
  try {
    read_dataset(bad, "data.jsonl");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("data.jsonl:3"), std::string::npos) << e.what();
  }
  std::istringstream garbage("not json\n");
  EXPECT_THROW(read_dataset(garbage, "g"), FormatError);
}

TEST(SamplesIo, RoundTripAndEmptyTable) {
  oracle::Gen g(2);
  std::vector<LatentVector> zs;
  std::vector<ImageVector> xs;
  for (int i = 0; i < 5; ++i) {
    zs.push_back(g.latent(3));
    xs.push_back(ImageVector(g.normals(4)));
  }
  const Metadata meta{{"config_hash", "0123456789abcdef"}, {"seed", "9"}};
  std::stringstream s;
  write_samples(s, meta, 3, 4, zs, xs);
  const auto t = read_samples(s, "mem");
  EXPECT_EQ(t.meta, meta);
  EXPECT_EQ(t.latents, zs);
  EXPECT_EQ(t.images, xs);

  std::stringstream e;
  write_samples(e, meta, 3, 0, {}, {});
  const std::string text = e.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
  const auto empty = read_samples(e, "empty");
  EXPECT_TRUE(empty.latents.empty());
  EXPECT_EQ(empty.latent_dim, 3u);
}

TEST(CheckpointIo, RoundTripIsExact) {
  oracle::Gen g(3);
  std::vector<ImageVector> xs;
  for (int i = 0; i < 20; ++i) xs.push_back(ImageVector(g.normals(6)));
  Checkpoint c{.codec = LinearCodec::fit(xs, 2)};
  c.config_hash = "00000000deadbeef";
  c.stage = "phase1";
  c.shape = MlpShape{2, 8, 5, 10};
  c.beta_start = 1e-4;
  c.beta_end = 0.02;
  c.parameters = g.normals(c.shape.parameter_count());
  std::stringstream s;
  write_checkpoint(s, c);
  const auto back = read_checkpoint(s, "mem");
  EXPECT_EQ(back.config_hash, c.config_hash);
  EXPECT_EQ(back.stage, c.stage);
  EXPECT_EQ(back.shape, c.shape);
  EXPECT_EQ(back.beta_start, c.beta_start);
  EXPECT_EQ(back.beta_end, c.beta_end);
  EXPECT_EQ(back.parameters, c.parameters);
  EXPECT_EQ(back.codec, c.codec);
  std::istringstream wrong("weakdiff-checkpoint 99\n");
  EXPECT_THROW(read_checkpoint(wrong, "old"), FormatError);
}

TEST(Files, AtomicWriteAndRead) {
  const auto dir = temp_dir("files");
  write_file(dir / "a.txt", "hello\n");
  write_file(dir / "a.txt", "again\n");
  EXPECT_EQ(read_file(dir / "a.txt"), "again\n");
  EXPECT_THROW(read_file(dir / "missing.txt"), std::runtime_error);
  EXPECT_EQ(metadata_line({{"b", "2"}, {"a", "1"}}), "# a=1 b=2");
  std::filesystem::remove_all(dir);
}

TEST(Pgm, HeaderAndScaling) {
  const std::vector<ImageVector> imgs{ImageVector{0.0, 1.0, 2.0, 3.0}, ImageVector{3.0, 3.0, 3.0, 3.0},
                                      ImageVector{0.0, 0.0, 0.0, 0.0}};
  const auto pgm = pgm_grid(imgs, 2);
  const std::string header = "P5\n4 4\n255\n";
  ASSERT_EQ(pgm.substr(0, header.size()), header);
  ASSERT_EQ(pgm.size(), header.size() + 16);
  EXPECT_EQ(static_cast<unsigned char>(pgm[header.size()]), 0);
  EXPECT_EQ(static_cast<unsigned char>(pgm[header.size() + 2]), 255);
  EXPECT_EQ(static_cast<unsigned char>(pgm[header.size() + 1]), 85);
  EXPECT_THROW(pgm_grid(std::vector<ImageVector>{ImageVector{1.0, 2.0, 3.0}}, 1), std::invalid_argument);
}
