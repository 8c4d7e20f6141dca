#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "oracles.hpp"
#include "weakdiff/weaksup.hpp"

using namespace weakdiff;

namespace {

const EncoderSuite& suite() {
  static const EncoderSuite s = EncoderSuite::make(default_vocabulary(), 32, 64, 7);
  return s;
}

std::vector<DataRecord> make(std::size_t n, double rate, double noise, std::uint64_t seed) {
  return generate_dataset(suite(), GeneratorConfig{n, rate, noise, seed});
}

std::set<std::string> ids(const std::vector<DataRecord>& rs) {
  std::set<std::string> out;
  for (const auto& r : rs) out.insert(r.id);
  return out;
}

}  // namespace

TEST(Styles, DefaultVocabularyLayout) {
  const auto v = default_vocabulary();
  EXPECT_EQ(v.size(), 32u);
  EXPECT_EQ(style_count(v), 8u);
  EXPECT_EQ(style_attributes(v, 1), (TokenList{"kimono", "crepe", "sakura", "japanese"}));
  const TokenList shuffled{"japanese", "kimono", "sakura", "crepe"};
  EXPECT_EQ(style_of(v, shuffled), 1u);
  EXPECT_FALSE(style_of(v, TokenList{"kimono", "silk"}).has_value());
  EXPECT_THROW(style_attributes(v, 8), std::out_of_range);
  const auto ind = attribute_indicator(v, TokenList{"kilt", "kilt", "wool", "zebra"});
  EXPECT_EQ(std::count(ind.begin(), ind.end(), 1.0), 2);
}

TEST(Generator, CorruptionExtremes) {
  for (const auto& r : make(100, 0.0, 0.0, 1)) {
    EXPECT_EQ(r.corrupted, false);
    EXPECT_EQ(r.caption, r.true_attributes);
  }
  for (const auto& r : make(100, 1.0, 0.0, 1)) {
    EXPECT_EQ(r.corrupted, true);
    std::set<std::string> a(r.caption.begin(), r.caption.end());
    for (const auto& t : r.true_attributes) EXPECT_EQ(a.count(t), 0u) << "caption overlaps the true set";
    EXPECT_TRUE(style_of(suite().vocab, r.caption).has_value());
  }
}

TEST(Generator, CorruptionFractionConcentrates) {
  const std::size_t n = 10000;
  const auto rs = make(n, 0.3, 0.1, 2);
  const double frac =
      static_cast<double>(std::count_if(rs.begin(), rs.end(), [](const auto& r) { return *r.corrupted; })) / n;
  EXPECT_NEAR(frac, 0.3, 3.0 * std::sqrt(0.3 * 0.7 / n));
}

TEST(Generator, DeterministicAndValidated) {
  EXPECT_EQ(make(50, 0.3, 0.2, 9), make(50, 0.3, 0.2, 9));
  EXPECT_NE(make(50, 0.3, 0.2, 9), make(50, 0.3, 0.2, 10));
  EXPECT_EQ(make(3, 0.0, 0.0, 1).front().id, "rec-000000");
  EXPECT_THROW(make(10, 1.5, 0.0, 1), std::invalid_argument);
  EXPECT_THROW(make(10, -0.1, 0.0, 1), std::invalid_argument);
  EXPECT_THROW(make(0, 0.1, 0.0, 1), std::invalid_argument);
  EXPECT_THROW(make(10, 0.1, -1.0, 1), std::invalid_argument);
}

TEST(Scoring, CleanHighCorruptedBelowCleanFirstPercentile) {
  const auto rs = make(2000, 0.3, 0.0, 3);
  const auto scores = score_records(suite(), rs);
  std::vector<double> clean, corrupt;
  for (std::size_t i = 0; i < rs.size(); ++i) (*rs[i].corrupted ? corrupt : clean).push_back(scores[i]);
  for (double s : clean) EXPECT_GE(s, 0.99);
  const double p1 = choose_tau(clean, {TauPolicyKind::percentile, 1.0});
  for (double s : corrupt) EXPECT_LT(s, p1);
  // Order independence.
  std::vector<DataRecord> rev(rs.rbegin(), rs.rend());
  const auto rscores = score_records(suite(), rev);
  for (std::size_t i = 0; i < rs.size(); ++i) EXPECT_EQ(rscores[rs.size() - 1 - i], scores[i]);
  EXPECT_EQ(score_record(suite(), rs[5]), scores[5]);
}

TEST(TauPolicy, FixedAndPercentile) {
  const std::vector<double> s{0.1, 0.9};
  EXPECT_EQ(choose_tau(s, {TauPolicyKind::fixed, 0.8}), 0.8);
  EXPECT_NEAR(choose_tau(s, {TauPolicyKind::percentile, 50.0}), 0.5, 1e-15);
  EXPECT_EQ(choose_tau(s, {TauPolicyKind::percentile, 0.0}), 0.1);
  EXPECT_EQ(choose_tau(s, {TauPolicyKind::percentile, 100.0}), 0.9);
  EXPECT_THROW(choose_tau({}, {TauPolicyKind::percentile, 50.0}), std::invalid_argument);
  EXPECT_THROW(choose_tau(s, {TauPolicyKind::percentile, 101.0}), std::invalid_argument);
  EXPECT_EQ(parse_tau_policy("valley"), TauPolicyKind::valley);
  EXPECT_EQ(tau_policy_name(TauPolicyKind::percentile), "percentile");
  EXPECT_THROW(parse_tau_policy("otsu"), std::invalid_argument);
}

TEST(TauPolicy, ValleyRejectsUnimodal) {
  const std::vector<double> s(50, 0.5);
  EXPECT_THROW(choose_tau(s, {TauPolicyKind::valley, 0.0, 40}), std::invalid_argument);
  EXPECT_THROW(choose_tau({}, {TauPolicyKind::valley, 0.0, 40}), std::invalid_argument);
}

TEST(TauPolicy, ValleySplitsTwoClusters) {
  std::vector<double> s;
  for (int i = 0; i < 30; ++i) s.push_back(-0.42 + 0.001 * i);
  for (int i = 0; i < 70; ++i) s.push_back(0.93 + 0.0005 * i);
  const double tau = choose_tau(s, {TauPolicyKind::valley, 0.0, 40});
  EXPECT_GT(tau, -0.38);
  EXPECT_LT(tau, 0.9);
}

TEST(Filter, ExtremeThresholds) {
  const auto rs = make(200, 0.3, 0.1, 4);
  EXPECT_EQ(filter_dataset(suite(), rs, -1.0).kept.size(), rs.size());
  const auto none = filter_dataset(suite(), rs, 1.0);
  EXPECT_TRUE(none.kept.empty());
  EXPECT_EQ(none.report.dropped, rs.size());
  EXPECT_THROW(filter_dataset(suite(), rs, 1.5), std::invalid_argument);
}

TEST(Filter, StrictInequalityDropsTies) {
  const auto rs = make(3, 0.0, 0.0, 5);
  const std::vector<double> scores{0.5, 0.7, 0.5};
  const auto r = filter_by_scores(rs, scores, 0.5);
  ASSERT_EQ(r.kept.size(), 1u);
  EXPECT_EQ(r.kept[0].id, rs[1].id);
}

TEST(Filter, ValleyPolicyMeetsConfusionTargets) {
  const auto rs = make(10000, 0.3, 0.0, 6);
  const auto r = filter_dataset(suite(), rs, TauPolicy{TauPolicyKind::valley, 0.0, 40});
  ASSERT_TRUE(r.report.confusion.has_value());
  EXPECT_GE(r.report.confusion->clean_recall(), 0.99);
  EXPECT_LE(r.report.confusion->false_keep_rate(), 0.05);
  EXPECT_EQ(r.report.score_histogram.size(), kReportHistogramBins);
}

TEST(Filter, ConfusionAbsentWithoutTruth) {
  auto rs = make(20, 0.3, 0.0, 7);
  rs[3].corrupted.reset();
  EXPECT_FALSE(filter_dataset(suite(), rs, 0.5).report.confusion.has_value());
  const ConfusionMatrix empty;
  EXPECT_EQ(empty.clean_recall(), 1.0);
  EXPECT_EQ(empty.false_keep_rate(), 0.0);
}

TEST(FilterProperty, MonotoneIdempotentConsistentExhaustive) {
  const auto rs = make(1000, 0.3, 0.3, 8);
  const auto scores = score_records(suite(), rs);
  std::vector<double> taus{-1.0, 1.0};
  for (double s : scores) taus.push_back(std::clamp(s, -1.0, 1.0));
  std::sort(taus.begin(), taus.end());
  taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
  std::set<std::string> prev_ids;
  std::size_t prev = rs.size() + 1;
  for (std::size_t i = 0; i < taus.size(); ++i) {
    const auto r = filter_by_scores(rs, scores, taus[i]);
    EXPECT_EQ(r.report.kept + r.report.dropped, r.report.total);
    EXPECT_EQ(r.report.kept, r.kept.size());
    EXPECT_LE(r.kept.size(), prev);
    const auto now = ids(r.kept);
    if (i > 0) EXPECT_TRUE(std::includes(prev_ids.begin(), prev_ids.end(), now.begin(), now.end()));
    // Filtering the kept set again keeps it whole.
    const auto again = filter_dataset(suite(), r.kept, taus[i]);
    EXPECT_EQ(again.kept, r.kept);
    prev = r.kept.size();
    prev_ids = now;
  }
}
