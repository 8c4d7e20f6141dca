#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "weakdiff/embedding.hpp"
#include "weakdiff/weaksup.hpp"

using namespace weakdiff;

namespace {

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

EncoderSuite default_suite(std::uint64_t seed = 7) { return EncoderSuite::make(default_vocabulary(), 32, 64, seed); }

}  // namespace

TEST(Vocabulary, ParseAndLookup) {
  std::istringstream in("# comment\nsari\n\n  silk \nred\n");
  const auto v = Vocabulary::parse(in);
  ASSERT_EQ(v.size(), 3u);
  EXPECT_EQ(v.token(1), "silk");
  EXPECT_EQ(v.index_of("red"), 2u);
  EXPECT_FALSE(v.contains("wool"));
  const TokenList cap{"red", "wool", "red", "sari"};
  EXPECT_EQ(v.distinct_indices(cap), (std::vector<std::size_t>{2, 0}));
  EXPECT_THROW(Vocabulary::from_tokens({"a", "a"}), std::invalid_argument);
  EXPECT_THROW(Vocabulary::from_tokens({"a", ""}), std::invalid_argument);
}

TEST(Embedding, SingleTokenIsItsColumn) {
  const auto suite = default_suite();
  const TokenList cap{"sari"};
  const auto e = embed_text(suite.space, suite.vocab, cap);
  const auto col = suite.space.column(*suite.vocab.index_of("sari"));
  EXPECT_EQ(e, std::vector<double>(col.begin(), col.end()));
}

TEST(Embedding, DuplicatesCollapseAndUnknownTokensIgnored) {
  const auto vocab = Vocabulary::from_tokens({"red", "sari", "silk", "wool"});
  const auto space = EmbeddingSpace::generate(16, 4, 3);
  const TokenList a{"red", "red", "sari"}, b{"red", "sari"}, c{"red", "zebra", "sari"};
  EXPECT_EQ(embed_text(space, vocab, a), embed_text(space, vocab, b));
  EXPECT_EQ(embed_text(space, vocab, c), embed_text(space, vocab, b));
  const TokenList none{"zebra"};
  EXPECT_THROW(embed_text(space, vocab, none), std::invalid_argument);
}

TEST(Embedding, TwoTokenNormalizedSum) {
  const auto suite = default_suite();
  const TokenList cap{"kimono", "sakura"};
  const auto e = embed_text(suite.space, suite.vocab, cap);
  const auto pa = suite.space.column(*suite.vocab.index_of("kimono"));
  const auto pb = suite.space.column(*suite.vocab.index_of("sakura"));
  std::vector<double> sum(pa.size());
  for (std::size_t i = 0; i < sum.size(); ++i) sum[i] = pa[i] + pb[i];
  const double n = norm(sum);
  for (std::size_t i = 0; i < sum.size(); ++i) EXPECT_NEAR(e[i], sum[i] / n, 1e-15);
}

TEST(Embedding, CosineClosedForms) {
  const std::vector<double> v{0.3, -1.2, 4.0}, a{1.0, 0.0}, b{1.0, 1.0}, c{0.0, 2.0};
  EXPECT_NEAR(cosine(v, v), 1.0, 1e-15);
  EXPECT_EQ(cosine(a, c), 0.0);
  EXPECT_NEAR(cosine(a, b), 0.70710678118654752440, 1e-15);
  EXPECT_EQ(cosine(a, b), cosine(b, a));
  EXPECT_THROW(cosine(a, std::vector<double>{0.0, 0.0}), std::invalid_argument);
}

TEST(Embedding, AttributeMapHasOrthonormalRows) {
  const auto suite = default_suite();
  const Matrix& a = suite.attributes.matrix();
  ASSERT_EQ(a.rows(), 32u);
  ASSERT_EQ(a.cols(), 64u);
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t s = 0; s < a.rows(); ++s) {
      double dot = 0.0;
      for (std::size_t j = 0; j < a.cols(); ++j) dot += a(r, j) * a(s, j);
      EXPECT_NEAR(dot, r == s ? 1.0 : 0.0, 1e-12);
    }
  oracle::Gen g(1);
  const auto w = g.normals(32);
  const auto act = suite.attributes.activations(suite.attributes.render(w));
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(act[i], w[i], 1e-12);
  EXPECT_THROW(AttributeMap::generate(8, 16, 1), std::invalid_argument);
}

TEST(Embedding, ImageEmbeddingProperties) {
  const auto suite = default_suite();
  const auto set = style_attributes(suite.vocab, 3);
  const auto x = suite.attributes.render(attribute_indicator(suite.vocab, set));
  EXPECT_GE(cosine(embed_image(suite.space, x, suite.attributes), embed_text(suite.space, suite.vocab, set)), 0.99);
  EXPECT_GE(alignment_score(suite, set, x), 0.99);
  std::vector<double> doubled(x.begin(), x.end());
  for (double& v : doubled) v *= 2.0;
  const auto e1 = embed_image(suite.space, x, suite.attributes);
  const auto e2 = embed_image(suite.space, ImageVector(doubled), suite.attributes);
  for (std::size_t i = 0; i < e1.size(); ++i) EXPECT_NEAR(e1[i], e2[i], 1e-15);
  EXPECT_NEAR(norm(e1), 1.0, 1e-9);
  EXPECT_THROW(embed_image(suite.space, ImageVector::zeros(64), suite.attributes), std::invalid_argument);
}

TEST(Embedding, DeterministicAcrossBuilds) {
  const auto a = default_suite(5), b = default_suite(5);
  const TokenList cap{"poncho", "alpaca"};
  EXPECT_EQ(embed_text(a.space, a.vocab, cap), embed_text(b.space, b.vocab, cap));
  EXPECT_EQ(a.attributes.matrix(), b.attributes.matrix());
  EXPECT_NE(embed_text(a.space, a.vocab, cap), embed_text(default_suite(6).space, a.vocab, cap));
}

TEST(EmbeddingProperty, OutputsAreUnitNorm) {
  oracle::Gen g(2);
  const auto suite = default_suite();
  for (int trial = 0; trial < 300; ++trial) {
    TokenList cap;
    const std::size_t n = g.size(1, 6);
    for (std::size_t i = 0; i < n; ++i) cap.push_back(suite.vocab.token(g.size(0, 31)));
    EXPECT_NEAR(norm(embed_text(suite.space, suite.vocab, cap)), 1.0, 1e-9);
    EXPECT_NEAR(norm(embed_image(suite.space, ImageVector(g.normals(64)), suite.attributes)), 1.0, 1e-9);
    const auto cond = condition_on(suite, cap);
    EXPECT_EQ(cond.size(), suite.vocab.distinct_indices(cap).size());
  }
  EXPECT_TRUE(condition_on(suite, TokenList{}).empty());
}

TEST(Embedding, DisjointSetsScoreLowAndMatchedBeatsMismatched) {
  double mismatched_sum = 0.0;
  int wins = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto suite = default_suite(seed);
    for (std::size_t a = 0; a < 8; ++a) {
      const auto cap = style_attributes(suite.vocab, a);
      const auto own = suite.attributes.render(attribute_indicator(suite.vocab, cap));
      const auto other_set = style_attributes(suite.vocab, (a + 1 + seed % 7) % 8);
      const auto other = suite.attributes.render(attribute_indicator(suite.vocab, other_set));
      const double m = alignment_score(suite, cap, other);
      mismatched_sum += m;
      wins += alignment_score(suite, cap, own) > m ? 1 : 0;
      ++total;
    }
  }
  EXPECT_LE(mismatched_sum / total, 0.3);
  EXPECT_GE(static_cast<double>(wins) / total, 0.99);
}
