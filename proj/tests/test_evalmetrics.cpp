#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "weakdiff/evalmetrics.hpp"
#include "weakdiff/wasserstein.hpp"
#include "weakdiff/weaksup.hpp"

using namespace weakdiff;

namespace {

Matrix scaled_identity(std::size_t d, double s) {
  Matrix m(d, d);
  for (std::size_t i = 0; i < d; ++i) m(i, i) = s;
  return m;
}

Matrix random_spd(oracle::Gen& g, std::size_t d) {
  Matrix a(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) a(i, j) = g.normal();
  Matrix s(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      for (std::size_t k = 0; k < d; ++k) s(i, j) += a(i, k) * a(j, k);
      if (i == j) s(i, j) += 0.1;
    }
  return s;
}

std::vector<LatentVector> clusters(std::size_t k, std::size_t per, double spacing, oracle::Gen& g) {
  std::vector<LatentVector> out;
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t i = 0; i < per; ++i) out.push_back(LatentVector{spacing * c + 0.01 * g.normal(), 0.01 * g.normal()});
  return out;
}

}  // namespace

TEST(Frechet, ClosedForms) {
  oracle::Gen g(1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = g.size(1, 8);
    const auto mu = g.normals(d, 3.0);
    double norm2 = 0.0;
    for (double v : mu) norm2 += v * v;
    const auto a = gaussian_from_moments(std::vector<double>(d, 0.0), scaled_identity(d, 1.0));
    const auto b = gaussian_from_moments(mu, scaled_identity(d, 1.0));
    EXPECT_NEAR(frechet_distance(a, b), norm2, 1e-8);
    const auto c = gaussian_from_moments(std::vector<double>(d, 0.0), scaled_identity(d, 4.0));
    EXPECT_NEAR(frechet_distance(a, c), static_cast<double>(d), 1e-8);
    EXPECT_NEAR(frechet_distance(a, a), 0.0, 1e-8);
  }
}

TEST(Frechet, MatchesTwoByTwoOracleAndIsSymmetric) {
  oracle::Gen g(2);
  for (int trial = 0; trial < 200; ++trial) {
    const Matrix sa = random_spd(g, 2), sb = random_spd(g, 2);
    const auto ma = g.normals(2), mb = g.normals(2);
    // tr sqrt(M) = sqrt(tr M + 2 sqrt(det M)) for a 2x2 M with nonnegative spectrum.
    Matrix p(2, 2);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) p(i, j) = sa(i, 0) * sb(0, j) + sa(i, 1) * sb(1, j);
    const double tr = p(0, 0) + p(1, 1), det = p(0, 0) * p(1, 1) - p(0, 1) * p(1, 0);
    const double expected = (ma[0] - mb[0]) * (ma[0] - mb[0]) + (ma[1] - mb[1]) * (ma[1] - mb[1]) + sa(0, 0) +
                            sa(1, 1) + sb(0, 0) + sb(1, 1) - 2.0 * std::sqrt(tr + 2.0 * std::sqrt(det));
    const auto a = gaussian_from_moments(ma, sa), b = gaussian_from_moments(mb, sb);
    const double ab = frechet_distance(a, b), ba = frechet_distance(b, a);
    EXPECT_NEAR(ab, expected, 1e-8 * (1.0 + expected));
    EXPECT_NEAR(ab, ba, 1e-8 * (1.0 + ab));
    EXPECT_GE(ab, -1e-12);
  }
}

TEST(Frechet, DimensionMismatchRejected) {
  const auto a = gaussian_from_moments({0.0}, scaled_identity(1, 1.0));
  const auto b = gaussian_from_moments({0.0, 0.0}, scaled_identity(2, 1.0));
  EXPECT_THROW(frechet_distance(a, b), std::invalid_argument);
}

TEST(GaussianFitTest, UnbiasedCovariancePlusRegularizer) {
  oracle::Gen g(3);
  std::vector<std::vector<double>> rows;
  std::vector<LatentVector> samples;
  for (int i = 0; i < 50; ++i) {
    rows.push_back(g.normals(3));
    samples.emplace_back(rows.back());
  }
  const auto fit = fit_gaussian(samples);
  const auto cov = oracle::covariance(rows);
  const double reg = 1e-6 * (cov[0][0] + cov[1][1] + cov[2][2]) / 3.0;
  EXPECT_NEAR(fit.reg, reg, 1e-18);
  EXPECT_EQ(fit.n, 50u);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      EXPECT_NEAR(fit.covariance(i, j), cov[i][j] + (i == j ? reg : 0.0), 1e-12);
      EXPECT_EQ(fit.covariance(i, j), fit.covariance(j, i));
    }
  auto ev = oracle::jacobi_eigenvalues({{fit.covariance(0, 0), fit.covariance(0, 1), fit.covariance(0, 2)},
                                        {fit.covariance(1, 0), fit.covariance(1, 1), fit.covariance(1, 2)},
                                        {fit.covariance(2, 0), fit.covariance(2, 1), fit.covariance(2, 2)}});
  EXPECT_GE(ev[0], reg - 1e-12);
  EXPECT_THROW(fit_gaussian(std::vector<LatentVector>{LatentVector{1.0}}), std::invalid_argument);
}

TEST(Frechet, IdenticalAndShiftedSampleSets) {
  oracle::Gen g(4);
  std::vector<LatentVector> a, shifted;
  for (int i = 0; i < 200; ++i) {
    a.push_back(g.latent(3));
    shifted.push_back(LatentVector{a.back()[0] + 0.5, a.back()[1], a.back()[2] - 1.0});
  }
  EXPECT_NEAR(frechet_distance(fit_gaussian(a), fit_gaussian(a)), 0.0, 1e-8);
  EXPECT_NEAR(frechet_distance(fit_gaussian(a), fit_gaussian(shifted)), 1.25, 1e-8);
}

TEST(Diversity, DegenerateCases) {
  const std::vector<LatentVector> same(20, LatentVector{1.0, 2.0});
  const auto r = diversity_proxy(same, 4);
  EXPECT_EQ(r.value, 1.0);
  EXPECT_TRUE(r.degenerate);
  oracle::Gen g(5);
  for (std::size_t k : {2u, 3u, 5u, 8u}) {
    const auto even = diversity_proxy(clusters(k, 25, 10.0, g), k, 3);
    EXPECT_NEAR(even.value, static_cast<double>(k), 1e-6);
    EXPECT_FALSE(even.degenerate);
  }
  EXPECT_THROW(diversity_proxy(same, 1), std::invalid_argument);
  EXPECT_THROW(diversity_proxy(std::vector<LatentVector>(3, LatentVector{0.0}), 4), std::invalid_argument);
}

TEST(Diversity, BalancedTwoModeMixture) {
  oracle::Gen g(6);
  std::vector<LatentVector> s;
  for (int i = 0; i < 1000; ++i) s.push_back(LatentVector{(i % 2 ? 1.5 : -1.5) + g.normal(), g.normal()});
  EXPECT_GE(diversity_proxy(s, 2, 11).value, 1.9);
}

TEST(DiversityProperty, PermutationAndTranslationInvariant) {
  oracle::Gen g(7);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t k = g.size(2, 6);
    std::vector<LatentVector> s;
    const std::size_t n = g.size(k, 120);
    for (std::size_t i = 0; i < n; ++i) s.push_back(g.latent(3, g.uniform(0.5, 3.0)));
    const auto base = diversity_proxy(s, k, 9);
    EXPECT_GE(base.value, 1.0);
    EXPECT_LE(base.value, static_cast<double>(k));
    auto perm = s;
    std::shuffle(perm.begin(), perm.end(), g.engine());
    EXPECT_EQ(diversity_proxy(perm, k, 9).value, base.value);
    auto moved = s;
    for (auto& z : moved)
      for (std::size_t i = 0; i < 3; ++i) z[i] += 0.5;  // exactly representable shift
    EXPECT_NEAR(diversity_proxy(moved, k, 9).value, base.value, 1e-9);
  }
}

TEST(Alignment, MatchedPairAndShuffledBaseline) {
  const auto suite = EncoderSuite::make(default_vocabulary(), 32, 64, 7);
  AlignmentInput pair{"pair", {}, {}};
  for (std::size_t k : {0u, 5u}) {
    const auto set = style_attributes(suite.vocab, k);
    pair.prompts.push_back(set);
    pair.images.push_back(suite.attributes.render(attribute_indicator(suite.vocab, set)));
  }
  const auto two = alignment_table(suite, std::span(&pair, 1));
  ASSERT_EQ(two.size(), 1u);
  EXPECT_GE(two[0].mean_matched, 0.99);
  EXPECT_LT(two[0].mean_shuffled, two[0].mean_matched);

  AlignmentInput many{"styles", {}, {}};
  const auto data = generate_dataset(suite, {400, 0.0, 0.2, 3});
  for (const auto& r : data) {
    many.prompts.push_back(r.caption);
    many.images.push_back(r.image);
  }
  const auto rows = alignment_table(suite, std::span(&many, 1), {1000, 0.99, 4});
  EXPECT_EQ(rows[0].n, 400u);
  EXPECT_GT(rows[0].mean_matched, rows[0].mean_shuffled);
  EXPECT_GT(rows[0].difference_lower, 0.0);
  EXPECT_LE(rows[0].difference_lower, rows[0].difference_upper);
  EXPECT_EQ(rows[0].method, "styles");
}

TEST(Bootstrap, IntervalBracketsMean) {
  oracle::Gen g(8);
  const auto v = g.normals(300);
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / 300.0;
  const auto iv = bootstrap_mean_interval(v, {2000, 0.99, 1});
  EXPECT_LT(iv.lower, mean);
  EXPECT_GT(iv.upper, mean);
  EXPECT_NEAR(iv.upper - iv.lower, 2.0 * 2.576 / std::sqrt(300.0), 0.05);
  const std::vector<double> constant(10, 0.25);
  const auto c = bootstrap_mean_interval(constant, {});
  EXPECT_EQ(c.lower, 0.25);
  EXPECT_EQ(c.upper, 0.25);
  EXPECT_THROW(bootstrap_mean_interval(std::vector<double>{}, {}), std::invalid_argument);
  EXPECT_THROW(bootstrap_mean_interval(v, {100, 1.0, 0}), std::invalid_argument);
}

TEST(Wasserstein, MatchesBruteForceOnSmallSets) {
  oracle::Gen g(9);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = g.size(1, 7), d = g.size(1, 3);
    std::vector<LatentVector> a, b;
    for (std::size_t i = 0; i < n; ++i) {
      a.push_back(g.latent(d));
      b.push_back(g.latent(d, 2.0));
    }
    const auto r = wasserstein2(a, b);
    const double exact = oracle::brute_force_w2(a, b);
    EXPECT_NEAR(r.upper, exact, 1e-6 * (1.0 + exact));
    EXPECT_LE(r.lower, r.upper);
    std::vector<std::size_t> seen = r.assignment;
    std::sort(seen.begin(), seen.end());
    for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(seen[i], i);
  }
}

TEST(Wasserstein, IdenticalAndTranslatedClouds) {
  oracle::Gen g(10);
  std::vector<LatentVector> a, b;
  for (int i = 0; i < 300; ++i) {
    a.push_back(g.latent(2));
    b.push_back(LatentVector{a.back()[0] + 0.3, a.back()[1] - 0.4});
  }
  EXPECT_NEAR(wasserstein2(a, a).upper, 0.0, 1e-9);
  EXPECT_NEAR(wasserstein2(a, b).upper, 0.5, 1e-6);
  EXPECT_THROW(wasserstein2(a, std::vector<LatentVector>(a.begin(), a.end() - 1)), std::invalid_argument);
}
