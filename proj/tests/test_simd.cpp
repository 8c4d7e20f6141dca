#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "weakdiff/simd.hpp"

using namespace weakdiff;

namespace {

std::vector<const simd::KernelTable*> vector_tables() {
  std::vector<const simd::KernelTable*> out;
  for (simd::Isa isa : {simd::Isa::avx2, simd::Isa::neon}) {
    if (const auto* t = simd::kernels_for(isa)) out.push_back(t);
  }
  return out;
}

void expect_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol * (1.0 + std::abs(a[i]))) << "index " << i;
}

}  // namespace

TEST(Simd, ScalarTableAlwaysAvailable) {
  ASSERT_NE(simd::kernels_for(simd::Isa::scalar), nullptr);
  EXPECT_EQ(simd::kernels_for(simd::Isa::scalar)->isa, simd::Isa::scalar);
  EXPECT_EQ(simd::kernels().isa, simd::active_isa());
  EXPECT_FALSE(simd::isa_name(simd::active_isa()).empty());
}

TEST(Simd, VectorKernelsMatchScalarOnRandomShapes) {
  const auto* ref = simd::kernels_for(simd::Isa::scalar);
  const auto tables = vector_tables();
  if (tables.empty()) GTEST_SKIP() << "no vector ISA on this machine";
  oracle::Gen g(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t rows = g.size(1, 23), cols = g.size(1, 37);
    const auto x = g.normals(cols), y = g.normals(cols), yr = g.normals(rows), m = g.normals(rows * cols);
    const double alpha = g.normal(), beta = g.normal();
    for (const auto* t : tables) {
      EXPECT_NEAR(t->dot(x.data(), y.data(), cols), ref->dot(x.data(), y.data(), cols), 1e-12 * cols);

      auto a1 = y, a2 = y;
      ref->axpy(alpha, x.data(), a1.data(), cols);
      t->axpy(alpha, x.data(), a2.data(), cols);
      expect_close(a1, a2, 1e-14);

      std::vector<double> b1(cols), b2(cols);
      ref->axpby(alpha, x.data(), beta, y.data(), b1.data(), cols);
      t->axpby(alpha, x.data(), beta, y.data(), b2.data(), cols);
      expect_close(b1, b2, 1e-14);

      auto g1 = yr, g2 = yr;
      ref->gemv(m.data(), rows, cols, x.data(), g1.data());
      t->gemv(m.data(), rows, cols, x.data(), g2.data());
      expect_close(g1, g2, 1e-12);

      auto h1 = x, h2 = x;
      ref->gemv_t(m.data(), rows, cols, yr.data(), h1.data());
      t->gemv_t(m.data(), rows, cols, yr.data(), h2.data());
      expect_close(h1, h2, 1e-12);

      auto r1 = m, r2 = m;
      ref->ger(alpha, yr.data(), rows, x.data(), cols, r1.data());
      t->ger(alpha, yr.data(), rows, x.data(), cols, r2.data());
      expect_close(r1, r2, 1e-14);
    }
  }
}

TEST(Simd, AxpbyMayAliasOutput) {
  for (const auto* t : {simd::kernels_for(simd::Isa::scalar), &simd::kernels()}) {
    std::vector<double> x{1, 2, 3, 4, 5}, y{5, 4, 3, 2, 1};
    t->axpby(2.0, x.data(), -1.0, y.data(), x.data(), x.size());
    EXPECT_EQ(x, (std::vector<double>{-3, 0, 3, 6, 9}));
  }
}

TEST(Simd, BidScanMatchesScalarAndBruteForce) {
  const auto* ref = simd::kernels_for(simd::Isa::scalar);
  auto tables = vector_tables();
  tables.push_back(ref);
  oracle::Gen g(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t dim = g.size(1, 4), n = g.size(2, 41);
    std::vector<std::vector<double>> coords(dim, g.normals(n));
    for (auto& c : coords) c = g.normals(n);
    std::vector<const double*> ptrs;
    for (const auto& c : coords) ptrs.push_back(c.data());
    const auto prices = g.normals(n, 0.1), point = g.normals(dim);

    std::vector<double> values(n);
    for (std::size_t j = 0; j < n; ++j) {
      double d2 = 0.0;
      for (std::size_t k = 0; k < dim; ++k) d2 += (point[k] - coords[k][j]) * (point[k] - coords[k][j]);
      values[j] = -d2 - prices[j];
    }
    auto sorted = values;
    std::sort(sorted.rbegin(), sorted.rend());
    for (const auto* t : tables) {
      const simd::BidScan scan = t->bid_scan(point.data(), ptrs.data(), dim, prices.data(), n);
      EXPECT_NEAR(values[scan.best_index], sorted[0], 1e-12);
      EXPECT_NEAR(scan.best_value, sorted[0], 1e-12);
      EXPECT_NEAR(scan.second_value, sorted[1], 1e-12);
    }
  }
}

TEST(Simd, EmptyInputs) {
  for (const auto* t : {simd::kernels_for(simd::Isa::scalar), &simd::kernels()}) {
    EXPECT_EQ(t->dot(nullptr, nullptr, 0), 0.0);
  }
}
