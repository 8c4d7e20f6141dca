// AVX2 + FMA kernels. This translation unit is compiled with -mavx2 -mfma and
// is only entered after the dispatcher has confirmed CPU support.

#include <immintrin.h>

#include "tables.hpp"

namespace weakdiff::simd::detail {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void axpby(double a, const double* x, double b, const double* y, double* out, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  const __m256d vb = _mm256_set1_pd(b);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d bx = _mm256_mul_pd(vb, _mm256_loadu_pd(y + i));
    _mm256_storeu_pd(out + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), bx));
  }
  for (; i < n; ++i) out[i] = a * x[i] + b * y[i];
}

void gemv(const double* m, std::size_t rows, std::size_t cols, const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] += dot(m + r * cols, x, cols);
}

void gemv_t(const double* m, std::size_t rows, std::size_t cols, const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) axpy(x[r], m + r * cols, y, cols);
}

void ger(double alpha, const double* x, std::size_t rows, const double* y, std::size_t cols, double* m) {
  for (std::size_t r = 0; r < rows; ++r) axpy(alpha * x[r], y, m + r * cols, cols);
}

// Four targets per iteration; each lane keeps its own best/second pair and
// the lanes are merged at the end.
BidScan bid_scan(const double* point, const double* const* coords, std::size_t dim, const double* prices,
                 std::size_t n) {
  const __m256d neg_inf = _mm256_set1_pd(-std::numeric_limits<double>::infinity());
  __m256d best = neg_inf;
  __m256d second = neg_inf;
  __m256d best_idx = _mm256_setzero_pd();
  __m256d idx = _mm256_setr_pd(0.0, 1.0, 2.0, 3.0);
  const __m256d four = _mm256_set1_pd(4.0);

  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    __m256d c = _mm256_setzero_pd();
    for (std::size_t k = 0; k < dim; ++k) {
      const __m256d diff = _mm256_sub_pd(_mm256_set1_pd(point[k]), _mm256_loadu_pd(coords[k] + j));
      c = _mm256_fmadd_pd(diff, diff, c);
    }
    const __m256d v = _mm256_sub_pd(_mm256_setzero_pd(), _mm256_add_pd(c, _mm256_loadu_pd(prices + j)));
    const __m256d gt_best = _mm256_cmp_pd(v, best, _CMP_GT_OQ);
    // second = gt_best ? best : max(second, v)
    second = _mm256_blendv_pd(_mm256_max_pd(second, v), best, gt_best);
    best = _mm256_blendv_pd(best, v, gt_best);
    best_idx = _mm256_blendv_pd(best_idx, idx, gt_best);
    idx = _mm256_add_pd(idx, four);
  }

  alignas(32) double lb[4], ls[4], li[4];
  _mm256_store_pd(lb, best);
  _mm256_store_pd(ls, second);
  _mm256_store_pd(li, best_idx);

  BidScan out;
  auto offer = [&out](double v, std::size_t index) {
    if (v > out.best_value) {
      out.second_value = out.best_value;
      out.best_value = v;
      out.best_index = index;
    } else if (v > out.second_value) {
      out.second_value = v;
    }
  };
  for (int lane = 0; lane < 4; ++lane) {
    offer(lb[lane], static_cast<std::size_t>(li[lane]));
    if (ls[lane] > out.second_value) out.second_value = ls[lane];
  }
  for (; j < n; ++j) {
    double c = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      const double diff = point[k] - coords[k][j];
      c += diff * diff;
    }
    offer(-c - prices[j], j);
  }
  return out;
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable table{Isa::avx2, dot, axpy, axpby, gemv, gemv_t, ger, bid_scan};
  return table;
}

}  // namespace weakdiff::simd::detail
