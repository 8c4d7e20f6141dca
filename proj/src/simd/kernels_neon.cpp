// NEON kernels for aarch64, where Advanced SIMD is architectural.

#include <arm_neon.h>

#include "tables.hpp"

namespace weakdiff::simd::detail {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double s = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void axpby(double a, const double* x, double b, const double* y, double* out, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  const float64x2_t vb = vdupq_n_f64(b);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t by = vmulq_f64(vb, vld1q_f64(y + i));
    vst1q_f64(out + i, vfmaq_f64(by, va, vld1q_f64(x + i)));
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

BidScan bid_scan(const double* point, const double* const* coords, std::size_t dim, const double* prices,
                 std::size_t n) {
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
  std::size_t j = 0;
  alignas(16) double lanes[2];
  for (; j + 2 <= n; j += 2) {
    float64x2_t c = vdupq_n_f64(0.0);
    for (std::size_t k = 0; k < dim; ++k) {
      const float64x2_t diff = vsubq_f64(vdupq_n_f64(point[k]), vld1q_f64(coords[k] + j));
      c = vfmaq_f64(c, diff, diff);
    }
    vst1q_f64(lanes, vnegq_f64(vaddq_f64(c, vld1q_f64(prices + j))));
    offer(lanes[0], j);
    offer(lanes[1], j + 1);
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

const KernelTable& neon_table() {
  static const KernelTable table{Isa::neon, dot, axpy, axpby, gemv, gemv_t, ger, bid_scan};
  return table;
}

}  // namespace weakdiff::simd::detail
