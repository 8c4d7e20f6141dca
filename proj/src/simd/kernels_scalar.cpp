// Scalar reference kernels. The SIMD variants are tested against these.

#include "tables.hpp"

namespace weakdiff::simd::detail {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void axpby(double a, const double* x, double b, const double* y, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a * x[i] + b * y[i];
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
  for (std::size_t j = 0; j < n; ++j) {
    double c = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      const double diff = point[k] - coords[k][j];
      c += diff * diff;
    }
    const double v = -c - prices[j];
    if (v > out.best_value) {
      out.second_value = out.best_value;
      out.best_value = v;
      out.best_index = j;
    } else if (v > out.second_value) {
      out.second_value = v;
    }
  }
  return out;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{Isa::scalar, dot, axpy, axpby, gemv, gemv_t, ger, bid_scan};
  return table;
}

}  // namespace weakdiff::simd::detail
