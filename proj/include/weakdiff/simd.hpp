#pragma once

// Data-parallel inner loops used by the denoiser, the diffusion steps and the
// auction solver. Every kernel has a scalar reference implementation; AVX2
// (x86-64) and NEON (aarch64) variants are selected once at runtime.
//
// Set WEAKDIFF_ISA=scalar|avx2|neon to override the selection. An override
// naming an ISA the CPU cannot run falls back to scalar.

#include <cstddef>
#include <limits>
#include <span>
#include <string_view>

namespace weakdiff::simd {

enum class Isa { scalar, avx2, neon };

// Result of scanning all targets for one auction bidder.
//   value_j = -||point - target_j||^2 - price_j
struct BidScan {
  std::size_t best_index = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  double second_value = -std::numeric_limits<double>::infinity();
};

struct KernelTable {
  Isa isa;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // out = a * x + b * y  (out may alias x or y)
  void (*axpby)(double a, const double* x, double b, const double* y, double* out, std::size_t n);
  // y += M x, M row-major rows x cols
  void (*gemv)(const double* m, std::size_t rows, std::size_t cols, const double* x, double* y);
  // y += M^T x, M row-major rows x cols
  void (*gemv_t)(const double* m, std::size_t rows, std::size_t cols, const double* x, double* y);
  // M += alpha * x y^T, M row-major rows x cols
  void (*ger)(double alpha, const double* x, std::size_t rows, const double* y, std::size_t cols, double* m);
  // Auction bid scan over n targets stored structure-of-arrays:
  // coords[k][j] is coordinate k of target j.
  BidScan (*bid_scan)(const double* point, const double* const* coords, std::size_t dim,
                      const double* prices, std::size_t n);
};

// Kernels for the ISA chosen at startup.
const KernelTable& kernels();

Isa active_isa();

// nullptr when the ISA is not compiled in or not supported by this CPU.
const KernelTable* kernels_for(Isa isa);

std::string_view isa_name(Isa isa);

// Span conveniences over the active table. Sizes are checked with assertions
// in the callers' modules; these are thin forwards.
inline double dot(std::span<const double> a, std::span<const double> b) {
  return kernels().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  kernels().axpy(alpha, x.data(), y.data(), x.size());
}

inline double squared_norm(std::span<const double> a) { return dot(a, a); }

}  // namespace weakdiff::simd
