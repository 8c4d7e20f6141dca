#pragma once

#include "weakdiff/simd.hpp"

namespace weakdiff::simd::detail {

const KernelTable& scalar_table();
#if defined(WEAKDIFF_HAVE_AVX2)
const KernelTable& avx2_table();
#endif
#if defined(WEAKDIFF_HAVE_NEON)
const KernelTable& neon_table();
#endif

}  // namespace weakdiff::simd::detail
