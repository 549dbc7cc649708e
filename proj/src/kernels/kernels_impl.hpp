#pragma once

#include "atlasfuse/kernels.hpp"

namespace atlasfuse::kernels::detail {

#if defined(ATLASFUSE_HAVE_AVX2)
// Defined in kernels_avx2.cpp, which is the only TU built with -mavx2.
const KernelTable& avx2_table() noexcept;
#endif

}  // namespace atlasfuse::kernels::detail
