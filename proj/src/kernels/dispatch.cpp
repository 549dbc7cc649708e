#include <cstdlib>
#include <string_view>

#include "kernels_impl.hpp"

namespace atlasfuse::kernels {

const KernelTable* avx2_kernels() noexcept {
#if defined(ATLASFUSE_HAVE_AVX2)
  static const bool supported = __builtin_cpu_supports("avx2");
  return supported ? &detail::avx2_table() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() noexcept {
  static const KernelTable* table = [] {
    const char* env = std::getenv("ATLASFUSE_SIMD");
    if (env != nullptr && std::string_view(env) == "scalar") return &scalar_kernels();
    const KernelTable* simd = avx2_kernels();
    return simd != nullptr ? simd : &scalar_kernels();
  }();
  return *table;
}

}  // namespace atlasfuse::kernels
