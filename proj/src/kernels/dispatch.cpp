#include "kernels_internal.hpp"

#include <cstdlib>
#include <string_view>

namespace sapnet::kernels {

const KernelTable* avx2() {
#if defined(SAPNET_HAVE_AVX2)
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("pclmul") &&
           __builtin_cpu_supports("sse4.1");
  }();
  return supported ? &avx2_table() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() {
  static const KernelTable& chosen = []() -> const KernelTable& {
    const char* forced = std::getenv("SAPNET_KERNELS");
    if (forced != nullptr && std::string_view(forced) == "scalar") {
      return scalar();
    }
    if (const KernelTable* simd = avx2()) {
      return *simd;
    }
    return scalar();
  }();
  return chosen;
}

}  // namespace sapnet::kernels
