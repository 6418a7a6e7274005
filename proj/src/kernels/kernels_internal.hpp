#pragma once

#include "sapnet/kernels.hpp"

namespace sapnet::kernels {

inline std::uint16_t fold_ones_sum(std::uint64_t sum) {
  while (sum >> 16) {
    sum = (sum & 0xFFFFu) + (sum >> 16);
  }
  return static_cast<std::uint16_t>(sum);
}

// Table-driven byte loop; the SIMD CRC uses it for sub-block tails.
std::uint32_t crc32_tail(std::uint32_t state, std::span<const std::uint8_t> data);

#if defined(SAPNET_HAVE_AVX2)
const KernelTable& avx2_table();
#endif

}  // namespace sapnet::kernels
