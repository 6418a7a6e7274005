#pragma once

// Byte-crunching inner loops of the stack. Each kernel has a portable scalar
// reference and, on x86-64, an AVX2/PCLMUL variant. The variant is chosen once
// at startup from CPUID; SAPNET_KERNELS=scalar in the environment forces the
// reference path. All variants are bit-exact with each other.

#include <cstddef>
#include <cstdint>
#include <span>

namespace sapnet::kernels {

struct KernelTable {
  const char* name;

  // Reflected CRC-32 (poly 0xEDB88320) register update. `state` is the raw
  // register (caller applies the initial/final inversion).
  std::uint32_t (*crc32_update)(std::uint32_t state, std::span<const std::uint8_t> data);

  // One's-complement sum of big-endian 16-bit words, folded to 16 bits. An odd
  // trailing byte is treated as the high half of a zero-padded word.
  std::uint16_t (*ones_sum16)(std::span<const std::uint8_t> data);

  // Number of differing bits between two equal-length buffers.
  std::uint64_t (*bit_diff)(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

  // Writes mix32(first_counter + i) for i in [0, out.size()/4) as big-endian
  // words. out.size() must be a multiple of 4.
  void (*mix_fill_be)(std::uint32_t first_counter, std::span<std::uint8_t> out);
};

// 32-bit avalanche mixer used by the Streamer payload generator.
constexpr std::uint32_t mix32(std::uint32_t x) {
  x ^= x >> 16;
  x *= 0x7FEB352Du;
  x ^= x >> 15;
  x *= 0x846CA68Bu;
  x ^= x >> 16;
  return x;
}

const KernelTable& scalar();

// nullptr when the build or the running CPU lacks AVX2 + PCLMULQDQ.
const KernelTable* avx2();

// The table every caller in the library goes through.
const KernelTable& active();

}  // namespace sapnet::kernels
