// AVX2 + PCLMULQDQ variants. This translation unit is the only one built with
// -mavx2 -mpclmul; nothing here runs unless dispatch confirmed CPU support.

#include "kernels_internal.hpp"

#include <immintrin.h>

namespace sapnet::kernels {

namespace {

inline __m128i load128(const std::uint8_t* p) {
  return _mm_loadu_si128(reinterpret_cast<const __m128i*>(p));
}

inline __m128i fold16(__m128i acc, __m128i next, __m128i k) {
  const __m128i lo = _mm_clmulepi64_si128(acc, k, 0x00);
  const __m128i hi = _mm_clmulepi64_si128(acc, k, 0x11);
  return _mm_xor_si128(_mm_xor_si128(hi, lo), next);
}

// Carry-less multiply folding for the reflected CRC-32 polynomial. Folds four
// 128-bit lanes across 64-byte blocks, collapses to one lane, then Barrett
// reduces to 32 bits. Requires len >= 64 and len % 16 == 0.
std::uint32_t crc32_fold(std::uint32_t state, const std::uint8_t* buf, std::size_t len) {
  // x^(4*128+32) mod P, x^(4*128-32) mod P (bit-reflected, shifted by one).
  const __m128i k1k2 = _mm_set_epi64x(0x01c6e41596, 0x0154442bd4);
  // x^(128+32) mod P, x^(128-32) mod P.
  const __m128i k3k4 = _mm_set_epi64x(0x00ccaa009e, 0x01751997d0);
  // x^64 mod P.
  const __m128i k5 = _mm_set_epi64x(0, 0x0163cd6124);
  // P(x) and floor(x^64 / P(x)), both reflected.
  const __m128i poly = _mm_set_epi64x(0x01f7011641, 0x01db710641);
  const __m128i mask32 = _mm_setr_epi32(~0, 0, ~0, 0);

  __m128i x1 = load128(buf + 0x00);
  __m128i x2 = load128(buf + 0x10);
  __m128i x3 = load128(buf + 0x20);
  __m128i x4 = load128(buf + 0x30);
  x1 = _mm_xor_si128(x1, _mm_cvtsi32_si128(static_cast<int>(state)));
  buf += 64;
  len -= 64;

  while (len >= 64) {
    x1 = fold16(x1, load128(buf + 0x00), k1k2);
    x2 = fold16(x2, load128(buf + 0x10), k1k2);
    x3 = fold16(x3, load128(buf + 0x20), k1k2);
    x4 = fold16(x4, load128(buf + 0x30), k1k2);
    buf += 64;
    len -= 64;
  }

  x1 = fold16(x1, x2, k3k4);
  x1 = fold16(x1, x3, k3k4);
  x1 = fold16(x1, x4, k3k4);

  while (len >= 16) {
    x1 = fold16(x1, load128(buf), k3k4);
    buf += 16;
    len -= 16;
  }

  // 128 -> 64 bits.
  __m128i x2b = _mm_clmulepi64_si128(x1, k3k4, 0x10);
  x1 = _mm_xor_si128(_mm_srli_si128(x1, 8), x2b);
  // 64 -> 32 bits.
  x2b = _mm_srli_si128(x1, 4);
  x1 = _mm_and_si128(x1, mask32);
  x1 = _mm_clmulepi64_si128(x1, k5, 0x00);
  x1 = _mm_xor_si128(x1, x2b);
  // Barrett reduction.
  x2b = _mm_and_si128(x1, mask32);
  x2b = _mm_clmulepi64_si128(x2b, poly, 0x10);
  x2b = _mm_and_si128(x2b, mask32);
  x2b = _mm_clmulepi64_si128(x2b, poly, 0x00);
  x1 = _mm_xor_si128(x1, x2b);
  return static_cast<std::uint32_t>(_mm_extract_epi32(x1, 1));
}

std::uint32_t crc32_update_avx2(std::uint32_t state, std::span<const std::uint8_t> data) {
  const std::size_t len = data.size();
  if (len < 64) {
    return crc32_tail(state, data);
  }
  const std::size_t bulk = len & ~std::size_t{15};
  state = crc32_fold(state, data.data(), bulk);
  return crc32_tail(state, data.subspan(bulk));
}

std::uint16_t ones_sum16_avx2(std::span<const std::uint8_t> data) {
  const std::uint8_t* p = data.data();
  std::size_t len = data.size();

  const __m256i bswap16 = _mm256_setr_epi8(1, 0, 3, 2, 5, 4, 7, 6, 9, 8, 11, 10, 13, 12, 15, 14,
                                           1, 0, 3, 2, 5, 4, 7, 6, 9, 8, 11, 10, 13, 12, 15, 14);
  const __m256i zero = _mm256_setzero_si256();
  std::uint64_t total = 0;

  while (len >= 32) {
    // Each 32-bit lane gains at most 2 * 0xFFFF per block; 16384 blocks stay
    // below 2^32.
    std::size_t blocks = len / 32;
    if (blocks > 16384) {
      blocks = 16384;
    }
    __m256i acc = zero;
    for (std::size_t b = 0; b < blocks; ++b) {
      const __m256i v = _mm256_shuffle_epi8(
          _mm256_loadu_si256(reinterpret_cast<const __m256i*>(p)), bswap16);
      acc = _mm256_add_epi32(acc, _mm256_unpacklo_epi16(v, zero));
      acc = _mm256_add_epi32(acc, _mm256_unpackhi_epi16(v, zero));
      p += 32;
    }
    len -= blocks * 32;
    alignas(32) std::uint32_t lanes[8];
    _mm256_store_si256(reinterpret_cast<__m256i*>(lanes), acc);
    for (std::uint32_t lane : lanes) {
      total += lane;
    }
  }

  std::size_t i = 0;
  for (; i + 1 < len; i += 2) {
    total += (std::uint32_t{p[i]} << 8) | p[i + 1];
  }
  if (i < len) {
    total += std::uint32_t{p[i]} << 8;
  }
  return fold_ones_sum(total);
}

std::uint64_t bit_diff_avx2(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  const __m256i lookup = _mm256_setr_epi8(0, 1, 1, 2, 1, 2, 2, 3, 1, 2, 2, 3, 2, 3, 3, 4,
                                          0, 1, 1, 2, 1, 2, 2, 3, 1, 2, 2, 3, 2, 3, 3, 4);
  const __m256i low_mask = _mm256_set1_epi8(0x0f);
  const __m256i zero = _mm256_setzero_si256();
  __m256i acc = zero;

  const std::size_t n = a.size();
  std::size_t i = 0;
  for (; i + 32 <= n; i += 32) {
    const __m256i va = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a.data() + i));
    const __m256i vb = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b.data() + i));
    const __m256i x = _mm256_xor_si256(va, vb);
    const __m256i lo = _mm256_and_si256(x, low_mask);
    const __m256i hi = _mm256_and_si256(_mm256_srli_epi16(x, 4), low_mask);
    const __m256i cnt =
        _mm256_add_epi8(_mm256_shuffle_epi8(lookup, lo), _mm256_shuffle_epi8(lookup, hi));
    acc = _mm256_add_epi64(acc, _mm256_sad_epu8(cnt, zero));
  }

  alignas(32) std::uint64_t lanes[4];
  _mm256_store_si256(reinterpret_cast<__m256i*>(lanes), acc);
  std::uint64_t count = lanes[0] + lanes[1] + lanes[2] + lanes[3];
  for (; i < n; ++i) {
    count += static_cast<std::uint64_t>(__builtin_popcount(static_cast<unsigned>(a[i] ^ b[i])));
  }
  return count;
}

void mix_fill_be_avx2(std::uint32_t first_counter, std::span<std::uint8_t> out) {
  const std::size_t words = out.size() / 4;
  const __m256i step = _mm256_set1_epi32(8);
  const __m256i m1 = _mm256_set1_epi32(static_cast<int>(0x7FEB352Du));
  const __m256i m2 = _mm256_set1_epi32(static_cast<int>(0x846CA68Bu));
  const __m256i bswap32 = _mm256_setr_epi8(3, 2, 1, 0, 7, 6, 5, 4, 11, 10, 9, 8, 15, 14, 13, 12,
                                           3, 2, 1, 0, 7, 6, 5, 4, 11, 10, 9, 8, 15, 14, 13, 12);
  __m256i counter = _mm256_add_epi32(_mm256_set1_epi32(static_cast<int>(first_counter)),
                                     _mm256_setr_epi32(0, 1, 2, 3, 4, 5, 6, 7));

  std::size_t i = 0;
  for (; i + 8 <= words; i += 8) {
    __m256i x = counter;
    x = _mm256_xor_si256(x, _mm256_srli_epi32(x, 16));
    x = _mm256_mullo_epi32(x, m1);
    x = _mm256_xor_si256(x, _mm256_srli_epi32(x, 15));
    x = _mm256_mullo_epi32(x, m2);
    x = _mm256_xor_si256(x, _mm256_srli_epi32(x, 16));
    x = _mm256_shuffle_epi8(x, bswap32);
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(out.data() + 4 * i), x);
    counter = _mm256_add_epi32(counter, step);
  }
  for (; i < words; ++i) {
    const std::uint32_t w = mix32(first_counter + static_cast<std::uint32_t>(i));
    out[4 * i + 0] = static_cast<std::uint8_t>(w >> 24);
    out[4 * i + 1] = static_cast<std::uint8_t>(w >> 16);
    out[4 * i + 2] = static_cast<std::uint8_t>(w >> 8);
    out[4 * i + 3] = static_cast<std::uint8_t>(w);
  }
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable table{
      "avx2", crc32_update_avx2, ones_sum16_avx2, bit_diff_avx2, mix_fill_be_avx2};
  return table;
}

}  // namespace sapnet::kernels
