#include "kernels_internal.hpp"

#include <array>
#include <bit>

namespace sapnet::kernels {

namespace {

constexpr std::array<std::uint32_t, 256> make_crc_table() {
  std::array<std::uint32_t, 256> table{};
  for (std::uint32_t n = 0; n < 256; ++n) {
    std::uint32_t c = n;
    for (int k = 0; k < 8; ++k) {
      c = (c & 1u) ? (0xEDB88320u ^ (c >> 1)) : (c >> 1);
    }
    table[n] = c;
  }
  return table;
}

constexpr auto kCrcTable = make_crc_table();

std::uint32_t crc32_update_scalar(std::uint32_t state, std::span<const std::uint8_t> data) {
  for (std::uint8_t byte : data) {
    state = kCrcTable[(state ^ byte) & 0xFFu] ^ (state >> 8);
  }
  return state;
}

std::uint16_t ones_sum16_scalar(std::span<const std::uint8_t> data) {
  std::uint64_t sum = 0;
  std::size_t i = 0;
  for (; i + 1 < data.size(); i += 2) {
    sum += (std::uint32_t{data[i]} << 8) | data[i + 1];
  }
  if (i < data.size()) {
    sum += std::uint32_t{data[i]} << 8;
  }
  return fold_ones_sum(sum);
}

std::uint64_t bit_diff_scalar(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  std::uint64_t count = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    count += static_cast<std::uint64_t>(std::popcount(static_cast<unsigned>(a[i] ^ b[i])));
  }
  return count;
}

void mix_fill_be_scalar(std::uint32_t first_counter, std::span<std::uint8_t> out) {
  const std::size_t words = out.size() / 4;
  for (std::size_t i = 0; i < words; ++i) {
    const std::uint32_t w = mix32(first_counter + static_cast<std::uint32_t>(i));
    out[4 * i + 0] = static_cast<std::uint8_t>(w >> 24);
    out[4 * i + 1] = static_cast<std::uint8_t>(w >> 16);
    out[4 * i + 2] = static_cast<std::uint8_t>(w >> 8);
    out[4 * i + 3] = static_cast<std::uint8_t>(w);
  }
}

}  // namespace

std::uint32_t crc32_tail(std::uint32_t state, std::span<const std::uint8_t> data) {
  return crc32_update_scalar(state, data);
}

const KernelTable& scalar() {
  static const KernelTable table{
      "scalar", crc32_update_scalar, ones_sum16_scalar, bit_diff_scalar, mix_fill_be_scalar};
  return table;
}

}  // namespace sapnet::kernels
