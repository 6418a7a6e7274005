#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace sapnet {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

// Big-endian field helpers shared by every wire format in the stack.

inline void put_u16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

inline void put_u32(Bytes& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) {
    out.push_back(static_cast<std::uint8_t>(v >> shift));
  }
}

inline void put_u64(Bytes& out, std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) {
    out.push_back(static_cast<std::uint8_t>(v >> shift));
  }
}

inline std::uint16_t get_u16(ByteView in, std::size_t at) {
  return static_cast<std::uint16_t>((in[at] << 8) | in[at + 1]);
}

inline std::uint32_t get_u32(ByteView in, std::size_t at) {
  return (std::uint32_t{in[at]} << 24) | (std::uint32_t{in[at + 1]} << 16) |
         (std::uint32_t{in[at + 2]} << 8) | std::uint32_t{in[at + 3]};
}

inline std::uint64_t get_u64(ByteView in, std::size_t at) {
  return (std::uint64_t{get_u32(in, at)} << 32) | get_u32(in, at + 4);
}

inline void flip_bit(Bytes& buf, std::size_t bit_index) {
  // Bit 0 is the most significant bit of byte 0 (on-air order).
  buf[bit_index / 8] ^= static_cast<std::uint8_t>(0x80u >> (bit_index % 8));
}

}  // namespace sapnet
