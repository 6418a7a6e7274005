#pragma once

// UDP-Lite-style datagrams with partial checksum coverage.
//
// Layout (big-endian):
//
//   offset  size  field
//   0       2     source port
//   2       2     destination port
//   4       2     checksum coverage (cscov), octets from offset 0; 0 = all
//   6       2     Internet checksum over the covered octets, this field zeroed
//   8       n     payload
//
// Legal cscov: 0, or 8..8+n. A computed checksum of 0x0000 is sent as 0xFFFF;
// there is no "checksum disabled" value. No pseudo-header is included.

#include <cstdint>
#include <stdexcept>
#include <variant>

#include "sapnet/bytes.hpp"

namespace sapnet::transport {

inline constexpr std::size_t kHeaderSize = 8;

struct LiteDatagram {
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint16_t cscov = 0;
  std::uint16_t checksum = 0;  // ignored by encode, filled by decode
  Bytes payload;

  bool operator==(const LiteDatagram&) const = default;
};

enum class TransportErrc { InvalidCscov, TooShort };

class TransportError : public std::runtime_error {
 public:
  TransportError(TransportErrc code, const char* what) : std::runtime_error(what), code_(code) {}
  TransportErrc code() const { return code_; }

 private:
  TransportErrc code_;
};

// RFC 1071 checksum of big-endian words; odd input is padded with one zero byte.
std::uint16_t internet_checksum(ByteView bytes);

// Number of leading octets the checksum protects for a datagram of total
// length `datagram_len`.
std::size_t effective_coverage(std::uint16_t cscov, std::size_t datagram_len);

bool cscov_valid(std::uint16_t cscov, std::size_t datagram_len);

Bytes lite_encode(const LiteDatagram& dgram);

enum class DecodeDrop { ChecksumMismatch, InvalidCscov };

using DecodeResult = std::variant<LiteDatagram, DecodeDrop>;

// Throws TransportError (TooShort) below 8 bytes. Damage outside the covered
// range is returned to the caller untouched.
DecodeResult lite_decode(ByteView bytes);

}  // namespace sapnet::transport
