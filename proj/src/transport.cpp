#include "sapnet/transport.hpp"

#include "sapnet/kernels.hpp"

namespace sapnet::transport {

namespace {

std::uint16_t covered_checksum(ByteView covered) {
  // Sum around the checksum field at offset 6..7, which counts as zero.
  const auto& k = kernels::active();
  std::uint32_t sum = std::uint32_t{k.ones_sum16(covered.first(6))} + k.ones_sum16(covered.subspan(8));
  sum = (sum & 0xFFFFu) + (sum >> 16);
  const auto result = static_cast<std::uint16_t>(~sum);
  return result == 0 ? 0xFFFF : result;
}

}  // namespace

std::uint16_t internet_checksum(ByteView bytes) {
  return static_cast<std::uint16_t>(~kernels::active().ones_sum16(bytes));
}

std::size_t effective_coverage(std::uint16_t cscov, std::size_t datagram_len) {
  return cscov == 0 ? datagram_len : cscov;
}

bool cscov_valid(std::uint16_t cscov, std::size_t datagram_len) {
  return cscov == 0 || (cscov >= kHeaderSize && cscov <= datagram_len);
}

Bytes lite_encode(const LiteDatagram& dgram) {
  const std::size_t total = kHeaderSize + dgram.payload.size();
  if (!cscov_valid(dgram.cscov, total)) {
    throw TransportError(TransportErrc::InvalidCscov, "cscov must be 0 or 8..datagram length");
  }
  Bytes out;
  out.reserve(total);
  put_u16(out, dgram.src_port);
  put_u16(out, dgram.dst_port);
  put_u16(out, dgram.cscov);
  put_u16(out, 0);
  out.insert(out.end(), dgram.payload.begin(), dgram.payload.end());

  const std::size_t cov = effective_coverage(dgram.cscov, total);
  std::uint16_t sum = internet_checksum(ByteView(out).first(cov));
  if (sum == 0) {
    sum = 0xFFFF;
  }
  out[6] = static_cast<std::uint8_t>(sum >> 8);
  out[7] = static_cast<std::uint8_t>(sum);
  return out;
}

DecodeResult lite_decode(ByteView bytes) {
  if (bytes.size() < kHeaderSize) {
    throw TransportError(TransportErrc::TooShort, "datagram shorter than UDP-Lite header");
  }
  const std::uint16_t cscov = get_u16(bytes, 4);
  if (!cscov_valid(cscov, bytes.size())) {
    return DecodeDrop::InvalidCscov;
  }
  const std::size_t cov = effective_coverage(cscov, bytes.size());
  const std::uint16_t carried = get_u16(bytes, 6);
  if (covered_checksum(bytes.first(cov)) != carried) {
    return DecodeDrop::ChecksumMismatch;
  }
  LiteDatagram d;
  d.src_port = get_u16(bytes, 0);
  d.dst_port = get_u16(bytes, 2);
  d.cscov = cscov;
  d.checksum = carried;
  d.payload.assign(bytes.begin() + kHeaderSize, bytes.end());
  return d;
}

}  // namespace sapnet::transport
