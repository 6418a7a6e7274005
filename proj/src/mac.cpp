#include "sapnet/mac.hpp"

#include <algorithm>

#include "sapnet/kernels.hpp"

namespace sapnet::mac {

std::uint32_t compute_fcs(ByteView bytes) {
  return kernels::active().crc32_update(0xFFFFFFFFu, bytes) ^ 0xFFFFFFFFu;
}

Bytes encode_frame(const MacFrame& frame, std::size_t mtu) {
  if (frame.payload.size() > mtu) {
    throw MacError(MacErrc::PayloadTooLarge, "MAC payload exceeds MTU");
  }
  Bytes out;
  out.reserve(kMinFrameSize + frame.payload.size());
  out.insert(out.end(), frame.dst.begin(), frame.dst.end());
  out.insert(out.end(), frame.src.begin(), frame.src.end());
  put_u16(out, frame.seq);
  out.push_back(static_cast<std::uint8_t>(frame.type));
  out.insert(out.end(), frame.payload.begin(), frame.payload.end());
  put_u32(out, compute_fcs(out));
  return out;
}

RxDecision rx_filter(ByteView bytes, const Address& my_addr, const MacConfig& config) {
  if (bytes.size() < kMinFrameSize) {
    throw MacError(MacErrc::TooShort, "frame shorter than MAC header + FCS");
  }
  if (!std::equal(my_addr.begin(), my_addr.end(), bytes.begin())) {
    return Drop{DropReason::NotForMe};
  }
  const std::size_t body = bytes.size() - kFcsSize;
  const std::uint32_t carried = get_u32(bytes, body);
  const bool fcs_ok = compute_fcs(bytes.first(body)) == carried;
  if (!fcs_ok && !config.approx_rx_switch) {
    return Drop{DropReason::BadFcs};
  }
  const std::uint8_t type = bytes[14];
  if (type != static_cast<std::uint8_t>(FrameType::Data) &&
      type != static_cast<std::uint8_t>(FrameType::Ack)) {
    return Drop{DropReason::Malformed};
  }

  Accept accept{MacFrame{}, fcs_ok};
  MacFrame& f = accept.frame;
  std::copy_n(bytes.begin(), 6, f.dst.begin());
  std::copy_n(bytes.begin() + 6, 6, f.src.begin());
  f.seq = get_u16(bytes, 12);
  f.type = static_cast<FrameType>(type);
  f.payload.assign(bytes.begin() + kHeaderSize, bytes.begin() + static_cast<std::ptrdiff_t>(body));
  f.fcs = carried;
  return accept;
}

SimDuration frame_airtime(std::size_t payload_bytes, const MacConfig& config) {
  return micros(config.airtime.overhead_us +
                static_cast<double>(payload_bytes * 8) / config.bitrate_mbps);
}

SendResult send_over_link(const MacFrame& frame, const MacConfig& config, Link& link,
                          SimClock& clock) {
  const Bytes wire = encode_frame(frame, config.mtu);
  const SimDuration airtime = frame_airtime(frame.payload.size(), config);
  const SimDuration ack_airtime = micros(config.airtime.ack_us);
  const unsigned max_tries = config.retry_limit + 1;
  MacConfig ack_rx_config = link.sender.config;
  ack_rx_config.approx_rx_switch = false;

  for (unsigned attempt = 1; attempt <= max_tries; ++attempt) {
    if (attempt > 1) {
      clock.advance(micros(config.airtime.backoff_us * (attempt - 1)));
    }
    clock.advance(airtime);
    ++link.sender.counters.data_on_air;

    std::optional<Bytes> arrived = link.forward.carry(wire);
    if (!arrived) {
      continue;
    }
    RxDecision decision = rx_filter(*arrived, link.receiver.addr, link.receiver.config);
    if (const auto* drop = std::get_if<Drop>(&decision)) {
      ++link.receiver.counters.drops[static_cast<std::size_t>(drop->reason)];
      continue;
    }
    const Accept& accept = std::get<Accept>(decision);
    if (accept.frame.type != FrameType::Data) {
      ++link.receiver.counters.drops[static_cast<std::size_t>(DropReason::Malformed)];
      continue;
    }
    if (accept.fcs_ok) {
      ++link.receiver.counters.data_rx_ok;
    } else {
      ++link.receiver.counters.data_rx_damaged;
    }
    if (link.receiver.upcall) {
      link.receiver.upcall(accept);
    }
    if (!accept.fcs_ok) {
      continue;
    }

    MacFrame ack;
    ack.dst = accept.frame.src;
    ack.src = link.receiver.addr;
    ack.seq = accept.frame.seq;
    ack.type = FrameType::Ack;
    ++link.receiver.counters.acks_sent;
    clock.advance(ack_airtime);
    std::optional<Bytes> ack_arrived = link.reverse.carry(encode_frame(ack));
    if (!ack_arrived) {
      continue;
    }
    RxDecision ack_decision = rx_filter(*ack_arrived, link.sender.addr, ack_rx_config);
    const auto* ack_accept = std::get_if<Accept>(&ack_decision);
    if (ack_accept != nullptr && ack_accept->frame.type == FrameType::Ack &&
        ack_accept->frame.seq == frame.seq) {
      ++link.sender.counters.acks_received;
      return {SendResult::Outcome::Delivered, attempt};
    }
  }
  return {SendResult::Outcome::Exhausted, max_tries};
}

}  // namespace sapnet::mac
