#pragma once

// 802.11-like link layer with the two approximate-delivery switches: a sender
// retry limit (zero for approximate payloads) and a receiver switch that hands
// FCS-failing frames upward instead of dropping them.
//
// Frame layout (all multi-byte fields big-endian):
//
//   offset  size  field
//   0       6     destination address
//   6       6     source address
//   12      2     sequence number
//   14      1     frame type (0x01 DATA, 0x02 ACK)
//   15      n     payload (empty for ACK)
//   15+n    4     FCS: CRC-32 over bytes [0, 15+n)

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <variant>

#include "sapnet/bytes.hpp"
#include "sapnet/channel.hpp"
#include "sapnet/sim_clock.hpp"

namespace sapnet::mac {

using Address = std::array<std::uint8_t, 6>;

enum class FrameType : std::uint8_t { Data = 0x01, Ack = 0x02 };

inline constexpr std::size_t kHeaderSize = 15;
inline constexpr std::size_t kFcsSize = 4;
inline constexpr std::size_t kMinFrameSize = kHeaderSize + kFcsSize;
inline constexpr std::size_t kDefaultMtu = 2304;

struct MacFrame {
  Address dst{};
  Address src{};
  std::uint16_t seq = 0;
  FrameType type = FrameType::Data;
  Bytes payload;
  std::uint32_t fcs = 0;  // filled by encode/decode

  bool operator==(const MacFrame&) const = default;
};

struct Airtime {
  double overhead_us = 100.0;  // per frame on air
  double ack_us = 50.0;
  double backoff_us = 100.0;  // multiplied by the retry index
};

struct MacConfig {
  unsigned retry_limit = 7;
  bool approx_rx_switch = false;
  double bitrate_mbps = 54.0;
  Airtime airtime;
  std::size_t mtu = kDefaultMtu;
};

enum class MacErrc { PayloadTooLarge, TooShort };

class MacError : public std::runtime_error {
 public:
  MacError(MacErrc code, const char* what) : std::runtime_error(what), code_(code) {}
  MacErrc code() const { return code_; }

 private:
  MacErrc code_;
};

// IEEE 802.3 CRC-32: reflected 0xEDB88320, init and final XOR 0xFFFFFFFF.
std::uint32_t compute_fcs(ByteView bytes);

Bytes encode_frame(const MacFrame& frame, std::size_t mtu = kDefaultMtu);

enum class DropReason : std::uint8_t { NotForMe, BadFcs, Malformed };

struct Accept {
  MacFrame frame;
  bool fcs_ok;
};

struct Drop {
  DropReason reason;
};

using RxDecision = std::variant<Accept, Drop>;

// Address filtering always runs first, so damage that rewrites the destination
// drops the frame even with the approximate switch on. Throws MacError
// (TooShort) below 19 bytes.
RxDecision rx_filter(ByteView bytes, const Address& my_addr, const MacConfig& config);

// overhead + payload_bits / bitrate.
SimDuration frame_airtime(std::size_t payload_bytes, const MacConfig& config);

struct MacCounters {
  std::uint64_t data_on_air = 0;        // DATA transmissions, including retries
  std::uint64_t data_rx_ok = 0;         // DATA accepted with a valid FCS
  std::uint64_t data_rx_damaged = 0;    // DATA accepted through the switch
  std::uint64_t acks_sent = 0;
  std::uint64_t acks_received = 0;
  std::array<std::uint64_t, 3> drops{};  // indexed by DropReason
};

struct Station {
  Address addr{};
  MacConfig config;  // receive side uses approx_rx_switch
  std::uint16_t next_seq = 0;
  // Called once per on-air arrival that passes rx_filter. Duplicates caused by
  // lost ACKs are passed through.
  std::function<void(const Accept&)> upcall;
  MacCounters counters;
};

// One sender -> receiver hop; ACKs return over `reverse`.
struct Link {
  channel::LinkChannel& forward;
  channel::LinkChannel& reverse;
  Station& sender;
  Station& receiver;
};

struct SendResult {
  enum class Outcome { Delivered, Exhausted };
  Outcome outcome;
  unsigned tries;

  bool delivered() const { return outcome == Outcome::Delivered; }
};

// Stop-and-wait MAC exchange: transmit, wait for ACK, retry up to
// config.retry_limit more times. Advances `clock` by the airtime of every
// transmission, ACK and backoff.
SendResult send_over_link(const MacFrame& frame, const MacConfig& config, Link& link,
                          SimClock& clock);

}  // namespace sapnet::mac
