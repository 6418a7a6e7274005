#pragma once

// SAP sockets: precise-by-default datagram sockets whose sender can switch, per
// transmission, to approximate delivery.
//
// Message header, carried as the transport payload (big-endian):
//
//   offset  size  field
//   0       1     type: 1 PING, 2 PING_ACK, 3 DATA, 4 DATA_ACK, 5 FIN, 6 FIN_ACK
//   1       1     flags: bit 0 approximate, bit 1 sequenced (acknowledged)
//   2       4     sequence number (DATA_ACK: the acknowledged sequence number)
//   6       2     reserved, zero
//   8       n     payload (DATA only)
//
// Delivery classes:
//   precise       flags 0x00, cscov 0, MAC retries on, SAP stop-and-wait ARQ
//   approximate   flags 0x01, cscov 16, MAC retry limit 0, no ACK, seq is an
//                 independent per-socket counter
//   mixed         flags 0x03, cscov 16 + prefix, MAC retry limit 0, SAP ARQ
//                 in the precise sequence space
// Control messages are always precise. Precise messages arriving in a frame
// that failed its FCS are dropped.

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <stdexcept>

#include "sapnet/bytes.hpp"
#include "sapnet/sim_clock.hpp"
#include "sapnet/world.hpp"

namespace sapnet::sap {

enum class MsgType : std::uint8_t { Ping = 1, PingAck = 2, Data = 3, DataAck = 4, Fin = 5, FinAck = 6 };

inline constexpr std::uint8_t kFlagApproximate = 0x01;
inline constexpr std::uint8_t kFlagSequenced = 0x02;
inline constexpr std::size_t kHeaderSize = 8;
// Transport header plus SAP header: the minimum covered range.
inline constexpr std::uint16_t kControlCoverage = transport::kHeaderSize + kHeaderSize;
inline constexpr unsigned kMacRetryLimit = 7;

struct SapMessage {
  MsgType type = MsgType::Data;
  std::uint8_t flags = 0;
  std::uint32_t seq = 0;
  Bytes payload;

  bool approximate() const { return (flags & kFlagApproximate) != 0; }
  // Sequenced messages consume the precise sequence space and are ACKed.
  bool sequenced() const { return !approximate() || (flags & kFlagSequenced) != 0; }

  bool operator==(const SapMessage&) const = default;
};

Bytes encode_message(const SapMessage& msg);
// nullopt for short input or an unknown type.
std::optional<SapMessage> decode_message(ByteView bytes);

enum class Mode { Precise, Approximate };
enum class SocketState { Closed, Listening, Connecting, Connected, FinWait };

struct SapTimeouts {
  SimDuration rto = std::chrono::milliseconds(2);
  unsigned retry_budget = 8;  // SAP-level retransmissions after the first try
  SimDuration connect_timeout = std::chrono::seconds(1);
  SimDuration fin_timeout = std::chrono::seconds(1);
};

enum class SapErrc {
  ConnectTimeout,
  PortInUse,
  NotConnected,
  SendTimeout,
  TooLarge,
  InvalidArgument,
  RecvTimeout,
  PeerClosed,
};

const char* to_string(SapErrc code);

class SapError : public std::runtime_error {
 public:
  explicit SapError(SapErrc code) : std::runtime_error(to_string(code)), code_(code) {}
  SapErrc code() const { return code_; }

 private:
  SapErrc code_;
};

struct RecvMeta {
  std::uint32_t seq = 0;
  bool approximate = false;  // approximate or mixed datagram
  bool link_intact = true;   // the MAC frame passed its FCS
  SimTime arrival{0};
};

struct Received {
  Bytes payload;
  RecvMeta meta;
};

struct SocketStats {
  std::uint64_t data_sends = 0;          // send() calls that put data on the air
  std::uint64_t data_transmissions = 0;  // SAP-level DATA transmissions incl. retransmits
  std::uint64_t data_on_air = 0;         // MAC tries for DATA
  std::uint64_t sap_retransmissions = 0;
  std::uint64_t first_try_unacked = 0;   // DATA whose first MAC try got no ACK
  std::uint64_t duplicates = 0;          // precise DATA re-ACKed, not redelivered
  std::uint64_t protocol_violations = 0; // precise DATA ahead of the expected seq
  std::uint64_t precise_fcs_dropped = 0; // precise frames with a failed FCS
};

class SapSocket {
 public:
  // Active open: precise PING every rto until PING_ACK or connect_timeout.
  // Port 0 in `local` picks an ephemeral port.
  static SapSocket connect(World& world, Endpoint local, Endpoint peer, SapTimeouts timeouts = {});
  // Passive open: answers the first PING and any retransmitted PINGs.
  static SapSocket listen(World& world, Endpoint local, SapTimeouts timeouts = {});

  SapSocket(SapSocket&&) noexcept;
  SapSocket& operator=(SapSocket&&) noexcept;
  ~SapSocket();  // releases the port without sending FIN

  void set_mode(Mode mode);
  Mode mode() const;
  SocketState state() const;

  // precise_prefix_len only matters in approximate mode; 0 means fully
  // approximate, P > 0 protects and acknowledges the first P bytes.
  void send(ByteView data, std::size_t precise_prefix_len = 0);
  Received recv(SimDuration timeout);
  // Non-blocking: whatever is already queued.
  std::optional<Received> try_recv();
  // Best-effort FIN handshake bounded by fin_timeout; idempotent.
  void close();

  bool peer_closed() const;
  std::optional<SimTime> peer_fin_time() const;
  std::size_t queued() const;
  const SocketStats& stats() const;
  World& world() const;
  Endpoint local() const;
  std::optional<Endpoint> peer() const;
  std::uint32_t next_tx_seq() const;
  std::uint32_t next_expected_rx_seq() const;

  // Largest payload a single send() accepts under the world's MTU.
  std::size_t max_payload() const;

 private:
  struct Impl;
  explicit SapSocket(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

}  // namespace sapnet::sap
