#pragma once

// Streamer: sends predictable pseudo-random words so the receiver can measure
// exactly which bits were damaged. The seed travels precisely; payload words
// are mix32(seed + i * words_per_datagram + j) for datagram i, word j.

#include <cstdint>
#include <span>
#include <vector>

#include "sapnet/sap.hpp"
#include "sapnet/world.hpp"

namespace sapnet::apps {

std::uint32_t streamer_word(std::uint32_t counter);

// Big-endian words for one datagram.
Bytes streamer_payload(std::uint32_t seed32, std::uint32_t index, unsigned words_per_datagram);

struct StreamerConfig {
  std::uint32_t seed32 = 0;
  std::uint64_t total_bytes = 10ull << 20;
  unsigned words_per_datagram = 256;
  sap::Mode mode = sap::Mode::Approximate;
};

void validate(const StreamerConfig& cfg);

struct StreamerReport {
  double damaged_frame_fraction = 0;  // delivered with a failed FCS / sent
  double ber_in_damaged = 0;
  double ber_overall = 0;             // over every delivered payload bit
  double flr = 0;                     // (lost + damaged) / sent
  double flr_b = 0;                   // lost / sent
  double correct_bit_fraction = 0;    // correct delivered bits / delivered bits
  double retransmit_fraction = 0;     // sender-side: first MAC try unacknowledged

  std::uint64_t sent = 0;
  std::uint64_t delivered = 0;
  std::uint64_t damaged = 0;
  std::uint64_t lost = 0;
  std::uint64_t bits_delivered = 0;
  std::uint64_t bit_errors = 0;
  std::uint64_t bits_in_damaged = 0;
  std::uint64_t bit_errors_in_damaged = 0;
};

// Receiver-side bookkeeping; usable without a world for scripted inputs.
class StreamerReceiver {
 public:
  StreamerReceiver(std::uint32_t seed32, unsigned words_per_datagram, std::uint64_t datagrams);

  // Ignores duplicates and out-of-range indices.
  void accept(std::uint64_t index, ByteView payload, bool link_intact);
  StreamerReport report() const;

 private:
  std::uint32_t seed32_;
  unsigned words_;
  std::uint64_t datagrams_;
  std::vector<bool> seen_;
  Bytes expected_;
  StreamerReport acc_;
};

// Runs one transfer in `world`: station 0 sends to a listener on station 1.
StreamerReport streamer_run(const StreamerConfig& cfg, World& world);

}  // namespace sapnet::apps
