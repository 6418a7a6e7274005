#include "sapnet/apps/streamer.hpp"

#include <stdexcept>

#include "sapnet/kernels.hpp"

namespace sapnet::apps {

namespace {

constexpr std::uint16_t kStreamerPort = 5001;
constexpr std::size_t kSetupSize = 12;

Bytes encode_setup(std::uint32_t seed32, std::uint32_t words, std::uint32_t datagrams) {
  Bytes out;
  put_u32(out, seed32);
  put_u32(out, words);
  put_u32(out, datagrams);
  return out;
}

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

std::uint32_t streamer_word(std::uint32_t counter) { return kernels::mix32(counter); }

Bytes streamer_payload(std::uint32_t seed32, std::uint32_t index, unsigned words_per_datagram) {
  Bytes out(std::size_t{words_per_datagram} * 4);
  kernels::active().mix_fill_be(seed32 + index * words_per_datagram, out);
  return out;
}

void validate(const StreamerConfig& cfg) {
  if (cfg.words_per_datagram == 0) {
    throw std::invalid_argument("words_per_datagram must be positive");
  }
  const std::uint64_t per = 4ull * cfg.words_per_datagram;
  if (cfg.total_bytes == 0 || cfg.total_bytes % per != 0) {
    throw std::invalid_argument("total_bytes must be a positive multiple of 4 * words_per_datagram");
  }
}

StreamerReceiver::StreamerReceiver(std::uint32_t seed32, unsigned words_per_datagram,
                                   std::uint64_t datagrams)
    : seed32_(seed32), words_(words_per_datagram), datagrams_(datagrams), seen_(datagrams, false) {
  acc_.sent = datagrams;
}

void StreamerReceiver::accept(std::uint64_t index, ByteView payload, bool link_intact) {
  if (index >= datagrams_ || seen_[index]) {
    return;
  }
  seen_[index] = true;
  expected_.resize(std::size_t{words_} * 4);
  kernels::active().mix_fill_be(seed32_ + static_cast<std::uint32_t>(index) * words_, expected_);

  const std::size_t common = std::min(payload.size(), expected_.size());
  std::uint64_t errors =
      kernels::active().bit_diff(payload.first(common), ByteView(expected_).first(common));
  // A short payload counts its missing bits as wrong.
  errors += 8ull * (expected_.size() - common);
  const std::uint64_t bits = 8ull * expected_.size();

  ++acc_.delivered;
  acc_.bits_delivered += bits;
  acc_.bit_errors += errors;
  if (!link_intact) {
    ++acc_.damaged;
    acc_.bits_in_damaged += bits;
    acc_.bit_errors_in_damaged += errors;
  }
}

StreamerReport StreamerReceiver::report() const {
  StreamerReport r = acc_;
  r.lost = r.sent - r.delivered;
  r.damaged_frame_fraction = ratio(r.damaged, r.sent);
  r.flr = ratio(r.lost + r.damaged, r.sent);
  r.flr_b = ratio(r.lost, r.sent);
  r.ber_in_damaged = ratio(r.bit_errors_in_damaged, r.bits_in_damaged);
  r.ber_overall = ratio(r.bit_errors, r.bits_delivered);
  r.correct_bit_fraction = ratio(r.bits_delivered - r.bit_errors, r.bits_delivered);
  return r;
}

StreamerReport streamer_run(const StreamerConfig& cfg, World& world) {
  validate(cfg);
  const std::uint64_t datagrams = cfg.total_bytes / (4ull * cfg.words_per_datagram);

  auto rx = sap::SapSocket::listen(world, Endpoint{1, kStreamerPort});
  auto tx = sap::SapSocket::connect(world, Endpoint{0, 0}, Endpoint{1, kStreamerPort});

  tx.send(encode_setup(cfg.seed32, cfg.words_per_datagram, static_cast<std::uint32_t>(datagrams)));
  const auto first_try_before = tx.stats().first_try_unacked;
  tx.set_mode(cfg.mode);
  for (std::uint64_t i = 0; i < datagrams; ++i) {
    tx.send(streamer_payload(cfg.seed32, static_cast<std::uint32_t>(i), cfg.words_per_datagram));
  }
  const auto first_try_unacked = tx.stats().first_try_unacked - first_try_before;
  tx.close();

  // The receiver learns everything it needs from the precise setup message.
  sap::Received setup = rx.recv(std::chrono::seconds(1));
  if (setup.meta.approximate || setup.payload.size() != kSetupSize) {
    throw std::runtime_error("streamer setup message malformed");
  }
  StreamerReceiver receiver(get_u32(setup.payload, 0), get_u32(setup.payload, 4),
                            get_u32(setup.payload, 8));
  while (true) {
    sap::Received r;
    try {
      r = rx.recv(std::chrono::seconds(1));
    } catch (const sap::SapError& e) {
      if (e.code() == sap::SapErrc::PeerClosed || e.code() == sap::SapErrc::RecvTimeout) {
        break;
      }
      throw;
    }
    // Precise data shares the sequence space with the setup message (seq 0).
    const std::uint64_t index = r.meta.approximate ? r.meta.seq : r.meta.seq - 1u;
    receiver.accept(index, r.payload, r.meta.link_intact);
  }
  rx.close();

  StreamerReport report = receiver.report();
  report.retransmit_fraction = static_cast<double>(first_try_unacked) / static_cast<double>(datagrams);
  return report;
}

}  // namespace sapnet::apps
