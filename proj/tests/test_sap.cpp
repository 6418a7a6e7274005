#include <doctest.h>

#include "fixtures.hpp"
#include "sapnet/sap.hpp"

using namespace sapnet;
using namespace sapnet::sap;

namespace {

WorldConfig clean_world(double ber = 0, double loss = 0, std::uint64_t seed = 1) {
  WorldConfig cfg;
  cfg.channel = channel::uniform_channel(ber, loss, seed);
  return cfg;
}

Bytes pattern(std::size_t n, std::uint8_t salt) {
  Bytes out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = static_cast<std::uint8_t>(i * 31 + salt);
  }
  return out;
}

// Flips one bit of every DATA-carrying frame longer than `min_len`.
channel::LinkChannel::Tap flip_at(std::size_t bit, std::size_t min_len, int times = 1 << 30) {
  auto left = std::make_shared<int>(times);
  return [=](std::optional<Bytes>& f, std::uint64_t) {
    if (f && f->size() > min_len && *left > 0) {
      flip_bit(*f, bit);
      --*left;
    }
  };
}

constexpr std::size_t kOverhead = mac::kHeaderSize + transport::kHeaderSize + kHeaderSize;

}  // namespace

TEST_CASE("message fixtures") {
  for (const auto& row : fixtures::rows("sap_vectors.txt")) {
    SapMessage m;
    m.type = static_cast<MsgType>(std::stoul(row[0]));
    m.flags = static_cast<std::uint8_t>(std::stoul(row[1]));
    m.seq = static_cast<std::uint32_t>(std::stoul(row[2]));
    m.payload = fixtures::from_hex(row[3]);
    const Bytes wire = fixtures::from_hex(row[4]);
    CHECK(encode_message(m) == wire);
    CHECK(decode_message(wire) == m);
  }
  CHECK_FALSE(decode_message(Bytes(7, 0)).has_value());
  CHECK_FALSE(decode_message(Bytes{9, 0, 0, 0, 0, 0, 0, 0}).has_value());
  CHECK_FALSE(decode_message(Bytes{0, 0, 0, 0, 0, 0, 0, 0}).has_value());
}

TEST_CASE("sequenced flag semantics") {
  SapMessage m;
  CHECK(m.sequenced());
  m.flags = kFlagApproximate;
  CHECK_FALSE(m.sequenced());
  m.flags = kFlagApproximate | kFlagSequenced;
  CHECK(m.sequenced());
}

TEST_CASE("connect, send precisely, close") {
  World w(clean_world());
  auto rx = SapSocket::listen(w, {1, 7000});
  CHECK(rx.state() == SocketState::Listening);
  auto tx = SapSocket::connect(w, {0, 0}, {1, 7000});
  CHECK(tx.state() == SocketState::Connected);
  CHECK(tx.local().port >= 49152);
  CHECK(rx.state() == SocketState::Connected);
  REQUIRE(rx.peer().has_value());
  CHECK(*rx.peer() == tx.local());

  for (std::uint8_t i = 0; i < 5; ++i) {
    tx.send(pattern(100, i));
  }
  CHECK(tx.next_tx_seq() == 5);
  for (std::uint8_t i = 0; i < 5; ++i) {
    const Received r = rx.recv(std::chrono::milliseconds(1));
    CHECK(r.payload == pattern(100, i));
    CHECK(r.meta.seq == i);
    CHECK_FALSE(r.meta.approximate);
    CHECK(r.meta.link_intact);
  }
  CHECK_THROWS_AS(rx.recv(std::chrono::milliseconds(1)), SapError);

  tx.close();
  CHECK(tx.state() == SocketState::Closed);
  CHECK(rx.peer_closed());
  CHECK(rx.peer_fin_time().has_value());
  try {
    rx.recv(std::chrono::milliseconds(1));
    FAIL("expected PeerClosed");
  } catch (const SapError& e) {
    CHECK(e.code() == SapErrc::PeerClosed);
  }
  tx.close();  // idempotent
  rx.close();
  CHECK_FALSE(w.bound({1, 7000}));
}

TEST_CASE("connect times out on a dead medium") {
  World w(clean_world(0, 1.0));
  auto rx = SapSocket::listen(w, {1, 7000});
  SapTimeouts t;
  t.connect_timeout = std::chrono::milliseconds(20);
  try {
    SapSocket::connect(w, {0, 1234}, {1, 7000}, t);
    FAIL("expected ConnectTimeout");
  } catch (const SapError& e) {
    CHECK(e.code() == SapErrc::ConnectTimeout);
  }
  CHECK_FALSE(w.bound({0, 1234}));
  CHECK(w.now() >= std::chrono::milliseconds(20));
}

TEST_CASE("argument and state errors") {
  World w(clean_world());
  auto rx = SapSocket::listen(w, {1, 7000});
  CHECK_THROWS_AS(SapSocket::listen(w, {1, 7000}), SapError);
  CHECK_THROWS_AS(rx.send(Bytes{1}), SapError);
  CHECK_THROWS_AS(rx.set_mode(Mode::Approximate), SapError);
  auto tx = SapSocket::connect(w, {0, 0}, {1, 7000});
  CHECK(tx.max_payload() == mac::kDefaultMtu - 16);
  CHECK_THROWS_AS(tx.send(Bytes(tx.max_payload() + 1)), SapError);
  CHECK_NOTHROW(tx.send(Bytes(tx.max_payload())));
  tx.set_mode(Mode::Approximate);
  CHECK_THROWS_AS(tx.send(Bytes(4), 5), SapError);
}

TEST_CASE("approximate sends are fire-and-forget") {
  World w(clean_world(1e-3, 0.2, 5));
  auto rx = SapSocket::listen(w, {1, 7000});
  auto tx = SapSocket::connect(w, {0, 0}, {1, 7000});
  tx.set_mode(Mode::Approximate);
  const auto before = tx.stats();
  for (std::uint8_t i = 0; i < 200; ++i) {
    tx.send(pattern(300, i));
  }
  const auto& after = tx.stats();
  CHECK(after.data_sends - before.data_sends == 200);
  CHECK(after.data_on_air - before.data_on_air == 200);
  CHECK(after.sap_retransmissions == 0);
  CHECK(tx.next_tx_seq() == 0);

  w.drain();
  std::size_t got = 0;
  std::size_t damaged = 0;
  while (auto r = rx.try_recv()) {
    ++got;
    CHECK(r->meta.approximate);
    CHECK(r->meta.seq < 200);
    if (r->payload != pattern(300, static_cast<std::uint8_t>(r->meta.seq))) {
      ++damaged;
      CHECK_FALSE(r->meta.link_intact);
    }
  }
  CHECK(got > 100);
  CHECK(got < 200);
  CHECK(damaged > 0);
}

TEST_CASE("precise delivery is exact and ordered over a lossy link") {
  World w(clean_world(1e-4, 0.05, 9));
  auto rx = SapSocket::listen(w, {1, 7000});
  auto tx = SapSocket::connect(w, {0, 0}, {1, 7000});
  for (std::uint8_t i = 0; i < 100; ++i) {
    tx.send(pattern(1024, i));
  }
  for (std::uint8_t i = 0; i < 100; ++i) {
    const Received r = rx.recv(std::chrono::milliseconds(1));
    REQUIRE(r.payload == pattern(1024, i));
    CHECK(r.meta.seq == i);
  }
  CHECK(rx.queued() == 0);
}

TEST_CASE("a lost DATA_ACK yields a re-ACKed duplicate, delivered once") {
  World w(clean_world());
  auto rx = SapSocket::listen(w, {1, 7000});
  auto tx = SapSocket::connect(w, {0, 0}, {1, 7000});
  // Drop every MAC try of the first DATA_ACK; MAC ACKs (minimum-size frames) pass.
  int dropped = 0;
  w.channel(1, 0).set_tap([&](std::optional<Bytes>& f, std::uint64_t) {
    if (f && f->size() > mac::kMinFrameSize && dropped < static_cast<int>(kMacRetryLimit) + 1) {
      f.reset();
      ++dropped;
    }
  });
  tx.send(pattern(50, 1));
  CHECK(tx.stats().sap_retransmissions == 1);
  CHECK(rx.stats().duplicates == 1);
  CHECK(rx.queued() == 1);
  CHECK(rx.recv(std::chrono::milliseconds(1)).payload == pattern(50, 1));
}

TEST_CASE("send times out without consuming the sequence number") {
  World w(clean_world());
  auto rx = SapSocket::listen(w, {1, 7000});
  SapTimeouts t;
  t.retry_budget = 3;
  auto tx = SapSocket::connect(w, {0, 0}, {1, 7000}, t);
  w.channel(1, 0).set_tap([](std::optional<Bytes>& f, std::uint64_t) { f.reset(); });
  try {
    tx.send(pattern(10, 0));
    FAIL("expected SendTimeout");
  } catch (const SapError& e) {
    CHECK(e.code() == SapErrc::SendTimeout);
  }
  CHECK(tx.next_tx_seq() == 0);
  CHECK(tx.stats().data_transmissions == 4);
  CHECK(tx.stats().sap_retransmissions == 3);
}

TEST_CASE("mixed datagrams protect only the prefix") {
  World w(clean_world());
  auto rx = SapSocket::listen(w, {1, 7000});
  auto tx = SapSocket::connect(w, {0, 0}, {1, 7000});
  tx.set_mode(Mode::Approximate);

  // Damage past the prefix is delivered and still ACKed once.
  const std::size_t tail_bit = 8 * (kOverhead + 60);
  w.channel(0, 1).set_tap(flip_at(tail_bit, 100, 1));
  tx.send(pattern(100, 3), 20);
  CHECK(tx.next_tx_seq() == 1);
  CHECK(tx.stats().sap_retransmissions == 0);
  Received r = rx.recv(std::chrono::milliseconds(1));
  CHECK(r.meta.approximate);
  CHECK_FALSE(r.meta.link_intact);
  CHECK(r.meta.seq == 0);
  Bytes expect = pattern(100, 3);
  flip_bit(expect, 8 * 60);
  CHECK(r.payload == expect);

  // Damage inside the prefix is rejected and retransmitted.
  const std::size_t head_bit = 8 * (kOverhead + 5);
  w.channel(0, 1).set_tap(flip_at(head_bit, 100, 1));
  tx.send(pattern(100, 4), 20);
  CHECK(tx.stats().sap_retransmissions == 1);
  r = rx.recv(std::chrono::milliseconds(1));
  CHECK(r.payload == pattern(100, 4));
  CHECK(r.meta.seq == 1);
}

TEST_CASE("approximate payload damage never reaches the SAP header") {
  World w(clean_world());
  auto rx = SapSocket::listen(w, {1, 7000});
  auto tx = SapSocket::connect(w, {0, 0}, {1, 7000});
  tx.set_mode(Mode::Approximate);
  // A flipped SAP sequence bit is caught by the 16-octet coverage.
  w.channel(0, 1).set_tap(flip_at(8 * (mac::kHeaderSize + transport::kHeaderSize + 5), 60, 1));
  tx.send(pattern(64, 0));
  w.drain();
  CHECK(rx.queued() == 0);
  CHECK(w.ledger(0, 1).transport_dropped == 1);
}

TEST_CASE("precise control frames with a failed FCS are ignored") {
  World w(clean_world());
  auto rx = SapSocket::listen(w, {1, 7000});
  auto tx = SapSocket::connect(w, {0, 0}, {1, 7000});
  // Corrupt only the trailing FCS of the next FIN.
  bool done = false;
  w.channel(0, 1).set_tap([&done](std::optional<Bytes>& f, std::uint64_t) {
    if (f && !done && f->size() == kOverhead + mac::kFcsSize) {
      flip_bit(*f, f->size() * 8 - 1);
      done = true;
    }
  });
  tx.close();
  CHECK(rx.stats().precise_fcs_dropped == 1);
  CHECK(rx.peer_closed());
}

TEST_CASE("a retransmitted PING is answered again") {
  World w(clean_world());
  auto rx = SapSocket::listen(w, {1, 7000});
  int dropped = 0;
  w.channel(1, 0).set_tap([&](std::optional<Bytes>& f, std::uint64_t) {
    if (f && f->size() > mac::kMinFrameSize && dropped <= static_cast<int>(kMacRetryLimit)) {
      f.reset();
      ++dropped;
    }
  });
  auto tx = SapSocket::connect(w, {0, 0}, {1, 7000});
  CHECK(tx.state() == SocketState::Connected);
  CHECK(dropped == static_cast<int>(kMacRetryLimit) + 1);
  CHECK(w.now() > std::chrono::milliseconds(2));
}

TEST_CASE("the direction ledger balances") {
  World w(clean_world(2e-4, 0.1, 3));
  auto rx = SapSocket::listen(w, {1, 7000});
  auto tx = SapSocket::connect(w, {0, 0}, {1, 7000});
  tx.set_mode(Mode::Approximate);
  for (int i = 0; i < 300; ++i) {
    tx.send(pattern(800, 0));
  }
  tx.set_mode(Mode::Precise);
  for (int i = 0; i < 30; ++i) {
    tx.send(pattern(800, 1));
  }
  tx.close();
  w.drain();
  for (auto [from, to] : {std::pair{0, 1}, std::pair{1, 0}}) {
    const auto& l = w.ledger(from, to);
    CHECK(l.on_air == l.accounted());
  }
}

TEST_CASE("checksum-neutral damage to precise data is caught by the FCS") {
  World w(clean_world());
  auto rx = SapSocket::listen(w, {1, 7000});
  auto tx = SapSocket::connect(w, {0, 0}, {1, 7000});
  // Payload bytes 0 and 2 are 0x00 and 0x3E. Flipping 0x02 in both adds and
  // subtracts the same amount in one 16-bit column: the Internet checksum holds.
  const std::size_t payload_at = mac::kHeaderSize + transport::kHeaderSize + kHeaderSize;
  bool done = false;
  w.channel(0, 1).set_tap([&](std::optional<Bytes>& f, std::uint64_t) {
    if (f && !done && f->size() > payload_at + 10) {
      flip_bit(*f, 8 * payload_at + 6);
      flip_bit(*f, 8 * (payload_at + 2) + 6);
      done = true;
    }
  });
  const Bytes data = pattern(64, 0);
  Bytes damaged = data;
  flip_bit(damaged, 6);
  flip_bit(damaged, 16 + 6);
  CHECK(transport::internet_checksum(damaged) == transport::internet_checksum(data));
  tx.send(data);
  CHECK(done);
  CHECK(rx.stats().precise_fcs_dropped == 1);
  CHECK(rx.recv(std::chrono::milliseconds(1)).payload == data);
}
