#include "sapnet/sap.hpp"

#include <algorithm>

namespace sapnet::sap {

const char* to_string(SapErrc code) {
  switch (code) {
    case SapErrc::ConnectTimeout: return "connect timed out";
    case SapErrc::PortInUse: return "port in use";
    case SapErrc::NotConnected: return "socket not connected";
    case SapErrc::SendTimeout: return "send retries exhausted";
    case SapErrc::TooLarge: return "datagram exceeds MTU";
    case SapErrc::InvalidArgument: return "invalid argument";
    case SapErrc::RecvTimeout: return "receive timed out";
    case SapErrc::PeerClosed: return "peer closed the connection";
  }
  return "unknown SAP error";
}

Bytes encode_message(const SapMessage& msg) {
  Bytes out;
  out.reserve(kHeaderSize + msg.payload.size());
  out.push_back(static_cast<std::uint8_t>(msg.type));
  out.push_back(msg.flags);
  put_u32(out, msg.seq);
  put_u16(out, 0);
  out.insert(out.end(), msg.payload.begin(), msg.payload.end());
  return out;
}

std::optional<SapMessage> decode_message(ByteView bytes) {
  if (bytes.size() < kHeaderSize) {
    return std::nullopt;
  }
  const std::uint8_t type = bytes[0];
  if (type < static_cast<std::uint8_t>(MsgType::Ping) ||
      type > static_cast<std::uint8_t>(MsgType::FinAck)) {
    return std::nullopt;
  }
  SapMessage msg;
  msg.type = static_cast<MsgType>(type);
  msg.flags = bytes[1];
  msg.seq = get_u32(bytes, 2);
  msg.payload.assign(bytes.begin() + kHeaderSize, bytes.end());
  return msg;
}

struct SapSocket::Impl final : PortHandler {
  Impl(World& w, Endpoint at, SapTimeouts t) : world(w), local(at), timeouts(t) {}
  ~Impl() override { release(); }

  void bind_port() {
    if (local.port == 0) {
      local.port = world.ephemeral_port(local.station);
    }
    if (world.bound(local)) {
      throw SapError(SapErrc::PortInUse);
    }
    world.bind(local, this);
    bound = true;
  }

  void release() {
    if (bound) {
      world.unbind(local, this);
      bound = false;
    }
  }

  bool from_peer(const Arrival& a) const {
    return peer && a.datagram.src_port == peer->port && (!a.from || *a.from == peer->station);
  }

  mac::SendResult transmit(const SapMessage& msg, std::uint16_t cscov, unsigned retry_limit) {
    transport::LiteDatagram dgram;
    dgram.src_port = local.port;
    dgram.dst_port = peer->port;
    dgram.cscov = cscov;
    dgram.payload = encode_message(msg);

    mac::MacFrame frame;
    frame.dst = world.address(peer->station);
    frame.src = world.address(local.station);
    frame.seq = world.station(local.station).next_seq++;
    frame.type = mac::FrameType::Data;
    frame.payload = transport::lite_encode(dgram);
    return world.send_frame(local.station, peer->station, frame, retry_limit);
  }

  void send_control(MsgType type, std::uint32_t seq) {
    transmit(SapMessage{type, 0, seq, {}}, 0, kMacRetryLimit);
  }

  void transmit_data(const SapMessage& msg, std::uint16_t cscov, unsigned retry_limit,
                     bool first) {
    const mac::SendResult r = transmit(msg, cscov, retry_limit);
    ++stats.data_transmissions;
    stats.data_on_air += r.tries;
    if (first && (r.tries > 1 || !r.delivered())) {
      ++stats.first_try_unacked;
    }
  }

  // Stop-and-wait: one outstanding sequenced datagram, retransmitted every
  // rto. After SendTimeout the sequence number is not consumed and the
  // connection should be treated as failed.
  void reliable_send(const SapMessage& msg, std::uint16_t cscov, unsigned retry_limit) {
    awaiting_ack = msg.seq;
    ack_seen = false;
    for (unsigned attempt = 0; attempt <= timeouts.retry_budget; ++attempt) {
      if (attempt > 0) {
        ++stats.sap_retransmissions;
      }
      transmit_data(msg, cscov, retry_limit, attempt == 0);
      if (world.run_until([this] { return ack_seen; }, world.now() + timeouts.rto)) {
        awaiting_ack.reset();
        ++next_tx_seq;
        return;
      }
    }
    awaiting_ack.reset();
    throw SapError(SapErrc::SendTimeout);
  }

  void on_data(const Arrival& a, SapMessage& msg) {
    if ((state != SocketState::Connected && state != SocketState::FinWait) || !from_peer(a)) {
      return;
    }
    RecvMeta meta{msg.seq, msg.approximate(), a.fcs_ok, a.at};
    if (!msg.sequenced()) {
      queue.push_back(Received{std::move(msg.payload), meta});
      return;
    }
    const auto delta = static_cast<std::int32_t>(msg.seq - next_rx_seq);
    if (delta == 0) {
      queue.push_back(Received{std::move(msg.payload), meta});
      ++next_rx_seq;
      send_control(MsgType::DataAck, msg.seq);
    } else if (delta < 0) {
      ++stats.duplicates;
      send_control(MsgType::DataAck, msg.seq);
    } else {
      ++stats.protocol_violations;
    }
  }

  void on_datagram(const Arrival& a) override {
    std::optional<SapMessage> msg = decode_message(a.datagram.payload);
    if (!msg) {
      ++stats.protocol_violations;
      return;
    }
    // Precise messages need an intact link frame: the Internet checksum misses
    // paired flips in the same bit column. The MAC retry covers the drop.
    if (!msg->approximate() && !a.fcs_ok) {
      ++stats.precise_fcs_dropped;
      return;
    }
    switch (msg->type) {
      case MsgType::Ping:
        if (state == SocketState::Listening) {
          if (!a.from) {
            return;
          }
          peer = Endpoint{*a.from, a.datagram.src_port};
          state = SocketState::Connected;
          send_control(MsgType::PingAck, msg->seq);
        } else if ((state == SocketState::Connected || state == SocketState::FinWait) &&
                   from_peer(a)) {
          send_control(MsgType::PingAck, msg->seq);
        }
        break;
      case MsgType::PingAck:
        if (state == SocketState::Connecting && from_peer(a)) {
          state = SocketState::Connected;
        }
        break;
      case MsgType::Data:
        on_data(a, *msg);
        break;
      case MsgType::DataAck:
        if (awaiting_ack && *awaiting_ack == msg->seq && from_peer(a)) {
          ack_seen = true;
        }
        break;
      case MsgType::Fin:
        if (from_peer(a)) {
          send_control(MsgType::FinAck, msg->seq);
          if (!peer_closed) {
            peer_closed = true;
            fin_time = a.at;
          }
        }
        break;
      case MsgType::FinAck:
        if (state == SocketState::FinWait && from_peer(a)) {
          fin_acked = true;
        }
        break;
    }
  }

  World& world;
  Endpoint local;
  std::optional<Endpoint> peer;
  SapTimeouts timeouts;
  SocketState state = SocketState::Closed;
  Mode mode = Mode::Precise;
  std::uint32_t next_tx_seq = 0;
  std::uint32_t next_rx_seq = 0;
  std::uint32_t next_approx_seq = 0;
  bool bound = false;

  std::deque<Received> queue;
  bool peer_closed = false;
  std::optional<SimTime> fin_time;

  std::optional<std::uint32_t> awaiting_ack;
  bool ack_seen = false;
  bool fin_acked = false;

  SocketStats stats;
};

SapSocket::SapSocket(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
SapSocket::SapSocket(SapSocket&&) noexcept = default;
SapSocket& SapSocket::operator=(SapSocket&&) noexcept = default;
SapSocket::~SapSocket() = default;

SapSocket SapSocket::connect(World& world, Endpoint local, Endpoint peer, SapTimeouts timeouts) {
  auto impl = std::make_unique<Impl>(world, local, timeouts);
  impl->bind_port();
  impl->peer = peer;
  impl->state = SocketState::Connecting;

  Impl& s = *impl;
  const SimTime deadline = world.now() + timeouts.connect_timeout;
  while (true) {
    s.send_control(MsgType::Ping, 0);
    const SimTime wake = std::min(world.now() + timeouts.rto, deadline);
    if (world.run_until([&s] { return s.state == SocketState::Connected; }, wake)) {
      break;
    }
    if (world.now() >= deadline) {
      s.state = SocketState::Closed;
      s.release();
      throw SapError(SapErrc::ConnectTimeout);
    }
  }
  return SapSocket(std::move(impl));
}

SapSocket SapSocket::listen(World& world, Endpoint local, SapTimeouts timeouts) {
  auto impl = std::make_unique<Impl>(world, local, timeouts);
  impl->bind_port();
  impl->state = SocketState::Listening;
  return SapSocket(std::move(impl));
}

void SapSocket::set_mode(Mode mode) {
  if (impl_->state != SocketState::Connected) {
    throw SapError(SapErrc::NotConnected);
  }
  impl_->mode = mode;
}

Mode SapSocket::mode() const { return impl_->mode; }
SocketState SapSocket::state() const { return impl_->state; }

void SapSocket::send(ByteView data, std::size_t precise_prefix_len) {
  Impl& s = *impl_;
  if (s.state != SocketState::Connected) {
    throw SapError(SapErrc::NotConnected);
  }
  if (data.size() > max_payload()) {
    throw SapError(SapErrc::TooLarge);
  }
  if (precise_prefix_len > data.size()) {
    throw SapError(SapErrc::InvalidArgument);
  }
  ++s.stats.data_sends;

  SapMessage msg;
  msg.type = MsgType::Data;
  msg.payload.assign(data.begin(), data.end());

  if (s.mode == Mode::Precise) {
    msg.seq = s.next_tx_seq;
    s.reliable_send(msg, 0, kMacRetryLimit);
    return;
  }
  if (precise_prefix_len == 0) {
    msg.flags = kFlagApproximate;
    msg.seq = s.next_approx_seq++;
    s.transmit_data(msg, kControlCoverage, 0, true);
    return;
  }
  msg.flags = kFlagApproximate | kFlagSequenced;
  msg.seq = s.next_tx_seq;
  s.reliable_send(msg, static_cast<std::uint16_t>(kControlCoverage + precise_prefix_len), 0);
}

Received SapSocket::recv(SimDuration timeout) {
  Impl& s = *impl_;
  if (s.state == SocketState::Closed || s.state == SocketState::Connecting) {
    throw SapError(SapErrc::NotConnected);
  }
  s.world.run_until([&s] { return !s.queue.empty() || s.peer_closed; }, s.world.now() + timeout);
  if (!s.queue.empty()) {
    Received r = std::move(s.queue.front());
    s.queue.pop_front();
    return r;
  }
  if (s.peer_closed) {
    throw SapError(SapErrc::PeerClosed);
  }
  throw SapError(SapErrc::RecvTimeout);
}

std::optional<Received> SapSocket::try_recv() {
  Impl& s = *impl_;
  if (s.queue.empty()) {
    return std::nullopt;
  }
  Received r = std::move(s.queue.front());
  s.queue.pop_front();
  return r;
}

void SapSocket::close() {
  if (!impl_) {
    return;
  }
  Impl& s = *impl_;
  if (s.state == SocketState::Closed) {
    return;
  }
  if (s.state == SocketState::Connected && !s.peer_closed) {
    s.state = SocketState::FinWait;
    s.fin_acked = false;
    const SimTime deadline = s.world.now() + s.timeouts.fin_timeout;
    do {
      s.send_control(MsgType::Fin, s.next_tx_seq);
      const SimTime wake = std::min(s.world.now() + s.timeouts.rto, deadline);
      if (s.world.run_until([&s] { return s.fin_acked; }, wake)) {
        break;
      }
    } while (s.world.now() < deadline);
  }
  s.state = SocketState::Closed;
  s.queue.clear();
  s.release();
}

bool SapSocket::peer_closed() const { return impl_->peer_closed; }
std::optional<SimTime> SapSocket::peer_fin_time() const { return impl_->fin_time; }
std::size_t SapSocket::queued() const { return impl_->queue.size(); }
const SocketStats& SapSocket::stats() const { return impl_->stats; }
World& SapSocket::world() const { return impl_->world; }
Endpoint SapSocket::local() const { return impl_->local; }
std::optional<Endpoint> SapSocket::peer() const { return impl_->peer; }
std::uint32_t SapSocket::next_tx_seq() const { return impl_->next_tx_seq; }
std::uint32_t SapSocket::next_expected_rx_seq() const { return impl_->next_rx_seq; }

std::size_t SapSocket::max_payload() const {
  return impl_->world.station(impl_->local.station).config.mtu - kControlCoverage;
}

}  // namespace sapnet::sap
