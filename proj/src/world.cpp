#include "sapnet/world.hpp"

#include <algorithm>
#include <stdexcept>

namespace sapnet {

namespace {

constexpr std::uint16_t kFirstEphemeralPort = 49152;

bool later(const auto& a, const auto& b) {
  return a.at != b.at ? a.at > b.at : a.order > b.order;
}

}  // namespace

World::World(WorldConfig config) : config_(std::move(config)) {
  if (config_.stations == 0) {
    throw std::invalid_argument("world needs at least one station");
  }
  if (!(config_.bitrate_mbps > 0.0)) {
    throw std::invalid_argument("bitrate must be positive");
  }
  channel::validate(config_.channel);
  for (std::size_t i = 0; i < config_.stations; ++i) {
    auto st = std::make_unique<mac::Station>();
    // Locally administered unicast addresses 02:00:00:00:xx:yy.
    st->addr = {0x02, 0x00, 0x00, 0x00, static_cast<std::uint8_t>((i + 1) >> 8),
                static_cast<std::uint8_t>(i + 1)};
    st->config.bitrate_mbps = config_.bitrate_mbps;
    st->config.airtime = config_.airtime;
    st->config.approx_rx_switch = config_.approx_rx_switch;
    st->upcall = [this, i](const mac::Accept& accept) {
      deliver(i, sending_from_.value_or(i), accept, clock_.now());
    };
    stations_.push_back(std::move(st));
  }
  ledgers_.resize(config_.stations * config_.stations);
  next_ephemeral_.assign(config_.stations, kFirstEphemeralPort);
}

std::optional<std::size_t> World::station_of(const mac::Address& addr) const {
  for (std::size_t i = 0; i < stations_.size(); ++i) {
    if (stations_[i]->addr == addr) {
      return i;
    }
  }
  return std::nullopt;
}

channel::LinkChannel& World::channel(std::size_t from, std::size_t to) {
  auto& slot = channels_[{from, to}];
  if (!slot) {
    // Stream id depends only on the direction, never on creation order.
    const std::uint64_t stream = (std::uint64_t{from} << 32) | to;
    slot = std::make_unique<channel::LinkChannel>(config_.channel, config_.bitrate_mbps,
                                                  config_.distance_m, stream);
  }
  return *slot;
}

void World::post(SimTime at, std::function<void()> fn) {
  events_.push_back(Event{at, event_order_++, std::move(fn)});
  std::push_heap(events_.begin(), events_.end(), [](const Event& a, const Event& b) {
    return later(a, b);
  });
}

bool World::run_until(const std::function<bool()>& done, SimTime deadline) {
  while (!done()) {
    if (events_.empty() || events_.front().at > deadline) {
      clock_.advance_to(deadline);
      return done();
    }
    std::pop_heap(events_.begin(), events_.end(),
                  [](const Event& a, const Event& b) { return later(a, b); });
    Event ev = std::move(events_.back());
    events_.pop_back();
    clock_.advance_to(ev.at);
    ev.fn();
  }
  return true;
}

void World::advance_to(SimTime t) {
  run_until([] { return false; }, t);
}

void World::drain() {
  while (!events_.empty()) {
    run_until([] { return false; }, events_.front().at);
  }
}

mac::SendResult World::send_frame(std::size_t from, std::size_t to, const mac::MacFrame& frame,
                                  unsigned retry_limit) {
  mac::Station& sender = station(from);
  mac::Station& receiver = station(to);
  channel::LinkChannel& forward = channel(from, to);
  channel::LinkChannel& reverse = channel(to, from);

  const auto on_air_before = sender.counters.data_on_air;
  const auto lost_before = forward.frames_lost();
  std::uint64_t drops_before = 0;
  for (auto d : receiver.counters.drops) {
    drops_before += d;
  }

  mac::MacConfig config = sender.config;
  config.retry_limit = retry_limit;
  mac::Link link{forward, reverse, sender, receiver};
  sending_from_ = from;
  const mac::SendResult result = mac::send_over_link(frame, config, link, clock_);
  sending_from_.reset();

  std::uint64_t drops_after = 0;
  for (auto d : receiver.counters.drops) {
    drops_after += d;
  }
  DirectionLedger& led = ledger_mut(from, to);
  led.on_air += sender.counters.data_on_air - on_air_before;
  led.lost += forward.frames_lost() - lost_before;
  led.mac_dropped += drops_after - drops_before;

  if (air_observer_) {
    air_observer_(from, to, frame, result);
  }
  return result;
}

void World::deliver(std::size_t station, std::size_t from, const mac::Accept& accept, SimTime at) {
  // Decoding happens when the event runs so handlers observe arrival order.
  post(at, [this, station, from, frame = accept.frame, fcs_ok = accept.fcs_ok, at] {
    DirectionLedger& led = ledger_mut(from, station);
    if (frame.payload.size() < transport::kHeaderSize) {
      ++led.transport_dropped;
      return;
    }
    transport::DecodeResult decoded = transport::lite_decode(frame.payload);
    auto* dgram = std::get_if<transport::LiteDatagram>(&decoded);
    if (dgram == nullptr) {
      ++led.transport_dropped;
      return;
    }
    auto it = ports_.find({station, dgram->dst_port});
    if (it == ports_.end()) {
      ++led.unbound;
      return;
    }
    ++led.delivered;
    it->second->on_datagram(Arrival{station, station_of(frame.src), std::move(*dgram), fcs_ok, at});
  });
}

void World::bind(Endpoint at, PortHandler* handler) {
  auto [it, inserted] = ports_.try_emplace({at.station, at.port}, handler);
  if (!inserted) {
    throw std::invalid_argument("port already bound");
  }
}

void World::unbind(Endpoint at, const PortHandler* handler) {
  auto it = ports_.find({at.station, at.port});
  if (it != ports_.end() && it->second == handler) {
    ports_.erase(it);
  }
}

std::uint16_t World::ephemeral_port(std::size_t station) {
  std::uint16_t& next = next_ephemeral_.at(station);
  for (int guard = 0; guard < 16384; ++guard) {
    const std::uint16_t candidate = next;
    next = next == 65535 ? kFirstEphemeralPort : static_cast<std::uint16_t>(next + 1);
    if (!bound({station, candidate})) {
      return candidate;
    }
  }
  throw std::runtime_error("ephemeral ports exhausted");
}

const DirectionLedger& World::ledger(std::size_t from, std::size_t to) const {
  return ledgers_.at(from * stations_.size() + to);
}

DirectionLedger& World::ledger_mut(std::size_t from, std::size_t to) {
  return ledgers_.at(from * stations_.size() + to);
}

}  // namespace sapnet
