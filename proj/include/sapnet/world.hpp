#pragma once

// A simulated world: stations sharing one point-to-point medium, a simulated
// clock and an event queue. Everything is single-threaded and deterministic
// for a given channel seed. Worlds share nothing, so separate worlds may run on
// separate threads.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "sapnet/channel.hpp"
#include "sapnet/mac.hpp"
#include "sapnet/sim_clock.hpp"
#include "sapnet/transport.hpp"

namespace sapnet {

struct WorldConfig {
  channel::ChannelParams channel;  // channel.seed keys every RNG stream
  double bitrate_mbps = 54.0;
  double distance_m = 1.0;
  mac::Airtime airtime;
  std::size_t stations = 2;
  bool approx_rx_switch = true;  // receivers hand FCS-failing frames upward
};

struct Endpoint {
  std::size_t station = 0;
  std::uint16_t port = 0;

  bool operator==(const Endpoint&) const = default;
};

// A transport datagram that reached a bound port.
struct Arrival {
  std::size_t station;               // receiving station
  std::optional<std::size_t> from;   // sending station, if the source address resolves
  transport::LiteDatagram datagram;
  bool fcs_ok;
  SimTime at;
};

class PortHandler {
 public:
  virtual ~PortHandler() = default;
  virtual void on_datagram(const Arrival& arrival) = 0;
};

// Datagram accounting for one direction. After the event queue drains:
//   on_air = lost + mac_dropped + transport_dropped + unbound + delivered
struct DirectionLedger {
  std::uint64_t on_air = 0;
  std::uint64_t lost = 0;
  std::uint64_t mac_dropped = 0;
  std::uint64_t transport_dropped = 0;
  std::uint64_t unbound = 0;
  std::uint64_t delivered = 0;

  std::uint64_t accounted() const {
    return lost + mac_dropped + transport_dropped + unbound + delivered;
  }
};

class World {
 public:
  explicit World(WorldConfig config);
  World(const World&) = delete;
  World& operator=(const World&) = delete;

  const WorldConfig& config() const { return config_; }
  SimTime now() const { return clock_.now(); }
  SimClock& clock() { return clock_; }

  std::size_t station_count() const { return stations_.size(); }
  mac::Station& station(std::size_t index) { return *stations_.at(index); }
  const mac::Address& address(std::size_t index) const { return stations_.at(index)->addr; }
  std::optional<std::size_t> station_of(const mac::Address& addr) const;

  // Directional medium from -> to, created on first use.
  channel::LinkChannel& channel(std::size_t from, std::size_t to);

  // Event loop. Events run in (time, posting order).
  void post(SimTime at, std::function<void()> fn);
  // Runs events until `done` holds or the next event lies past `deadline`; in
  // the latter case the clock jumps to `deadline`. Returns done().
  bool run_until(const std::function<bool()>& done, SimTime deadline);
  // Runs every event due at or before `t`, then moves the clock to `t`.
  void advance_to(SimTime t);
  // Runs every pending event.
  void drain();
  bool idle() const { return events_.empty(); }

  // One MAC exchange; the receiver's upcall queues delivery as an event.
  mac::SendResult send_frame(std::size_t from, std::size_t to, const mac::MacFrame& frame,
                             unsigned retry_limit);

  // Port table. Throws std::invalid_argument when the port is taken.
  void bind(Endpoint at, PortHandler* handler);
  void unbind(Endpoint at, const PortHandler* handler);
  bool bound(Endpoint at) const { return ports_.count({at.station, at.port}) != 0; }
  std::uint16_t ephemeral_port(std::size_t station);

  const DirectionLedger& ledger(std::size_t from, std::size_t to) const;

  // Called once per send_frame with the frame and its MAC outcome;
  // result.tries is the number of times the frame went on the air.
  using AirObserver = std::function<void(std::size_t from, std::size_t to,
                                         const mac::MacFrame& frame, const mac::SendResult&)>;
  void set_air_observer(AirObserver observer) { air_observer_ = std::move(observer); }

 private:
  struct Event {
    SimTime at;
    std::uint64_t order;
    std::function<void()> fn;
  };

  void deliver(std::size_t station, std::size_t from, const mac::Accept& accept, SimTime at);
  DirectionLedger& ledger_mut(std::size_t from, std::size_t to);

  WorldConfig config_;
  SimClock clock_;
  std::vector<std::unique_ptr<mac::Station>> stations_;
  std::map<std::pair<std::size_t, std::size_t>, std::unique_ptr<channel::LinkChannel>> channels_;
  std::vector<DirectionLedger> ledgers_;
  std::map<std::pair<std::size_t, std::uint16_t>, PortHandler*> ports_;
  std::vector<std::uint16_t> next_ephemeral_;
  std::vector<Event> events_;  // min-heap on (at, order)
  std::uint64_t event_order_ = 0;
  std::optional<std::size_t> sending_from_;
  AirObserver air_observer_;
};

}  // namespace sapnet
