#include "sapnet/apps/tracker.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

namespace sapnet::apps {

namespace {

constexpr std::uint16_t kTrackerPort = 6001;
constexpr std::size_t kSetupSize = 20;
constexpr std::size_t kFixSize = 16;

double radians(double deg) { return deg * std::numbers::pi / 180.0; }
double degrees(double rad) { return rad * 180.0 / std::numbers::pi; }

void put_f64(Bytes& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }
double get_f64(ByteView in, std::size_t off) { return std::bit_cast<double>(get_u64(in, off)); }

double normal(Rng& rng) {
  const double u1 = rng.uniform_pos();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

bool valid(const TrackPoint& p) {
  return std::isfinite(p.t) && p.lat >= -90.0 && p.lat <= 90.0 && p.lon >= -180.0 &&
         p.lon <= 180.0;
}

double haversine_speed(const TrackPoint& a, const TrackPoint& b) {
  if (!(b.t > a.t)) {
    throw NonMonotonicTime();
  }
  const double dlat = radians(b.lat - a.lat);
  const double dlon = radians(b.lon - a.lon);
  const double h = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(radians(a.lat)) * std::cos(radians(b.lat)) * std::sin(dlon / 2) *
                       std::sin(dlon / 2);
  const double dist = 2.0 * kEarthRadiusM * std::asin(std::sqrt(std::min(1.0, h)));
  return dist / (b.t - a.t);
}

TrackerState tracker_update(TrackerState state, const TrackPoint& p, double v_max) {
  if (!valid(p)) {
    ++state.n_rejected;
    return state;
  }
  if (!state.last_accepted) {
    state.last_accepted = p;
    ++state.n_accepted;
    return state;
  }
  if (!(p.t > state.last_accepted->t)) {
    ++state.n_rejected;
    return state;
  }
  const double speed = haversine_speed(*state.last_accepted, p);
  if (!(speed <= v_max)) {
    ++state.n_rejected;
    return state;
  }
  ++state.n_accepted;
  ++state.n_samples;
  state.cma += (speed - state.cma) / static_cast<double>(state.n_samples);
  state.last_accepted = p;
  return state;
}

double ground_truth_speed(const std::vector<TrackPoint>& trace) {
  if (trace.size() < 2) {
    throw std::invalid_argument("trace needs at least two points");
  }
  double sum = 0;
  for (std::size_t i = 1; i < trace.size(); ++i) {
    sum += haversine_speed(trace[i - 1], trace[i]);
  }
  return sum / static_cast<double>(trace.size() - 1);
}

std::vector<TrackPoint> synthetic_trace(std::uint64_t seed, std::size_t points) {
  Rng rng(seed, 0x7472616365ull);
  std::vector<TrackPoint> trace;
  trace.reserve(points);
  TrackPoint p{42.3601, -71.0942, 0.0};
  double heading = 2.0 * std::numbers::pi * rng.uniform();
  for (std::size_t i = 0; i < points; ++i) {
    trace.push_back(p);
    heading += 0.25 * normal(rng);
    const double step = 0.8 + 1.4 * rng.uniform();
    const double dlat = step * std::cos(heading) / kEarthRadiusM;
    const double dlon = step * std::sin(heading) / (kEarthRadiusM * std::cos(radians(p.lat)));
    p.lat += degrees(dlat);
    p.lon += degrees(dlon);
    p.t += 1.0;
  }
  return trace;
}

std::vector<TrackPoint> read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open trace " + path.string());
  }
  std::string line;
  if (!std::getline(in, line) || line.rfind("lat,lon,t", 0) != 0) {
    throw std::runtime_error("trace must start with header lat,lon,t");
  }
  std::vector<TrackPoint> trace;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") {
      continue;
    }
    TrackPoint p;
    char c1 = 0;
    char c2 = 0;
    std::istringstream row(line);
    if (!(row >> p.lat >> c1 >> p.lon >> c2 >> p.t) || c1 != ',' || c2 != ',' || !valid(p)) {
      throw std::runtime_error("bad trace row: " + line);
    }
    if (!trace.empty() && !(p.t > trace.back().t)) {
      throw NonMonotonicTime();
    }
    trace.push_back(p);
  }
  return trace;
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<TrackPoint>& trace) {
  std::ofstream out(path);
  out << "lat,lon,t\n";
  char buf[96];
  for (const auto& p : trace) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.lat, p.lon, p.t);
    out << buf;
  }
  if (!out) {
    throw std::runtime_error("cannot write trace " + path.string());
  }
}

TrackerReport tracker_run(const std::vector<TrackPoint>& trace, SimDuration send_interval,
                          World& world, sap::Mode mode) {
  if (trace.size() < 2) {
    throw std::invalid_argument("trace needs at least two points");
  }
  const double t0 = trace.front().t;
  const double period = (trace.back().t - t0) / static_cast<double>(trace.size() - 1);

  auto rx = sap::SapSocket::listen(world, Endpoint{1, kTrackerPort});
  auto tx = sap::SapSocket::connect(world, Endpoint{0, 0}, Endpoint{1, kTrackerPort});

  Bytes setup;
  put_u32(setup, static_cast<std::uint32_t>(trace.size()));
  put_f64(setup, t0);
  put_f64(setup, period);
  tx.send(setup);
  tx.set_mode(mode);
  const SimTime start = world.now();
  for (std::size_t i = 0; i < trace.size(); ++i) {
    world.advance_to(start + send_interval * static_cast<SimDuration::rep>(i));
    Bytes fix;
    put_f64(fix, trace[i].lat);
    put_f64(fix, trace[i].lon);
    tx.send(fix);
  }
  tx.close();

  const sap::Received hdr = rx.recv(std::chrono::seconds(1));
  if (hdr.meta.approximate || hdr.payload.size() != kSetupSize) {
    throw std::runtime_error("tracker setup message malformed");
  }
  const std::uint32_t count = get_u32(hdr.payload, 0);
  const double rx_t0 = get_f64(hdr.payload, 4);
  const double rx_period = get_f64(hdr.payload, 12);

  TrackerState state;
  std::uint64_t received = 0;
  std::vector<double> arrivals;
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
    const std::uint64_t index = r.meta.approximate ? r.meta.seq : r.meta.seq - 1u;
    if (index >= count || r.payload.size() != kFixSize) {
      continue;
    }
    ++received;
    arrivals.push_back(to_seconds(r.meta.arrival));
    const TrackPoint p{get_f64(r.payload, 0), get_f64(r.payload, 8),
                       rx_t0 + rx_period * static_cast<double>(index)};
    state = tracker_update(state, p);
  }
  rx.close();
  state.n_missing = count - std::min<std::uint64_t>(received, count);

  TrackerReport report;
  report.state = state;
  report.cma = state.cma;
  report.ground_truth = ground_truth_speed(trace);
  report.rel_error = std::abs(state.cma - report.ground_truth) / report.ground_truth;
  if (arrivals.size() >= 2) {
    std::vector<double> gaps;
    for (std::size_t i = 1; i < arrivals.size(); ++i) {
      gaps.push_back(arrivals[i] - arrivals[i - 1]);
    }
    double mean = 0;
    for (double g : gaps) {
      mean += g;
    }
    mean /= static_cast<double>(gaps.size());
    double var = 0;
    for (double g : gaps) {
      var += (g - mean) * (g - mean);
    }
    report.interarrival_mean = mean;
    report.interarrival_var = var / static_cast<double>(gaps.size());
  }
  return report;
}

}  // namespace sapnet::apps
