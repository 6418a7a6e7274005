#pragma once

// Tracker: streams GPS fixes and keeps a cumulative moving average of speed,
// discarding fixes that imply an implausible speed.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sapnet/rng.hpp"
#include "sapnet/sap.hpp"
#include "sapnet/world.hpp"

namespace sapnet::apps {

inline constexpr double kEarthRadiusM = 6371000.0;
// Average pace of the 100 m world record.
inline constexpr double kDefaultVMax = 10.44;

struct TrackPoint {
  double lat = 0;  // degrees
  double lon = 0;  // degrees
  double t = 0;    // seconds

  bool operator==(const TrackPoint&) const = default;
};

bool valid(const TrackPoint& p);

class NonMonotonicTime : public std::invalid_argument {
 public:
  NonMonotonicTime() : std::invalid_argument("track point times must strictly increase") {}
};

// Great-circle distance over elapsed time. Throws NonMonotonicTime unless b.t > a.t.
double haversine_speed(const TrackPoint& a, const TrackPoint& b);

struct TrackerState {
  double cma = 0;
  std::uint64_t n_accepted = 0;  // includes the first, speedless point
  std::uint64_t n_rejected = 0;
  std::uint64_t n_missing = 0;   // filled in by tracker_run
  std::uint64_t n_samples = 0;   // speed samples folded into cma
  std::optional<TrackPoint> last_accepted;

  bool operator==(const TrackerState&) const = default;
};

// Invalid coordinates, non-increasing time and speeds above v_max are rejected
// without touching cma or last_accepted.
TrackerState tracker_update(TrackerState state, const TrackPoint& p, double v_max = kDefaultVMax);

// Mean of per-segment speeds over the whole trace.
double ground_truth_speed(const std::vector<TrackPoint>& trace);

// Walking trace at 1 Hz: random-walk heading, speed uniform in [0.8, 2.2] m/s.
std::vector<TrackPoint> synthetic_trace(std::uint64_t seed, std::size_t points = 945);

std::vector<TrackPoint> read_trace_csv(const std::filesystem::path& path);
void write_trace_csv(const std::filesystem::path& path, const std::vector<TrackPoint>& trace);

struct TrackerReport {
  double cma = 0;
  double ground_truth = 0;
  double rel_error = 0;  // |cma - ground_truth| / ground_truth
  double interarrival_mean = 0;  // seconds
  double interarrival_var = 0;   // seconds^2, population variance
  TrackerState state;
};

// Station 0 sends one 16-byte datagram (lat, lon as big-endian doubles) per
// point every `send_interval`; station 1 timestamps fixes from the trace's
// sampling period, which travels precisely ahead of the data.
TrackerReport tracker_run(const std::vector<TrackPoint>& trace, SimDuration send_interval,
                          World& world, sap::Mode mode);

}  // namespace sapnet::apps
