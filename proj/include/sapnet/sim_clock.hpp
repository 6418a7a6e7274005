#pragma once

#include <chrono>
#include <cmath>

namespace sapnet {

// Simulated time. Nanosecond ticks keep airtime sums exact; configuration is
// expressed in (fractional) microseconds.
using SimDuration = std::chrono::nanoseconds;
using SimTime = std::chrono::nanoseconds;  // since world start

inline SimDuration micros(double us) {
  return SimDuration(static_cast<SimDuration::rep>(std::llround(us * 1000.0)));
}

inline double to_seconds(SimDuration d) { return std::chrono::duration<double>(d).count(); }
inline double to_micros(SimDuration d) {
  return std::chrono::duration<double, std::micro>(d).count();
}

class SimClock {
 public:
  SimTime now() const { return now_; }
  void advance(SimDuration d) { now_ += d; }
  void advance_to(SimTime t) {
    if (t > now_) {
      now_ = t;
    }
  }

 private:
  SimTime now_{0};
};

}  // namespace sapnet
