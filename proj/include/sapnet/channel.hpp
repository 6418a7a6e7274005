#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sapnet/bytes.hpp"
#include "sapnet/rng.hpp"

namespace sapnet::channel {

struct TableEntry {
  double bitrate_mbps;
  double distance_m;
  double value;
};

struct ChannelParams {
  std::vector<TableEntry> ber_table;         // per-bit flip probability, [0, 0.5]
  std::vector<TableEntry> frame_loss_table;  // per-frame loss probability, [0, 1]
  std::uint64_t seed = 0;
};

enum class ChannelErrc { EmptyTable, InvalidProbability, DuplicatePoint, ParseError };

class ChannelError : public std::runtime_error {
 public:
  ChannelError(ChannelErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ChannelErrc code() const { return code_; }

 private:
  ChannelErrc code_;
};

// Throws ChannelError when a probability is out of range or a grid point repeats.
void validate(const ChannelParams& params);

// Piecewise-linear in distance within each bitrate row, then linear across the
// two bracketing rows (bilinear on a full grid). Clamps outside the grid.
double interpolate(const std::vector<TableEntry>& table, double bitrate_mbps, double distance_m);

double ber_lookup(const ChannelParams& params, double bitrate_mbps, double distance_m);
double loss_lookup(const ChannelParams& params, double bitrate_mbps, double distance_m);

// Per-bit independent flips with probability `ber`, at most one RNG draw per
// flipped bit plus one (geometric gap sampling).
void flip_bits(Bytes& frame, double ber, Rng& rng);

// Loss first (one draw), then bit flips on survivors.
std::optional<Bytes> transmit(const ChannelParams& params, Rng& rng, ByteView frame,
                              double bitrate_mbps, double distance_m);

// Frozen table over {1, 11, 24, 48, 54} Mbps x {1, 2, 4, 6, 8, 10, 12.2} m.
ChannelParams default_calibration();

// `bitrate distance ber p_loss` per line, `#` starts a comment.
ChannelParams load_channel_file(const std::filesystem::path& path);
ChannelParams parse_channel_text(const std::string& text);
std::string format_channel_text(const ChannelParams& params);

// Uniform channel with a single grid point; every query clamps to it.
ChannelParams uniform_channel(double ber, double p_loss, std::uint64_t seed = 0);

// One direction of a point-to-point medium at a fixed (bitrate, distance).
// Probabilities are looked up once; the RNG stream is private to the direction
// so adding links elsewhere never perturbs it.
class LinkChannel {
 public:
  // Runs after the random impairment; may drop (reset) or edit the frame.
  // `index` counts frames carried in this direction, starting at 0.
  using Tap = std::function<void(std::optional<Bytes>& frame, std::uint64_t index)>;

  LinkChannel(const ChannelParams& params, double bitrate_mbps, double distance_m,
              std::uint64_t stream_id);

  std::optional<Bytes> carry(ByteView frame);

  void set_tap(Tap tap) { tap_ = std::move(tap); }

  double ber() const { return ber_; }
  double p_loss() const { return p_loss_; }
  double bitrate_mbps() const { return bitrate_mbps_; }
  std::uint64_t frames_carried() const { return carried_; }
  std::uint64_t frames_lost() const { return lost_; }

 private:
  double ber_;
  double p_loss_;
  double bitrate_mbps_;
  Rng rng_;
  Tap tap_;
  std::uint64_t carried_ = 0;
  std::uint64_t lost_ = 0;
};

}  // namespace sapnet::channel
