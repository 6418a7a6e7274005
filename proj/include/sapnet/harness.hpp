#pragma once

// Experiment sweeps over bitrate x distance x mode, one fresh world per trial,
// with sorted, deterministic CSV output.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sapnet/channel.hpp"
#include "sapnet/sap.hpp"

namespace sapnet::harness {

enum class App { Streamer, Xfer, Tracker };

const char* to_string(App app);
const char* to_string(sap::Mode mode);
App parse_app(const std::string& s);
sap::Mode parse_mode(const std::string& s);

struct ExperimentSpec {
  App app = App::Streamer;
  std::vector<double> bitrates{54.0};
  std::vector<double> distances{1.0};
  std::vector<sap::Mode> modes{sap::Mode::Approximate};
  unsigned trials = 1;
  std::uint64_t payload_bytes = 1ull << 20;
  std::uint64_t seed = 1;
  std::optional<channel::ChannelParams> channel;  // default calibration otherwise
  double send_interval_ms = 5.0;                  // tracker only
  std::optional<std::filesystem::path> trace;     // tracker only; synthetic otherwise
  unsigned jobs = 0;                              // 0: hardware concurrency
};

// Throws std::invalid_argument.
void validate(const ExperimentSpec& spec);

// key = value per line, '#' starts a comment, lists comma-separated. Keys:
// app, bitrates, distances, modes, trials, bytes, seed, channel, interval_ms,
// trace, jobs. Relative channel and trace paths resolve against `base_dir`.
ExperimentSpec parse_spec(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentSpec load_spec(const std::filesystem::path& path);

struct ExperimentRecord {
  App app;
  double bitrate;
  double distance;
  sap::Mode mode;
  unsigned trial;
  std::string metric;
  double value;
};

// Seed for one (grid point, trial); independent of mode so that precise and
// approximate runs see the same channel draws where their traffic coincides.
std::uint64_t trial_seed(std::uint64_t seed, std::size_t grid_index, unsigned trial);

// Sorted by (app, bitrate, distance, mode, trial, metric). A trial that throws
// yields a single `error` = 1 record.
std::vector<ExperimentRecord> run_experiment(const ExperimentSpec& spec);

void sort_records(std::vector<ExperimentRecord>& records);
void write_csv(std::ostream& out, const std::vector<ExperimentRecord>& records);
std::string to_csv(const std::vector<ExperimentRecord>& records);

double mean(std::span<const double> v);
double median(std::span<const double> v);
// Sample standard deviation over sqrt(n); 0 for a single value.
double standard_error(std::span<const double> v);
double geometric_mean(std::span<const double> v);

struct SummaryRow {
  App app;
  double bitrate;
  double distance;
  sap::Mode mode;
  std::string metric;
  std::size_t n;
  double mean;
  double median;
  double stderr_;
};

struct SpeedupRow {
  double bitrate;
  double distance;
  double speedup;  // mean precise / mean approximate transfer_time
};

struct Summary {
  std::vector<SummaryRow> rows;
  std::vector<SpeedupRow> speedups;
  std::optional<double> speedup_geomean;
};

Summary summarize(const std::vector<ExperimentRecord>& records);
void write_summary(std::ostream& out, const Summary& summary);

}  // namespace sapnet::harness
