#include "sapnet/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

#include "sapnet/apps/streamer.hpp"
#include "sapnet/apps/tracker.hpp"
#include "sapnet/apps/xfer.hpp"
#include "sapnet/rng.hpp"
#include "sapnet/world.hpp"

namespace sapnet::harness {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) {
      throw std::invalid_argument("empty list item in '" + s + "'");
    }
    out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& s) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || !std::isfinite(v)) {
    throw std::invalid_argument(key + ": not a number: '" + s + "'");
  }
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& s) {
  std::size_t used = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(s, &used, 0);
  } catch (const std::exception&) {
    used = 0;
  }
  if (s.empty() || s.front() == '-' || used != s.size()) {
    throw std::invalid_argument(key + ": not an unsigned integer: '" + s + "'");
  }
  return v;
}

std::vector<double> parse_doubles(const std::string& key, const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) {
    out.push_back(parse_double(key, item));
  }
  return out;
}

struct Task {
  std::size_t grid_index;
  double bitrate;
  double distance;
  sap::Mode mode;
  unsigned trial;
};

using Metrics = std::vector<std::pair<std::string, double>>;

Bytes random_file(std::uint64_t seed, std::uint64_t size) {
  Rng rng(seed, 0x66696c65ull);
  Bytes out(size);
  for (std::size_t i = 0; i < out.size(); i += 8) {
    const std::uint64_t v = rng.next_u64();
    for (std::size_t j = 0; j < 8 && i + j < out.size(); ++j) {
      out[i + j] = static_cast<std::uint8_t>(v >> (8 * j));
    }
  }
  return out;
}

Metrics run_streamer(const ExperimentSpec& spec, const Task& task, std::uint64_t seed, World& world) {
  apps::StreamerConfig cfg;
  cfg.seed32 = static_cast<std::uint32_t>(seed);
  cfg.total_bytes = spec.payload_bytes;
  cfg.mode = task.mode;
  const auto r = apps::streamer_run(cfg, world);
  return {{"damaged_frame_fraction", r.damaged_frame_fraction},
          {"ber_in_damaged", r.ber_in_damaged},
          {"ber_overall", r.ber_overall},
          {"flr", r.flr},
          {"flr_b", r.flr_b},
          {"correct_bit_fraction", r.correct_bit_fraction},
          {"retransmit_fraction", r.retransmit_fraction}};
}

Metrics run_xfer(const ExperimentSpec& spec, const Task& task, std::uint64_t seed, World& world) {
  apps::ContentStore store;
  store.put("/file.jpg", random_file(seed, spec.payload_bytes));
  apps::XferRequest req;
  req.path = "/file.jpg";
  req.approx_mime_types = {"image/jpeg"};
  req.sap_port = 9000;
  req.force_precise = task.mode == sap::Mode::Precise;
  const auto out = apps::xfer_session(world, store, req);
  if (out.response.status != 200) {
    throw std::runtime_error("transfer failed");
  }
  return {{"transfer_time", to_seconds(out.transfer_time)}};
}

Metrics run_tracker(const ExperimentSpec& spec, const Task& task, std::uint64_t seed, World& world) {
  const auto trace = spec.trace ? apps::read_trace_csv(*spec.trace) : apps::synthetic_trace(seed);
  const auto r = apps::tracker_run(trace, micros(spec.send_interval_ms * 1000.0), world, task.mode);
  return {{"cma", r.cma},
          {"rel_error", r.rel_error},
          {"interarrival_mean", r.interarrival_mean},
          {"interarrival_var", r.interarrival_var}};
}

std::vector<ExperimentRecord> run_task(const ExperimentSpec& spec, const Task& task) {
  const std::uint64_t seed = trial_seed(spec.seed, task.grid_index, task.trial);
  std::vector<ExperimentRecord> out;
  auto record = [&](const std::string& metric, double value) {
    out.push_back({spec.app, task.bitrate, task.distance, task.mode, task.trial, metric, value});
  };
  try {
    WorldConfig cfg;
    cfg.channel = spec.channel ? *spec.channel : channel::default_calibration();
    cfg.channel.seed = seed;
    cfg.bitrate_mbps = task.bitrate;
    cfg.distance_m = task.distance;
    World world(cfg);
    Metrics metrics;
    switch (spec.app) {
      case App::Streamer: metrics = run_streamer(spec, task, seed, world); break;
      case App::Xfer: metrics = run_xfer(spec, task, seed, world); break;
      case App::Tracker: metrics = run_tracker(spec, task, seed, world); break;
    }
    for (const auto& [name, value] : metrics) {
      if (!std::isfinite(value)) {
        throw std::runtime_error("non-finite metric " + name);
      }
      record(name, value);
    }
  } catch (const std::exception&) {
    out.clear();
    record("error", 1.0);
  }
  return out;
}

auto sort_key(const ExperimentRecord& r) {
  return std::make_tuple(static_cast<int>(r.app), r.bitrate, r.distance,
                         std::string_view(to_string(r.mode)), r.trial, std::string_view(r.metric));
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace

const char* to_string(App app) {
  switch (app) {
    case App::Streamer: return "streamer";
    case App::Xfer: return "xfer";
    case App::Tracker: return "tracker";
  }
  return "streamer";
}

const char* to_string(sap::Mode mode) {
  return mode == sap::Mode::Precise ? "precise" : "approximate";
}

App parse_app(const std::string& s) {
  if (s == "streamer") return App::Streamer;
  if (s == "xfer") return App::Xfer;
  if (s == "tracker") return App::Tracker;
  throw std::invalid_argument("unknown app '" + s + "'");
}

sap::Mode parse_mode(const std::string& s) {
  if (s == "precise") return sap::Mode::Precise;
  if (s == "approximate") return sap::Mode::Approximate;
  throw std::invalid_argument("unknown mode '" + s + "'");
}

void validate(const ExperimentSpec& spec) {
  if (spec.bitrates.empty() || spec.distances.empty() || spec.modes.empty()) {
    throw std::invalid_argument("bitrates, distances and modes must be non-empty");
  }
  if (spec.trials == 0) {
    throw std::invalid_argument("trials must be at least 1");
  }
  for (double b : spec.bitrates) {
    if (!(b > 0)) throw std::invalid_argument("bitrates must be positive");
  }
  for (double d : spec.distances) {
    if (!(d >= 0)) throw std::invalid_argument("distances must be non-negative");
  }
  if (spec.app == App::Streamer && (spec.payload_bytes == 0 || spec.payload_bytes % 1024 != 0)) {
    throw std::invalid_argument("streamer bytes must be a positive multiple of 1024");
  }
  if (spec.app == App::Xfer && spec.payload_bytes == 0) {
    throw std::invalid_argument("xfer bytes must be positive");
  }
  if (!(spec.send_interval_ms >= 0)) {
    throw std::invalid_argument("interval_ms must be non-negative");
  }
  if (spec.channel) {
    channel::validate(*spec.channel);
  }
}

ExperimentSpec parse_spec(const std::string& text, const std::filesystem::path& base_dir) {
  ExperimentSpec spec;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.resize(hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "app") {
      spec.app = parse_app(value);
    } else if (key == "bitrates") {
      spec.bitrates = parse_doubles(key, value);
    } else if (key == "distances") {
      spec.distances = parse_doubles(key, value);
    } else if (key == "modes") {
      spec.modes.clear();
      for (const auto& m : split_list(value)) {
        spec.modes.push_back(parse_mode(m));
      }
    } else if (key == "trials") {
      spec.trials = static_cast<unsigned>(parse_u64(key, value));
    } else if (key == "bytes") {
      spec.payload_bytes = parse_u64(key, value);
    } else if (key == "seed") {
      spec.seed = parse_u64(key, value);
    } else if (key == "channel") {
      spec.channel = channel::load_channel_file(resolve(value));
    } else if (key == "interval_ms") {
      spec.send_interval_ms = parse_double(key, value);
    } else if (key == "trace") {
      spec.trace = resolve(value);
    } else if (key == "jobs") {
      spec.jobs = static_cast<unsigned>(parse_u64(key, value));
    } else {
      throw std::invalid_argument("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  validate(spec);
  return spec;
}

ExperimentSpec load_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open config " + path.string());
  }
  std::stringstream text;
  text << in.rdbuf();
  return parse_spec(text.str(), path.parent_path());
}

std::uint64_t trial_seed(std::uint64_t seed, std::size_t grid_index, unsigned trial) {
  return mix64(seed ^ mix64((static_cast<std::uint64_t>(grid_index) << 32) | trial));
}

std::vector<ExperimentRecord> run_experiment(const ExperimentSpec& spec) {
  validate(spec);
  std::vector<Task> tasks;
  for (std::size_t b = 0; b < spec.bitrates.size(); ++b) {
    for (std::size_t d = 0; d < spec.distances.size(); ++d) {
      for (sap::Mode mode : spec.modes) {
        for (unsigned t = 0; t < spec.trials; ++t) {
          tasks.push_back({b * spec.distances.size() + d, spec.bitrates[b], spec.distances[d], mode, t});
        }
      }
    }
  }

  unsigned jobs = spec.jobs ? spec.jobs : std::max(1u, std::thread::hardware_concurrency());
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, tasks.size()));
  std::vector<std::vector<ExperimentRecord>> results(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      results[i] = run_task(spec, tasks[i]);
    }
  };
  std::vector<std::thread> pool;
  for (unsigned j = 1; j < jobs; ++j) {
    pool.emplace_back(worker);
  }
  worker();
  for (auto& t : pool) {
    t.join();
  }

  std::vector<ExperimentRecord> records;
  for (auto& r : results) {
    records.insert(records.end(), r.begin(), r.end());
  }
  sort_records(records);
  return records;
}

void sort_records(std::vector<ExperimentRecord>& records) {
  std::sort(records.begin(), records.end(),
            [](const ExperimentRecord& a, const ExperimentRecord& b) { return sort_key(a) < sort_key(b); });
}

void write_csv(std::ostream& out, const std::vector<ExperimentRecord>& records) {
  out << "app,bitrate,distance,mode,trial,metric,value\n";
  for (const auto& r : records) {
    out << to_string(r.app) << ',' << fmt("%g", r.bitrate) << ',' << fmt("%g", r.distance) << ','
        << to_string(r.mode) << ',' << r.trial << ',' << r.metric << ',' << fmt("%.10g", r.value)
        << '\n';
  }
}

std::string to_csv(const std::vector<ExperimentRecord>& records) {
  std::ostringstream out;
  write_csv(out, records);
  return out.str();
}

double mean(std::span<const double> v) {
  if (v.empty()) {
    throw std::invalid_argument("mean of an empty set");
  }
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double median(std::span<const double> v) {
  if (v.empty()) {
    throw std::invalid_argument("median of an empty set");
  }
  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end());
  const std::size_t n = s.size();
  return n % 2 ? s[n / 2] : (s[n / 2 - 1] + s[n / 2]) / 2.0;
}

double standard_error(std::span<const double> v) {
  if (v.size() < 2) {
    return 0.0;
  }
  const double m = mean(v);
  double ss = 0;
  for (double x : v) {
    ss += (x - m) * (x - m);
  }
  const double n = static_cast<double>(v.size());
  return std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
}

double geometric_mean(std::span<const double> v) {
  if (v.empty()) {
    throw std::invalid_argument("geometric mean of an empty set");
  }
  double logs = 0;
  for (double x : v) {
    if (!(x > 0)) {
      throw std::invalid_argument("geometric mean needs positive values");
    }
    logs += std::log(x);
  }
  return std::exp(logs / static_cast<double>(v.size()));
}

Summary summarize(const std::vector<ExperimentRecord>& records) {
  using Key = std::tuple<int, double, double, std::string, std::string>;
  std::map<Key, std::vector<double>> groups;
  for (const auto& r : records) {
    groups[{static_cast<int>(r.app), r.bitrate, r.distance, to_string(r.mode), r.metric}].push_back(r.value);
  }
  Summary s;
  std::map<std::pair<double, double>, std::pair<std::optional<double>, std::optional<double>>> times;
  for (const auto& [key, values] : groups) {
    const auto& [app, bitrate, distance, mode, metric] = key;
    SummaryRow row{static_cast<App>(app), bitrate, distance, parse_mode(mode), metric,
                   values.size(), mean(values), median(values), standard_error(values)};
    s.rows.push_back(row);
    if (row.app == App::Xfer && metric == "transfer_time") {
      auto& slot = times[{bitrate, distance}];
      (row.mode == sap::Mode::Precise ? slot.first : slot.second) = row.mean;
    }
  }
  std::vector<double> ratios;
  for (const auto& [point, pair] : times) {
    if (pair.first && pair.second && *pair.second > 0) {
      s.speedups.push_back({point.first, point.second, *pair.first / *pair.second});
      ratios.push_back(s.speedups.back().speedup);
    }
  }
  if (!ratios.empty()) {
    s.speedup_geomean = geometric_mean(ratios);
  }
  return s;
}

void write_summary(std::ostream& out, const Summary& summary) {
  out << "app,bitrate,distance,mode,metric,n,mean,median,stderr\n";
  for (const auto& r : summary.rows) {
    out << to_string(r.app) << ',' << fmt("%g", r.bitrate) << ',' << fmt("%g", r.distance) << ','
        << to_string(r.mode) << ',' << r.metric << ',' << r.n << ',' << fmt("%.10g", r.mean) << ','
        << fmt("%.10g", r.median) << ',' << fmt("%.10g", r.stderr_) << '\n';
  }
  for (const auto& sp : summary.speedups) {
    out << "xfer," << fmt("%g", sp.bitrate) << ',' << fmt("%g", sp.distance) << ",-,speedup,1,"
        << fmt("%.10g", sp.speedup) << ",,\n";
  }
  if (summary.speedup_geomean) {
    out << "xfer,-,-,-,speedup_geomean,1," << fmt("%.10g", *summary.speedup_geomean) << ",,\n";
  }
}

}  // namespace sapnet::harness
