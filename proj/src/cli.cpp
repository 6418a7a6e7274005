#include "sapnet/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

#include "sapnet/harness.hpp"

namespace sapnet {

namespace {

struct RunFlags {
  std::vector<double> bitrates{54.0};
  std::vector<double> distances{1.0};
  std::string mode = "both";
  unsigned trials = 1;
  std::uint64_t seed = 1;
  std::optional<std::uint64_t> bytes;
  std::string channel;
  std::string trace;
  double interval_ms = 5.0;
};

struct CommonFlags {
  std::string out;
  std::string summary;
  unsigned jobs = 0;
};

void add_run_flags(CLI::App& cmd, RunFlags& f) {
  cmd.add_option("--bitrate", f.bitrates, "Bitrates in Mbps (repeatable or comma-separated)")
      ->delimiter(',')
      ->capture_default_str();
  cmd.add_option("--distance", f.distances, "Distances in meters")->delimiter(',')->capture_default_str();
  cmd.add_option("--mode", f.mode, "precise, approximate or both")
      ->check(CLI::IsMember({"precise", "approximate", "both"}))
      ->capture_default_str();
  cmd.add_option("--trials", f.trials, "Trials per grid point")->check(CLI::PositiveNumber)->capture_default_str();
  cmd.add_option("--seed", f.seed, "Experiment seed")->capture_default_str();
  cmd.add_option("--bytes", f.bytes, "Payload bytes per trial");
  cmd.add_option("--channel", f.channel, "Channel calibration file")->check(CLI::ExistingFile);
}

void add_common_flags(CLI::App& cmd, CommonFlags& c) {
  cmd.add_option("--out", c.out, "CSV output file (default: standard output)");
  cmd.add_option("--summary", c.summary, "Also write mean/median/stderr summary CSV here");
  cmd.add_option("--jobs", c.jobs, "Worker threads (0: all cores)");
}

harness::ExperimentSpec spec_from(harness::App app, const RunFlags& f) {
  harness::ExperimentSpec spec;
  spec.app = app;
  spec.bitrates = f.bitrates;
  spec.distances = f.distances;
  if (f.mode == "both") {
    spec.modes = {sap::Mode::Precise, sap::Mode::Approximate};
  } else {
    spec.modes = {harness::parse_mode(f.mode)};
  }
  spec.trials = f.trials;
  spec.seed = f.seed;
  switch (app) {
    case harness::App::Streamer: spec.payload_bytes = f.bytes.value_or(10ull << 20); break;
    case harness::App::Xfer: spec.payload_bytes = f.bytes.value_or(2ull << 20); break;
    case harness::App::Tracker: spec.payload_bytes = 0; break;
  }
  if (!f.channel.empty()) {
    spec.channel = channel::load_channel_file(f.channel);
  }
  if (!f.trace.empty()) {
    spec.trace = f.trace;
  }
  spec.send_interval_ms = f.interval_ms;
  return spec;
}

void write_to(const std::string& path, std::ostream& fallback, const std::string& text) {
  if (path.empty() || path == "-") {
    fallback << text;
    return;
  }
  std::ofstream file(path, std::ios::binary);
  file << text;
  if (!file) {
    throw std::runtime_error("cannot write " + path);
  }
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"sapnet simulator: streamer, file transfer and tracker experiments"};
  app.require_subcommand(1);

  RunFlags run;
  CommonFlags common;
  std::optional<harness::App> chosen;
  std::string config;
  bool calibration = false;

  auto add_app = [&](const char* name, harness::App which, const char* help) {
    CLI::App* cmd = app.add_subcommand(name, help);
    add_run_flags(*cmd, run);
    add_common_flags(*cmd, common);
    cmd->callback([&chosen, which] { chosen = which; });
    return cmd;
  };
  add_app("streamer", harness::App::Streamer, "Bit-error characterization run");
  add_app("xfer", harness::App::Xfer, "File transfer, precise vs approximate");
  CLI::App* tracker = add_app("tracker", harness::App::Tracker, "GPS tracker quality run");
  tracker->add_option("--trace", run.trace, "Trace CSV (lat,lon,t); synthetic otherwise")
      ->check(CLI::ExistingFile);
  tracker->add_option("--interval-ms", run.interval_ms, "Send interval in milliseconds")
      ->capture_default_str();

  CLI::App* sweep = app.add_subcommand("sweep", "Run a sweep described by a config file");
  sweep->add_option("--config", config, "Sweep config (key = value lines)")->required();
  add_common_flags(*sweep, common);

  CLI::App* calib = app.add_subcommand("calibration", "Print the default channel calibration table");
  calib->add_option("--out", common.out, "Output file (default: standard output)");
  calib->callback([&calibration] { calibration = true; });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "sapsim: " << e.what() << "\n" << "Run with --help for usage.\n";
    return 2;
  }

  harness::ExperimentSpec spec;
  try {
    if (calibration) {
      write_to(common.out, out, channel::format_channel_text(channel::default_calibration()));
      return 0;
    }
    spec = sweep->parsed() ? harness::load_spec(config) : spec_from(*chosen, run);
    if (common.jobs) {
      spec.jobs = common.jobs;
    }
    harness::validate(spec);
  } catch (const std::invalid_argument& e) {
    err << "sapsim: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "sapsim: " << e.what() << "\n";
    return sweep->parsed() ? 2 : 1;
  }

  try {
    const auto records = harness::run_experiment(spec);
    write_to(common.out, out, harness::to_csv(records));
    if (!common.summary.empty()) {
      std::ostringstream text;
      harness::write_summary(text, harness::summarize(records));
      write_to(common.summary, out, text.str());
    }
  } catch (const std::exception& e) {
    err << "sapsim: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

int cli_main(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) {
    args.emplace_back(argv[i]);
  }
  return cli_main(args, std::cout, std::cerr);
}

}  // namespace sapnet
