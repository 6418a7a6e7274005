#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "sapnet/apps/streamer.hpp"
#include "sapnet/apps/tracker.hpp"
#include "sapnet/apps/xfer.hpp"

using namespace sapnet;
using namespace sapnet::apps;

namespace {

WorldConfig world_cfg(double ber, double loss, std::uint64_t seed) {
  WorldConfig cfg;
  cfg.channel = channel::uniform_channel(ber, loss, seed);
  return cfg;
}

Bytes file_of(std::size_t n) {
  Bytes out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = static_cast<std::uint8_t>(oracle::mix32(static_cast<std::uint32_t>(i)));
  }
  return out;
}

}  // namespace

TEST_CASE("streamer word") {
  CHECK(streamer_word(0) == 0u);
  CHECK(streamer_word(1) == oracle::mix32(1));
  const Bytes p = streamer_payload(100, 2, 4);
  for (std::uint32_t j = 0; j < 4; ++j) {
    CHECK(get_u32(p, 4 * j) == oracle::mix32(100 + 2 * 4 + j));
  }
}

TEST_CASE("streamer word output bits are balanced") {
  std::array<std::uint32_t, 32> ones{};
  const std::uint32_t n = 1000000;
  for (std::uint32_t c = 0; c < n; ++c) {
    const std::uint32_t w = streamer_word(c);
    for (int b = 0; b < 32; ++b) {
      ones[b] += (w >> b) & 1u;
    }
  }
  for (int b = 0; b < 32; ++b) {
    CHECK(static_cast<double>(ones[b]) / n == doctest::Approx(0.5).epsilon(0.01));
  }
}

TEST_CASE("streamer config validation") {
  StreamerConfig cfg;
  cfg.total_bytes = 1000;
  CHECK_THROWS(validate(cfg));
  cfg.total_bytes = 2048;
  CHECK_NOTHROW(validate(cfg));
  cfg.words_per_datagram = 0;
  CHECK_THROWS(validate(cfg));
}

TEST_CASE("streamer receiver accounting") {
  StreamerReceiver rx(7, 4, 10);
  rx.accept(0, streamer_payload(7, 0, 4), true);
  Bytes bad = streamer_payload(7, 1, 4);
  flip_bit(bad, 3);
  flip_bit(bad, 100);
  rx.accept(1, bad, false);
  rx.accept(1, bad, false);  // duplicate ignored
  rx.accept(99, bad, false);
  const auto r = rx.report();
  CHECK(r.sent == 10);
  CHECK(r.delivered == 2);
  CHECK(r.damaged == 1);
  CHECK(r.lost == 8);
  CHECK(r.bit_errors == 2);
  CHECK(r.flr == doctest::Approx(0.9));
  CHECK(r.flr_b == doctest::Approx(0.8));
  CHECK(r.ber_in_damaged == doctest::Approx(2.0 / 128));
  CHECK(r.correct_bit_fraction == doctest::Approx(254.0 / 256));
}

TEST_CASE("streamer on a noiseless channel") {
  for (auto mode : {sap::Mode::Approximate, sap::Mode::Precise}) {
    World w(world_cfg(0, 0, 1));
    StreamerConfig cfg;
    cfg.seed32 = 0xABCDEF;
    cfg.total_bytes = 64 * 1024;
    cfg.mode = mode;
    const auto r = streamer_run(cfg, w);
    CHECK(r.sent == 64);
    CHECK(r.delivered == 64);
    CHECK(r.ber_overall == 0);
    CHECK(r.flr == 0);
    CHECK(r.flr_b == 0);
    CHECK(r.correct_bit_fraction == 1.0);
  }
}

TEST_CASE("streamer FLR decomposition on a noisy channel") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    World w(world_cfg(5e-5, 0.05, seed));
    StreamerConfig cfg;
    cfg.seed32 = static_cast<std::uint32_t>(seed);
    cfg.total_bytes = 512 * 1024;
    const auto r = streamer_run(cfg, w);
    CHECK(r.flr_b <= r.flr);
    CHECK(r.flr - r.flr_b == doctest::Approx(r.damaged_frame_fraction));
    CHECK(r.damaged > 0);
    CHECK(r.ber_in_damaged > r.ber_overall);
  }
}

TEST_CASE("request format and parse") {
  XferRequest req{"/a.jpg", {"image/jpeg"}, 9000, false};
  CHECK(parse_request(format_request(req)) == req);
  const auto parsed = parse_request("GET /a.jpg\r\nX-SAP-Approx: image/jpeg\r\nX-SAP-Port: 9000\r\n\r\n");
  CHECK(parsed.approx_mime_types == std::vector<std::string>{"image/jpeg"});
  CHECK(parsed.sap_port == 9000);

  const auto plain = parse_request("GET /index.html\r\nUser-Agent: x\r\n\r\n");
  CHECK(plain.approx_mime_types.empty());
  CHECK_FALSE(plain.sap_port.has_value());
  CHECK(choose_path(plain, "text/html") == XferPath::InBand);

  const auto lower = parse_request("GET /b\nx-sap-approx: a/b, c/d\nx-sap-port: 1\n");
  CHECK(lower.approx_mime_types == std::vector<std::string>{"a/b", "c/d"});

  XferRequest multi{"/x.bin", {"image/jpeg", "application/octet-stream"}, 1, true};
  CHECK(parse_request(format_request(multi)) == multi);

  auto malformed = [](const char* text) {
    try {
      parse_request(text);
    } catch (const XferError& e) {
      return e.code() == XferErrc::MalformedRequest;
    }
    return false;
  };
  CHECK(malformed("GET /a.jpg\r\nX-SAP-Approx: image/jpeg\r\nX-SAP-Port: 70000\r\n"));
  CHECK(malformed("PUT /a\r\n"));
  CHECK(malformed("GET /a\r\nX-SAP-Approx: image/jpeg\r\n"));
  CHECK(malformed("GET /a\r\nX-SAP-Port: 9\r\n"));
  CHECK(malformed("GET /a\r\nbroken header\r\n"));
}

TEST_CASE("mime table and path choice") {
  CHECK(mime_for_path("/x/a.JPG") == "image/jpeg");
  CHECK(mime_for_path("/a.jpeg") == "image/jpeg");
  CHECK(mime_for_path("/a.html") == "text/html");
  CHECK(mime_for_path("/a.bin") == "application/octet-stream");
  CHECK(mime_for_path("/dir.d/noext") == "application/octet-stream");
  XferRequest r{"/a.html", {"image/jpeg"}, 9000, false};
  CHECK(choose_path(r, "text/html") == XferPath::InBand);
  CHECK(choose_path(r, "image/jpeg") == XferPath::SapApproximate);
  r.force_precise = true;
  CHECK(choose_path(r, "image/jpeg") == XferPath::SapPrecise);
}

TEST_CASE("response header round trip") {
  const XferResponse resp{200, 2097152, "image/jpeg", XferPath::SapApproximate};
  const auto back = parse_response(format_response(resp));
  CHECK(back.status == 200);
  CHECK(back.length == resp.length);
  CHECK(back.mime == resp.mime);
  CHECK(back.path == resp.path);
  CHECK_THROWS_AS(parse_response("junk"), XferError);
}

TEST_CASE("2 MB approximate transfer sends exactly 2048 DATA datagrams then FIN") {
  World w(world_cfg(0, 0, 1));
  ContentStore store;
  store.put("/big.jpg", file_of(2 << 20));
  std::uint64_t data_frames = 0;
  w.set_air_observer([&](std::size_t from, std::size_t, const mac::MacFrame& f, const mac::SendResult& r) {
    // Server to client, SAP DATA with the approximate flag.
    const std::size_t sap_at = transport::kHeaderSize;
    if (from == 1 && f.payload.size() > sap_at + 2 && f.payload[sap_at] == 3 &&
        (f.payload[sap_at + 1] & sap::kFlagApproximate)) {
      data_frames += r.tries;
    }
  });
  const auto out = xfer_session(w, store, {"/big.jpg", {"image/jpeg"}, 9000, false});
  CHECK(out.response.path == XferPath::SapApproximate);
  CHECK(data_frames == 2048);
  CHECK(out.datagrams_expected == 2048);
  CHECK(out.datagrams_received == 2048);
  CHECK(out.body == file_of(2 << 20));
  CHECK(out.transfer_time > SimDuration::zero());
}

TEST_CASE("xfer paths deliver exact bytes when precise") {
  ContentStore store;
  store.put("/page.html", file_of(5000));
  store.put("/pic.jpg", file_of(7777));
  const std::vector<std::pair<XferRequest, XferPath>> cases = {
      {{"/page.html", {}, std::nullopt, false}, XferPath::InBand},
      {{"/page.html", {"image/jpeg"}, 9000, false}, XferPath::InBand},
      {{"/pic.jpg", {"image/jpeg"}, 9000, true}, XferPath::SapPrecise},
  };
  for (const auto& [req, path] : cases) {
    World w(world_cfg(1e-4, 0.02, 4));
    const auto out = xfer_session(w, store, req);
    CHECK(out.response.path == path);
    CHECK(out.response.mime == mime_for_path(req.path));
    CHECK(out.body == *store.find(req.path));
  }
}

TEST_CASE("missing file yields 404") {
  World w(world_cfg(0, 0, 1));
  ContentStore store;
  const auto out = xfer_session(w, store, {"/nope.jpg", {}, std::nullopt, false});
  CHECK(out.response.status == 404);
  CHECK(out.body.empty());
}

TEST_CASE("approximate transfer damage stays within twice the channel BER") {
  const double ber = 2e-5;
  ContentStore store;
  const Bytes original = file_of(512 * 1024);
  store.put("/img.jpg", original);
  for (std::uint64_t seed : {1, 2, 3}) {
    World w(world_cfg(ber, 0.01, seed));
    const auto out = xfer_session(w, store, {"/img.jpg", {"image/jpeg"}, 9000, false});
    REQUIRE(out.body.size() == original.size());
    std::uint64_t errors = 0;
    std::uint64_t bits = 0;
    for (std::size_t c = 0; c < out.chunk_received.size(); ++c) {
      if (!out.chunk_received[c]) {
        continue;
      }
      const std::size_t off = c * kXferChunk;
      const std::size_t n = std::min(kXferChunk, original.size() - off);
      const Bytes a(original.begin() + off, original.begin() + off + n);
      const Bytes b(out.body.begin() + off, out.body.begin() + off + n);
      errors += oracle::hamming(a, b);
      bits += 8 * n;
    }
    CHECK(static_cast<double>(errors) / static_cast<double>(bits) <= 2 * ber);
    CHECK(out.datagrams_received < out.datagrams_expected);
  }
}

TEST_CASE("content store loads a directory") {
  const auto dir = std::filesystem::temp_directory_path() / "sapnet_store_test";
  std::filesystem::create_directories(dir / "sub");
  {
    std::ofstream(dir / "sub" / "a.jpg", std::ios::binary) << "hello";
  }
  const auto store = ContentStore::load_directory(dir);
  REQUIRE(store.find("/sub/a.jpg") != nullptr);
  CHECK(store.find("/sub/a.jpg")->size() == 5);
  std::filesystem::remove_all(dir);
}

TEST_CASE("haversine speed") {
  CHECK(haversine_speed({1, 2, 0}, {1, 2, 10}) == 0.0);
  CHECK(haversine_speed({0, 0, 0}, {0.001, 0, 100}) == doctest::Approx(1.112).epsilon(0.001));
  CHECK(haversine_speed({0, 0, 0}, {0.001, 0, 10}) == doctest::Approx(11.12).epsilon(0.001));
  CHECK_THROWS_AS(haversine_speed({0, 0, 5}, {0, 0, 5}), NonMonotonicTime);
}

TEST_CASE("tracker update") {
  // Points spaced so successive speeds are 1, 2, 3 m/s along the equator.
  const double deg_per_m = 180.0 / (3.14159265358979323846 * kEarthRadiusM);
  TrackerState s;
  s = tracker_update(s, {0, 0, 0});
  CHECK(s.n_accepted == 1);
  CHECK(s.n_samples == 0);
  s = tracker_update(s, {0, 1 * deg_per_m, 1});
  s = tracker_update(s, {0, 3 * deg_per_m, 2});
  s = tracker_update(s, {0, 6 * deg_per_m, 3});
  CHECK(s.cma == doctest::Approx(2.0));

  const TrackerState before = s;
  TrackerState after = tracker_update(s, {0, 21 * deg_per_m, 4});  // 15 m/s
  CHECK(after.n_rejected == before.n_rejected + 1);
  after.n_rejected = before.n_rejected;
  CHECK(after == before);

  after = tracker_update(s, {95, 0, 9});
  CHECK(after.n_rejected == s.n_rejected + 1);
  after = tracker_update(s, {0, 6 * deg_per_m, 3});
  CHECK(after.n_rejected == s.n_rejected + 1);
}

TEST_CASE("clean synthetic trace: tracker cma equals the offline mean") {
  const auto trace = synthetic_trace(11);
  REQUIRE(trace.size() == 945);
  double sum = 0;
  for (std::size_t i = 1; i < trace.size(); ++i) {
    const double s = haversine_speed(trace[i - 1], trace[i]);
    CHECK(s >= 0.79);
    CHECK(s <= 2.21);
    sum += s;
  }
  const double truth = sum / 944.0;
  CHECK(ground_truth_speed(trace) == doctest::Approx(truth).epsilon(1e-12));
  TrackerState st;
  for (const auto& p : trace) {
    st = tracker_update(st, p);
  }
  CHECK(std::abs(st.cma - truth) / truth < 1e-9);
  CHECK(st.n_rejected == 0);
}

TEST_CASE("trace CSV round trip") {
  const auto trace = synthetic_trace(3, 20);
  const auto path = std::filesystem::temp_directory_path() / "sapnet_trace_test.csv";
  write_trace_csv(path, trace);
  CHECK(read_trace_csv(path) == trace);
  std::filesystem::remove(path);
}

TEST_CASE("tracker_run on a noiseless channel is exact in either mode") {
  const auto trace = synthetic_trace(5);
  for (auto mode : {sap::Mode::Precise, sap::Mode::Approximate}) {
    World w(world_cfg(0, 0, 1));
    const auto r = tracker_run(trace, std::chrono::milliseconds(5), w, mode);
    CHECK(r.rel_error < 1e-9);
    CHECK(r.state.n_missing == 0);
    CHECK(r.interarrival_mean == doctest::Approx(0.005).epsilon(0.01));
  }
}

TEST_CASE("tracker_run under heavy loss degrades") {
  const auto trace = synthetic_trace(5);
  World w(world_cfg(1e-3, 0.6, 2));
  const auto r = tracker_run(trace, std::chrono::milliseconds(5), w, sap::Mode::Approximate);
  CHECK(r.state.n_missing > trace.size() / 2);
  CHECK(std::isfinite(r.rel_error));
}
