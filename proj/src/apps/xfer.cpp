#include "sapnet/apps/xfer.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace sapnet::apps {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

[[noreturn]] void malformed(const std::string& why) {
  throw XferError(XferErrc::MalformedRequest, "malformed request: " + why);
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    lines.push_back(trim(text.substr(0, nl)));
    if (nl == std::string_view::npos) {
      break;
    }
    text.remove_prefix(nl + 1);
  }
  return lines;
}

std::string_view extension_of(std::string_view path) {
  const auto slash = path.find_last_of('/');
  const auto dot = path.find_last_of('.');
  if (dot == std::string_view::npos || (slash != std::string_view::npos && dot < slash)) {
    return {};
  }
  return path.substr(dot + 1);
}

Bytes to_bytes(const std::string& s) { return Bytes(s.begin(), s.end()); }

}  // namespace

std::string format_request(const XferRequest& req) {
  std::string out = "GET " + req.path + "\r\n";
  if (!req.approx_mime_types.empty()) {
    out += "X-SAP-Approx: ";
    for (std::size_t i = 0; i < req.approx_mime_types.size(); ++i) {
      out += (i ? "," : "") + req.approx_mime_types[i];
    }
    out += "\r\n";
  }
  if (req.sap_port) {
    out += "X-SAP-Port: " + std::to_string(*req.sap_port) + "\r\n";
  }
  if (req.force_precise) {
    out += "X-SAP-Force-Precise: 1\r\n";
  }
  out += "\r\n";
  return out;
}

XferRequest parse_request(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty() || lines.front().substr(0, 4) != "GET ") {
    malformed("missing `GET <path>` request line");
  }
  XferRequest req;
  req.path = std::string(trim(lines.front().substr(4)));
  if (req.path.empty() || req.path.find(' ') != std::string::npos) {
    malformed("bad path");
  }
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string_view line = lines[i];
    if (line.empty()) {
      break;
    }
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) {
      malformed("header without ':'");
    }
    const std::string_view name = trim(line.substr(0, colon));
    const std::string_view value = trim(line.substr(colon + 1));
    if (iequals(name, "X-SAP-Approx")) {
      std::string_view rest = value;
      while (!rest.empty()) {
        const auto comma = rest.find(',');
        const std::string_view mime = trim(rest.substr(0, comma));
        if (mime.empty()) {
          malformed("empty MIME type in X-SAP-Approx");
        }
        req.approx_mime_types.emplace_back(mime);
        if (comma == std::string_view::npos) {
          break;
        }
        rest.remove_prefix(comma + 1);
      }
    } else if (iequals(name, "X-SAP-Port")) {
      unsigned long port = 0;
      const auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), port);
      if (ec != std::errc{} || end != value.data() + value.size() || port == 0 || port > 65535) {
        malformed("X-SAP-Port must be an integer in 1..65535");
      }
      req.sap_port = static_cast<std::uint16_t>(port);
    } else if (iequals(name, "X-SAP-Force-Precise")) {
      req.force_precise = value == "1";
    }
  }
  const bool wants_sap = !req.approx_mime_types.empty() || req.force_precise;
  if (wants_sap != req.sap_port.has_value()) {
    malformed("X-SAP-Port must accompany X-SAP-Approx or X-SAP-Force-Precise");
  }
  return req;
}

std::string mime_for_path(std::string_view path) {
  const std::string_view ext = extension_of(path);
  if (iequals(ext, "jpg") || iequals(ext, "jpeg")) {
    return "image/jpeg";
  }
  if (iequals(ext, "html") || iequals(ext, "htm")) {
    return "text/html";
  }
  return "application/octet-stream";
}

const Bytes* ContentStore::find(const std::string& path) const {
  const auto it = files_.find(path);
  return it == files_.end() ? nullptr : &it->second;
}

ContentStore ContentStore::load_directory(const std::filesystem::path& root) {
  ContentStore store;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) {
      continue;
    }
    std::ifstream in(entry.path(), std::ios::binary);
    Bytes body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    store.put("/" + std::filesystem::relative(entry.path(), root).generic_string(), std::move(body));
  }
  return store;
}

const char* to_string(XferPath path) {
  switch (path) {
    case XferPath::InBand: return "inband";
    case XferPath::SapApproximate: return "sap-approximate";
    case XferPath::SapPrecise: return "sap-precise";
  }
  return "inband";
}

std::string format_response(const XferResponse& resp) {
  std::ostringstream out;
  out << resp.status << ' ' << resp.length << ' ' << (resp.mime.empty() ? "-" : resp.mime) << ' '
      << to_string(resp.path);
  return out.str();
}

XferResponse parse_response(std::string_view text) {
  std::istringstream in{std::string(text)};
  XferResponse resp;
  std::string path;
  if (!(in >> resp.status >> resp.length >> resp.mime >> path)) {
    throw XferError(XferErrc::MalformedResponse, "malformed response header");
  }
  if (path == "sap-approximate") {
    resp.path = XferPath::SapApproximate;
  } else if (path == "sap-precise") {
    resp.path = XferPath::SapPrecise;
  } else {
    resp.path = XferPath::InBand;
  }
  return resp;
}

XferPath choose_path(const XferRequest& req, std::string_view mime) {
  if (!req.sap_port) {
    return XferPath::InBand;
  }
  if (req.force_precise) {
    return XferPath::SapPrecise;
  }
  const bool approx_ok = std::find(req.approx_mime_types.begin(), req.approx_mime_types.end(),
                                   mime) != req.approx_mime_types.end();
  return approx_ok ? XferPath::SapApproximate : XferPath::InBand;
}

XferPath xfer_serve(const XferRequest& req, const ContentStore& store,
                    sap::SapSocket& request_channel) {
  const Bytes* body = store.find(req.path);
  if (body == nullptr) {
    request_channel.send(to_bytes(format_response({404, 0, "-", XferPath::InBand})));
    throw XferError(XferErrc::NotFound, "no such path: " + req.path);
  }
  const std::string mime = mime_for_path(req.path);
  const XferPath path = choose_path(req, mime);
  request_channel.send(to_bytes(format_response({200, body->size(), mime, path})));

  auto send_body = [body](sap::SapSocket& sock) {
    for (std::size_t off = 0; off < body->size(); off += kXferChunk) {
      const std::size_t n = std::min(kXferChunk, body->size() - off);
      sock.send(ByteView(*body).subspan(off, n));
    }
  };

  if (path == XferPath::InBand) {
    send_body(request_channel);
    request_channel.close();
    return path;
  }

  World& world = request_channel.world();
  const Endpoint client{request_channel.peer()->station, *req.sap_port};
  auto back = sap::SapSocket::connect(world, Endpoint{request_channel.local().station, 0}, client);
  back.set_mode(path == XferPath::SapApproximate ? sap::Mode::Approximate : sap::Mode::Precise);
  send_body(back);
  back.close();
  request_channel.close();
  return path;
}

XferOutcome xfer_session(World& world, const ContentStore& store, const XferRequest& req) {
  constexpr std::size_t kClient = 0;
  constexpr std::size_t kServer = 1;
  constexpr SimDuration kWait = std::chrono::seconds(1);

  auto server = sap::SapSocket::listen(world, Endpoint{kServer, kXferServerPort});
  std::optional<sap::SapSocket> client_listener;
  if (req.sap_port) {
    client_listener.emplace(sap::SapSocket::listen(world, Endpoint{kClient, *req.sap_port}));
  }
  auto client = sap::SapSocket::connect(world, Endpoint{kClient, 0},
                                        Endpoint{kServer, kXferServerPort});
  client.send(to_bytes(format_request(req)));
  const SimTime request_done = world.now();

  // Server: read and answer the request.
  const sap::Received raw_request = server.recv(kWait);
  const XferRequest parsed = parse_request(
      std::string_view(reinterpret_cast<const char*>(raw_request.payload.data()),
                       raw_request.payload.size()));
  try {
    xfer_serve(parsed, store, server);
  } catch (const XferError& e) {
    if (e.code() != XferErrc::NotFound) {
      throw;
    }
  }

  // Client: response header, then the body on whichever socket carries it.
  XferOutcome out;
  const sap::Received header = client.recv(kWait);
  out.response = parse_response(std::string_view(
      reinterpret_cast<const char*>(header.payload.data()), header.payload.size()));
  if (out.response.status != 200) {
    client.close();
    return out;
  }
  out.body.assign(out.response.length, 0);
  out.datagrams_expected = (out.response.length + kXferChunk - 1) / kXferChunk;
  out.chunk_received.assign(out.datagrams_expected, false);

  sap::SapSocket& body_sock =
      out.response.path == XferPath::InBand ? client : *client_listener;
  // In-band chunks follow the response header in the precise sequence space.
  const std::uint32_t first_seq = out.response.path == XferPath::InBand ? 1 : 0;
  while (true) {
    sap::Received r;
    try {
      r = body_sock.recv(kWait);
    } catch (const sap::SapError& e) {
      if (e.code() == sap::SapErrc::PeerClosed || e.code() == sap::SapErrc::RecvTimeout) {
        break;
      }
      throw;
    }
    const std::uint64_t index = r.meta.approximate ? r.meta.seq : r.meta.seq - first_seq;
    if (index >= out.datagrams_expected || out.chunk_received[index]) {
      continue;
    }
    const std::size_t off = index * kXferChunk;
    const std::size_t n = std::min(r.payload.size(), out.body.size() - off);
    std::copy_n(r.payload.begin(), n, out.body.begin() + static_cast<std::ptrdiff_t>(off));
    out.chunk_received[index] = true;
    ++out.datagrams_received;
  }
  if (const auto fin = body_sock.peer_fin_time()) {
    out.transfer_time = *fin - request_done;
  } else {
    out.transfer_time = world.now() - request_done;
  }
  client.close();
  if (client_listener) {
    client_listener->close();
  }
  return out;
}

}  // namespace sapnet::apps
