#pragma once

// File transfer with X-SAP-* negotiation. The client sends a text request over
// a precise SAP connection (the request channel); the server answers with a
// one-line response header on that channel and then either streams the body
// in-band (precise) or connects back to the client's SAP port and sends the
// body in 1 KB datagrams, approximately or precisely. The server's FIN marks
// the end of the body in every case.
//
// Request:   GET <path>\r\n
//            [X-SAP-Approx: <mime>[,<mime>...]\r\n]
//            [X-SAP-Port: <port>\r\n]
//            [X-SAP-Force-Precise: 1\r\n]
//            \r\n
// Response:  <status> <length> <mime> <path-kind>
//            where path-kind is inband, sap-approximate or sap-precise.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sapnet/sap.hpp"
#include "sapnet/world.hpp"

namespace sapnet::apps {

inline constexpr std::size_t kXferChunk = 1024;
inline constexpr std::uint16_t kXferServerPort = 80;

struct XferRequest {
  std::string path;
  std::vector<std::string> approx_mime_types;
  std::optional<std::uint16_t> sap_port;
  bool force_precise = false;

  bool operator==(const XferRequest&) const = default;
};

enum class XferErrc { MalformedRequest, NotFound, MalformedResponse };

class XferError : public std::runtime_error {
 public:
  XferError(XferErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  XferErrc code() const { return code_; }

 private:
  XferErrc code_;
};

std::string format_request(const XferRequest& req);
// Unknown headers are ignored; header names match case-insensitively.
XferRequest parse_request(std::string_view text);

// jpg/jpeg -> image/jpeg, html/htm -> text/html, anything else
// application/octet-stream.
std::string mime_for_path(std::string_view path);

class ContentStore {
 public:
  void put(std::string path, Bytes body) { files_[std::move(path)] = std::move(body); }
  const Bytes* find(const std::string& path) const;
  // Every regular file below `root`, keyed as "/<relative path>".
  static ContentStore load_directory(const std::filesystem::path& root);

 private:
  std::map<std::string, Bytes> files_;
};

enum class XferPath { InBand, SapApproximate, SapPrecise };

const char* to_string(XferPath path);

struct XferResponse {
  int status = 200;
  std::uint64_t length = 0;
  std::string mime;
  XferPath path = XferPath::InBand;
};

std::string format_response(const XferResponse& resp);
XferResponse parse_response(std::string_view text);

// Chooses the delivery path for one request.
XferPath choose_path(const XferRequest& req, std::string_view mime);

// Server side of one request received on `request_channel` (a connected
// socket on the server station). Throws XferError(NotFound) after sending a
// 404 header, or SapError(ConnectTimeout) if the back-connection fails.
XferPath xfer_serve(const XferRequest& req, const ContentStore& store,
                    sap::SapSocket& request_channel);

struct XferOutcome {
  XferResponse response;
  Bytes body;                        // zero-filled where datagrams were lost
  SimDuration transfer_time{0};      // request acknowledged -> FIN received
  std::uint64_t datagrams_expected = 0;
  std::uint64_t datagrams_received = 0;
  std::vector<bool> chunk_received;  // per 1 KB chunk
};

// Full exchange in `world`: client on station 0, server on station 1.
XferOutcome xfer_session(World& world, const ContentStore& store, const XferRequest& req);

}  // namespace sapnet::apps
