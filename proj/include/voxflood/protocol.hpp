#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "voxflood/segmenter.hpp"

// External-segmenter wire protocol.
//
// Frames: u32 little-endian payload length, then a UTF-8 JSON payload.
// The server opens with {"proto":1}. Requests:
//   {"id":u64,"w":1024,"h":1024,"image":b64(w*h*3 RGB),"points":[[x,y],...],
//    "dense":b64(w*h bytes 0/1)|null}
// Responses:
//   {"id":u64,"channels":[{"mask":b64(w*h),"iou":f,"logits":b64(f32le (w/4)*(h/4))},...]}
//   {"id":u64,"error":"..."}
namespace voxflood::protocol {

inline constexpr int kProtocolVersion = 1;
// Upper bound on a single frame; a 1024^2 request is ~5.6 MB of base64.
inline constexpr std::uint32_t kMaxFrameBytes = 256u << 20;

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

// Blocking byte stream. read_exact returns false on clean EOF before the
// first byte and throws BackendError on a short read or I/O error.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void write_all(std::span<const std::uint8_t> bytes) = 0;
  virtual bool read_exact(std::span<std::uint8_t> bytes) = 0;
};

// Transport over a pair of POSIX file descriptors (pipes or one socket).
class FdTransport final : public Transport {
 public:
  FdTransport(int read_fd, int write_fd, bool owns = true);
  ~FdTransport() override;
  FdTransport(const FdTransport&) = delete;
  FdTransport& operator=(const FdTransport&) = delete;

  void write_all(std::span<const std::uint8_t> bytes) override;
  bool read_exact(std::span<std::uint8_t> bytes) override;
  void close_write();

 private:
  int read_fd_;
  int write_fd_;
  bool owns_;
};

void write_frame(Transport& t, std::string_view payload);
// std::nullopt on clean EOF.
std::optional<std::string> read_frame(Transport& t);

std::string encode_request(const SegmenterRequest& request);
SegmenterRequest decode_request(std::string_view payload);
std::string encode_response(const SegmenterResponse& response, std::int64_t w, std::int64_t h);
std::string encode_error(std::uint64_t id, std::string_view message);
// Throws BackendError for an error response or a malformed payload.
SegmenterResponse decode_response(std::string_view payload, std::int64_t w, std::int64_t h);
std::string handshake_payload();

// Answers requests from `t` with `backend` until EOF. Malformed frames get an
// error response (with the request id when recoverable) and the loop goes on.
void serve(Transport& t, SliceSegmenter& backend);

// Client side of the protocol. Calls are serialised on the connection;
// responses are matched by id.
class ExternalSegmenter final : public SliceSegmenter {
 public:
  // Spawns `/bin/sh -c command` and talks over its stdin/stdout.
  static std::unique_ptr<ExternalSegmenter> spawn(const std::string& command);
  // Connects to host:port.
  static std::unique_ptr<ExternalSegmenter> connect_tcp(const std::string& host, int port);
  // Wraps an already connected transport and performs the handshake.
  explicit ExternalSegmenter(std::unique_ptr<Transport> transport, int child_pid = -1);
  ~ExternalSegmenter() override;

  SegmenterResponse segment(const SegmenterRequest& request) override;

 private:
  std::mutex mutex_;
  std::unique_ptr<Transport> transport_;
  int child_pid_;
  std::uint64_t next_id_ = 1;
};

// Listening TCP socket for `serve --tcp`; port 0 picks a free port.
class TcpListener {
 public:
  explicit TcpListener(int port, const std::string& host = "127.0.0.1");
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  int port() const { return port_; }
  std::unique_ptr<FdTransport> accept();

 private:
  int fd_ = -1;
  int port_ = 0;
};

}  // namespace voxflood::protocol

namespace voxflood {

// "oracle", "echo", "stdio:<command>" or "tcp:<host>:<port>".
std::unique_ptr<SliceSegmenter> make_segmenter(const std::string& endpoint, const OracleOptions& oracle = {});

}  // namespace voxflood
