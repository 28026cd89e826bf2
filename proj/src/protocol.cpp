#include "voxflood/protocol.hpp"

#include <arpa/inet.h>
#include <csignal>
#include <cstring>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <bit>
#include <cerrno>

#include "json.hpp"

namespace voxflood::protocol {
namespace {

using json = nlohmann::json;

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int decode_char(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

std::vector<std::uint8_t> mask_bytes(const Mask2D& m) {
  std::vector<std::uint8_t> out(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = m[i] ? 1 : 0;
  return out;
}

Mask2D bytes_to_mask(const std::vector<std::uint8_t>& bytes, std::int64_t w, std::int64_t h, const char* what) {
  if (bytes.size() != static_cast<std::size_t>(w * h)) {
    throw BackendError(std::string(what) + " has " + std::to_string(bytes.size()) + " bytes, expected " +
                       std::to_string(w * h));
  }
  Mask2D m({w, h});
  for (std::size_t i = 0; i < bytes.size(); ++i) m[i] = bytes[i] ? 1 : 0;
  return m;
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  const std::size_t rest = bytes.size() - i;
  if (rest == 1) {
    const std::uint32_t v = bytes[i] << 16;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += "==";
  } else if (rest == 2) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw BackendError("base64 length is not a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    std::array<int, 4> q{};
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + k];
      if (c == '=' && i + 4 == text.size() && k >= 2) {
        q[k] = 0;
        ++pad;
        continue;
      }
      if (pad > 0) throw BackendError("invalid base64 padding");
      q[k] = decode_char(c);
      if (q[k] < 0) throw BackendError("invalid base64 character");
    }
    const std::uint32_t v = (q[0] << 18) | (q[1] << 12) | (q[2] << 6) | q[3];
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  }
  return out;
}

FdTransport::FdTransport(int read_fd, int write_fd, bool owns)
    : read_fd_(read_fd), write_fd_(write_fd), owns_(owns) {}

FdTransport::~FdTransport() {
  if (!owns_) return;
  if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
  if (read_fd_ >= 0) ::close(read_fd_);
}

void FdTransport::close_write() {
  if (write_fd_ < 0) return;
  if (write_fd_ == read_fd_) {
    ::shutdown(write_fd_, SHUT_WR);
  } else if (owns_) {
    ::close(write_fd_);
  }
  write_fd_ = -1;
}

void FdTransport::write_all(std::span<const std::uint8_t> bytes) {
  if (write_fd_ < 0) throw BackendError("transport closed for writing");
  std::size_t done = 0;
  while (done < bytes.size()) {
    const ssize_t n = ::write(write_fd_, bytes.data() + done, bytes.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw BackendError(errno_text("write to segmenter backend failed"));
    }
    done += static_cast<std::size_t>(n);
  }
}

bool FdTransport::read_exact(std::span<std::uint8_t> bytes) {
  std::size_t done = 0;
  while (done < bytes.size()) {
    const ssize_t n = ::read(read_fd_, bytes.data() + done, bytes.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw BackendError(errno_text("read from segmenter backend failed"));
    }
    if (n == 0) {
      if (done == 0) return false;
      throw BackendError("segmenter backend closed the connection mid-frame");
    }
    done += static_cast<std::size_t>(n);
  }
  return true;
}

void write_frame(Transport& t, std::string_view payload) {
  if (payload.size() > kMaxFrameBytes) throw BackendError("frame too large");
  const auto n = static_cast<std::uint32_t>(payload.size());
  std::vector<std::uint8_t> buf(4 + payload.size());
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<std::uint8_t>((n >> (8 * i)) & 0xFF);
  std::memcpy(buf.data() + 4, payload.data(), payload.size());
  t.write_all(buf);
}

std::optional<std::string> read_frame(Transport& t) {
  std::array<std::uint8_t, 4> len{};
  if (!t.read_exact(len)) return std::nullopt;
  const std::uint32_t n = len[0] | (len[1] << 8) | (len[2] << 16) | (std::uint32_t(len[3]) << 24);
  if (n > kMaxFrameBytes) throw BackendError("incoming frame of " + std::to_string(n) + " bytes exceeds limit");
  std::string payload(n, '\0');
  if (n > 0 && !t.read_exact({reinterpret_cast<std::uint8_t*>(payload.data()), n})) {
    throw BackendError("connection closed mid-frame");
  }
  return payload;
}

std::string handshake_payload() { return json{{"proto", kProtocolVersion}}.dump(); }

std::string encode_request(const SegmenterRequest& request) {
  json j;
  j["id"] = request.id;
  j["w"] = request.image.width;
  j["h"] = request.image.height;
  j["image"] = base64_encode(request.image.rgb);
  json points = json::array();
  for (const auto& p : request.points) points.push_back({p.x, p.y});
  j["points"] = std::move(points);
  j["dense"] = request.dense ? json(base64_encode(mask_bytes(*request.dense))) : json(nullptr);
  return j.dump();
}

namespace {

SegmenterRequest decode_request_json(const json& j) {
  SegmenterRequest r;
  r.id = j.at("id").get<std::uint64_t>();
  const auto w = j.at("w").get<std::int64_t>();
  const auto h = j.at("h").get<std::int64_t>();
  if (w < 1 || h < 1) throw InputError("request dims must be positive");
  r.image.width = w;
  r.image.height = h;
  r.image.rgb = base64_decode(j.at("image").get<std::string>());
  if (r.image.rgb.size() != static_cast<std::size_t>(w * h * 3)) throw InputError("request image has the wrong length");
  for (const auto& p : j.at("points")) {
    if (!p.is_array() || p.size() != 2) throw InputError("point prompt must be [x, y]");
    r.points.push_back({p[0].get<std::int64_t>(), p[1].get<std::int64_t>()});
  }
  const auto& dense = j.at("dense");
  if (!dense.is_null()) r.dense = bytes_to_mask(base64_decode(dense.get<std::string>()), w, h, "dense prompt");
  return r;
}

}  // namespace

SegmenterRequest decode_request(std::string_view payload) {
  try {
    return decode_request_json(json::parse(payload));
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed request: ") + e.what());
  }
}

std::string encode_response(const SegmenterResponse& response, std::int64_t w, std::int64_t h) {
  json channels = json::array();
  for (const auto& ch : response.channels) {
    if (ch.mask.width() != w || ch.mask.height() != h) throw BackendError("channel mask dims differ from request");
    std::vector<std::uint8_t> logits(ch.logits.size() * 4);
    for (std::size_t i = 0; i < ch.logits.size(); ++i) {
      const auto bits = std::bit_cast<std::uint32_t>(ch.logits[i]);
      for (int b = 0; b < 4; ++b) logits[4 * i + b] = static_cast<std::uint8_t>((bits >> (8 * b)) & 0xFF);
    }
    channels.push_back({{"mask", base64_encode(mask_bytes(ch.mask))},
                        {"iou", ch.predicted_iou},
                        {"logits", base64_encode(logits)}});
  }
  return json{{"id", response.id}, {"channels", std::move(channels)}}.dump();
}

std::string encode_error(std::uint64_t id, std::string_view message) {
  return json{{"id", id}, {"error", std::string(message)}}.dump();
}

SegmenterResponse decode_response(std::string_view payload, std::int64_t w, std::int64_t h) {
  json j;
  try {
    j = json::parse(payload);
  } catch (const json::exception& e) {
    throw BackendError(std::string("malformed response: ") + e.what());
  }
  try {
    SegmenterResponse r;
    r.id = j.at("id").get<std::uint64_t>();
    if (j.contains("error")) throw BackendError("backend error: " + j.at("error").get<std::string>());
    const Dims2 ld{w / kLogitsScale, h / kLogitsScale};
    for (const auto& c : j.at("channels")) {
      MaskChannel ch;
      ch.mask = bytes_to_mask(base64_decode(c.at("mask").get<std::string>()), w, h, "channel mask");
      ch.predicted_iou = c.at("iou").get<double>();
      const auto raw = base64_decode(c.at("logits").get<std::string>());
      if (raw.size() != ld.count() * 4) throw BackendError("channel logits have the wrong length");
      ch.logits = Grid2<float>(ld);
      for (std::size_t i = 0; i < ld.count(); ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) bits |= std::uint32_t(raw[4 * i + b]) << (8 * b);
        ch.logits[i] = std::bit_cast<float>(bits);
      }
      r.channels.push_back(std::move(ch));
    }
    if (r.channels.empty()) throw BackendError("response has no channels");
    return r;
  } catch (const json::exception& e) {
    throw BackendError(std::string("malformed response: ") + e.what());
  }
}

void serve(Transport& t, SliceSegmenter& backend) {
  write_frame(t, handshake_payload());
  for (;;) {
    auto frame = read_frame(t);
    if (!frame) return;
    std::uint64_t id = 0;
    std::string reply;
    try {
      const json j = json::parse(*frame);
      if (j.contains("id") && j["id"].is_number_unsigned()) id = j["id"].get<std::uint64_t>();
      const SegmenterRequest req = decode_request(*frame);
      SegmenterResponse resp = backend.segment(req);
      resp.id = req.id;
      reply = encode_response(resp, req.image.width, req.image.height);
    } catch (const std::exception& e) {
      reply = encode_error(id, e.what());
    }
    write_frame(t, reply);
  }
}

ExternalSegmenter::ExternalSegmenter(std::unique_ptr<Transport> transport, int child_pid)
    : transport_(std::move(transport)), child_pid_(child_pid) {
  const auto hello = read_frame(*transport_);
  if (!hello) throw BackendError("segmenter backend closed before the handshake");
  try {
    const json j = json::parse(*hello);
    if (j.at("proto").get<int>() != kProtocolVersion) {
      throw BackendError("unsupported protocol version " + j.at("proto").dump());
    }
  } catch (const json::exception& e) {
    throw BackendError(std::string("bad handshake: ") + e.what());
  }
}

ExternalSegmenter::~ExternalSegmenter() {
  transport_.reset();
  if (child_pid_ > 0) {
    int status = 0;
    ::waitpid(child_pid_, &status, 0);
  }
}

SegmenterResponse ExternalSegmenter::segment(const SegmenterRequest& request) {
  request.validate();
  std::lock_guard lock(mutex_);
  SegmenterRequest wire = request;
  wire.id = next_id_++;
  write_frame(*transport_, encode_request(wire));
  for (;;) {
    const auto frame = read_frame(*transport_);
    if (!frame) throw BackendError("segmenter backend closed the connection");
    SegmenterResponse resp = decode_response(*frame, request.image.width, request.image.height);
    // Stale answers to abandoned requests are skipped.
    if (resp.id != wire.id) continue;
    resp.id = request.id;
    return resp;
  }
}

std::unique_ptr<ExternalSegmenter> ExternalSegmenter::spawn(const std::string& command) {
  std::signal(SIGPIPE, SIG_IGN);
  int to_child[2], from_child[2];
  if (::pipe(to_child) != 0) throw BackendError(errno_text("pipe"));
  if (::pipe(from_child) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw BackendError(errno_text("pipe"));
  }
  const pid_t pid = ::fork();
  if (pid < 0) throw BackendError(errno_text("fork"));
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::close(to_child[0]);
    ::close(to_child[1]);
    ::close(from_child[0]);
    ::close(from_child[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  auto transport = std::make_unique<FdTransport>(from_child[0], to_child[1]);
  try {
    return std::make_unique<ExternalSegmenter>(std::move(transport), pid);
  } catch (...) {
    int status = 0;
    ::waitpid(pid, &status, 0);
    throw;
  }
}

std::unique_ptr<ExternalSegmenter> ExternalSegmenter::connect_tcp(const std::string& host, int port) {
  std::signal(SIGPIPE, SIG_IGN);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (::getaddrinfo(host.c_str(), service.c_str(), &hints, &res) != 0 || !res) {
    throw BackendError("cannot resolve " + host + ":" + service);
  }
  int fd = -1;
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw BackendError("cannot connect to " + host + ":" + service);
  return std::make_unique<ExternalSegmenter>(std::make_unique<FdTransport>(fd, fd));
}

TcpListener::TcpListener(int port, const std::string& host) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw BackendError(errno_text("socket"));
  const int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd_);
    throw BackendError("invalid listen address " + host);
  }
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(fd_, 4) != 0) {
    const std::string msg = errno_text("bind/listen");
    ::close(fd_);
    throw BackendError(msg);
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<FdTransport> TcpListener::accept() {
  const int c = ::accept(fd_, nullptr, nullptr);
  if (c < 0) throw BackendError(errno_text("accept"));
  return std::make_unique<FdTransport>(c, c);
}

}  // namespace voxflood::protocol

namespace voxflood {

std::unique_ptr<SliceSegmenter> make_segmenter(const std::string& endpoint, const OracleOptions& oracle) {
  if (endpoint == "oracle") return std::make_unique<OracleFloodSegmenter>(oracle);
  if (endpoint == "echo") return std::make_unique<EchoSegmenter>();
  if (endpoint.rfind("stdio:", 0) == 0) {
    const std::string cmd = endpoint.substr(6);
    if (cmd.empty()) throw InputError("stdio backend needs a command");
    return protocol::ExternalSegmenter::spawn(cmd);
  }
  if (endpoint.rfind("tcp:", 0) == 0) {
    const std::string rest = endpoint.substr(4);
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos || colon == 0) throw InputError("tcp backend must be tcp:<host>:<port>");
    int port = 0;
    try {
      port = std::stoi(rest.substr(colon + 1));
    } catch (const std::exception&) {
      throw InputError("invalid tcp port in '" + endpoint + "'");
    }
    return protocol::ExternalSegmenter::connect_tcp(rest.substr(0, colon), port);
  }
  throw InputError("unknown backend endpoint '" + endpoint + "'");
}

}  // namespace voxflood
