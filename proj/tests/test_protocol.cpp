#include <sys/socket.h>

#include <atomic>
#include <random>

#include "json.hpp"
#include <thread>

#include "doctest.h"
#include "voxflood/protocol.hpp"

using namespace voxflood;
using namespace voxflood::protocol;

namespace {

std::span<const std::uint8_t> bytes_of(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

Image2D random_slice(std::mt19937_64& rng) {
  Image2D img({kCanvasSize, kCanvasSize}, 0.0f);
  std::uniform_int_distribution<int> pos(100, 900), rad(10, 80), grey(0, 40);
  for (auto& v : img.values()) v = static_cast<float>(grey(rng));
  for (int blob = 0; blob < 4; ++blob) {
    const int cx = pos(rng), cy = pos(rng), r = rad(rng);
    for (std::int64_t y = cy - r; y <= cy + r; ++y)
      for (std::int64_t x = cx - r; x <= cx + r; ++x)
        if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) img(x, y) = 180.0f + grey(rng);
  }
  return img;
}

SegmenterRequest make_request(std::uint64_t id, const Image2D& img, bool dense) {
  SegmenterRequest req;
  req.id = id;
  req.image = to_three_channel(img);
  req.points = {{512, 512}, {3, 1000}};
  if (dense) {
    req.dense = Mask2D({kCanvasSize, kCanvasSize}, 0);
    std::mt19937_64 rng(id);
    for (auto& v : req.dense->values()) v = (rng() & 7) == 0;
  }
  return req;
}

struct SocketPair {
  int fds[2];
  SocketPair() { REQUIRE(::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) == 0); }
};

class FailingSegmenter final : public SliceSegmenter {
 public:
  SegmenterResponse segment(const SegmenterRequest&) override { throw std::runtime_error("model exploded"); }
};

}  // namespace

TEST_CASE("base64 known vectors") {
  CHECK(base64_encode(bytes_of("")) == "");
  CHECK(base64_encode(bytes_of("f")) == "Zg==");
  CHECK(base64_encode(bytes_of("fo")) == "Zm8=");
  CHECK(base64_encode(bytes_of("foobar")) == "Zm9vYmFy");
  const auto d = base64_decode("Zm9vYg==");
  CHECK(std::string(d.begin(), d.end()) == "foob");
  CHECK_THROWS(base64_decode("Zm9v!"));
  std::mt19937_64 rng(4);
  for (int n = 0; n < 40; ++n) {
    std::vector<std::uint8_t> v(n);
    for (auto& b : v) b = static_cast<std::uint8_t>(rng());
    CHECK(base64_decode(base64_encode(v)) == v);
  }
}

TEST_CASE("request and response encoding round trips") {
  std::mt19937_64 rng(2);
  const SegmenterRequest req = make_request(77, random_slice(rng), true);
  const std::string wire = encode_request(req);
  const auto j = nlohmann::json::parse(wire);
  CHECK(j["id"] == 77);
  CHECK(j["w"] == 1024);
  CHECK(j["points"][1][1] == 1000);
  const SegmenterRequest back = decode_request(wire);
  CHECK(back.id == req.id);
  CHECK(back.image.rgb == req.image.rgb);
  CHECK(back.points == req.points);
  CHECK(*back.dense == *req.dense);
  CHECK(nlohmann::json::parse(encode_request(make_request(1, random_slice(rng), false)))["dense"].is_null());

  OracleFloodSegmenter oracle;
  const SegmenterResponse resp = oracle.segment(req);
  const SegmenterResponse rb = decode_response(encode_response(resp, 1024, 1024), 1024, 1024);
  CHECK(rb.id == 77);
  REQUIRE(rb.channels.size() == 1);
  CHECK(rb.channels[0].mask == resp.channels[0].mask);
  CHECK(rb.channels[0].logits == resp.channels[0].logits);
  CHECK(rb.channels[0].predicted_iou == 1.0);
}

TEST_CASE("error payloads become backend errors") {
  CHECK_THROWS_AS(decode_response(encode_error(3, "nope"), 1024, 1024), BackendError);
  CHECK_THROWS_AS(decode_response("{\"id\":3,\"channels\":[]}", 1024, 1024), BackendError);
  CHECK_THROWS_AS(decode_response("not json", 1024, 1024), BackendError);
  CHECK_THROWS_AS(decode_request("{\"id\":1}"), InputError);
}

TEST_CASE("serve over a socket pair") {
  SocketPair sp;
  OracleFloodSegmenter oracle;
  std::thread server([&] {
    FdTransport t(sp.fds[1], sp.fds[1]);
    serve(t, oracle);
  });
  {
    ExternalSegmenter client(std::make_unique<FdTransport>(sp.fds[0], sp.fds[0]));
    std::mt19937_64 rng(8);
    for (int i = 0; i < 3; ++i) {
      const SegmenterRequest req = make_request(100 + i, random_slice(rng), i == 1);
      const SegmenterResponse got = client.segment(req);
      CHECK(got.id == req.id);
      CHECK(got.channels[0].mask == oracle.segment(req).channels[0].mask);
    }
  }
  server.join();
}

TEST_CASE("malformed requests get an error reply and the server keeps going") {
  SocketPair sp;
  FailingSegmenter failing;
  std::thread server([&] {
    FdTransport t(sp.fds[1], sp.fds[1]);
    serve(t, failing);
  });
  {
    FdTransport raw(sp.fds[0], sp.fds[0]);
    CHECK(nlohmann::json::parse(*read_frame(raw))["proto"] == 1);
    write_frame(raw, "{garbage");
    CHECK(nlohmann::json::parse(*read_frame(raw)).contains("error"));
    std::mt19937_64 rng(1);
    write_frame(raw, encode_request(make_request(5, random_slice(rng), false)));
    const auto reply = nlohmann::json::parse(*read_frame(raw));
    CHECK(reply["id"] == 5);
    CHECK(reply["error"].get<std::string>().find("model exploded") != std::string::npos);
    raw.close_write();
    CHECK_FALSE(read_frame(raw).has_value());
  }
  server.join();
}

TEST_CASE("concurrent clients are serialised and matched by id") {
  SocketPair sp;
  EchoSegmenter echo;
  std::thread server([&] {
    FdTransport t(sp.fds[1], sp.fds[1]);
    serve(t, echo);
  });
  {
    ExternalSegmenter client(std::make_unique<FdTransport>(sp.fds[0], sp.fds[0]));
    std::vector<std::thread> workers;
    std::atomic<int> ok{0};
    for (int w = 0; w < 3; ++w)
      workers.emplace_back([&, w] {
        std::mt19937_64 rng(w);
        for (int i = 0; i < 2; ++i) {
          const SegmenterRequest req = make_request(1000 * w + i, random_slice(rng), true);
          const SegmenterResponse got = client.segment(req);
          if (got.id == req.id && got.channels[0].mask == *req.dense) ++ok;
        }
      });
    for (auto& t : workers) t.join();
    CHECK(ok == 6);
  }
  server.join();
}

TEST_CASE("stdio bridge: echo round-trips dense masks bit-exactly") {
  auto client = make_segmenter(std::string("stdio:") + VOXFLOOD_CLI + " serve --mode echo");
  std::mt19937_64 rng(12);
  for (int i = 0; i < 3; ++i) {
    const SegmenterRequest req = make_request(i, random_slice(rng), true);
    CHECK(client->segment(req).channels[0].mask == *req.dense);
  }
}

TEST_CASE("stdio bridge: oracle mode matches the in-process oracle on 20 slices") {
  auto client = make_segmenter(std::string("stdio:") + VOXFLOOD_CLI + " serve --mode oracle --oracle-threshold 0.5");
  OracleFloodSegmenter oracle;
  std::mt19937_64 rng(13);
  int identical = 0;
  for (int i = 0; i < 20; ++i) {
    const SegmenterRequest req = make_request(i, random_slice(rng), false);
    identical += client->segment(req).channels[0].mask == oracle.segment(req).channels[0].mask;
  }
  CHECK(identical == 20);
}

TEST_CASE("tcp bridge") {
  TcpListener listener(0);
  CHECK(listener.port() > 0);
  EchoSegmenter echo;
  std::thread server([&] {
    auto conn = listener.accept();
    serve(*conn, echo);
  });
  {
    auto client = make_segmenter("tcp:127.0.0.1:" + std::to_string(listener.port()));
    std::mt19937_64 rng(3);
    const SegmenterRequest req = make_request(4, random_slice(rng), true);
    CHECK(client->segment(req).channels[0].mask == *req.dense);
  }
  server.join();
}

TEST_CASE("backend failures are reported as backend errors") {
  CHECK_THROWS_AS(make_segmenter("stdio:exit 0"), BackendError);
  CHECK_THROWS_AS(make_segmenter("tcp:127.0.0.1:1"), BackendError);
  CHECK_THROWS_AS(make_segmenter("carrier-pigeon"), InputError);
  CHECK(dynamic_cast<OracleFloodSegmenter*>(make_segmenter("oracle").get()) != nullptr);
}
