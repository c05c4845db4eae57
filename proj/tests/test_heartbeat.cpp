#include "oracles.hpp"
#include "usvnav/heartbeat.hpp"
#include "usvnav/tcp.hpp"

#include <doctest.h>

#include <chrono>
#include <cstdio>
#include <thread>

using namespace usvnav;
using namespace usvnav::heartbeat;
using namespace std::chrono_literals;

namespace {

HeartbeatSentence sample() {
  HeartbeatSentence s;
  s.date = "081122";
  s.time = "134501";
  s.lat_udeg = 21'309'900;
  s.lat_hemi = 'N';
  s.lon_udeg = 157'888'100;
  s.lon_hemi = 'W';
  s.team_id = "OUXT";
  s.mode = SystemMode::Autonomous;
  return s;
}

DecodeErrorKind error_of(std::string_view line) {
  try {
    decode(line);
  } catch (const DecodeError& e) {
    return e.kind();
  }
  FAIL("decode accepted " << line);
  return DecodeErrorKind::Framing;
}

}  // namespace

TEST_CASE("encoding") {
  SUBCASE("all-zero sentence") {
    const HeartbeatSentence s;
    const std::string payload = "RXHRB,000000,000000,0.000000,N,0.000000,E,OUXT,2";
    char cs[3];
    std::snprintf(cs, sizeof cs, "%02X", oracle::xor_bytes(payload));
    CHECK(encode(s) == "$" + payload + "*" + cs + "\r\n");
  }
  SUBCASE("six fraction digits") {
    const std::string line = encode(sample());
    CHECK(line.find(",21.309900,N,157.888100,W,") != std::string::npos);
    CHECK(line.ends_with("\r\n"));
  }
  SUBCASE("invalid fields are rejected") {
    auto s = sample();
    s.time = "246000";
    CHECK_THROWS_AS(encode(s), std::invalid_argument);
    s = sample();
    s.lat_udeg = 90'000'001;
    CHECK_THROWS_AS(encode(s), std::invalid_argument);
    s = sample();
    s.team_id = "OU XT";
    CHECK_THROWS_AS(encode(s), std::invalid_argument);
    s = sample();
    s.mode = static_cast<SystemMode>(4);
    CHECK_THROWS_AS(encode(s), std::invalid_argument);
  }
}

TEST_CASE("decoding") {
  SUBCASE("round trip") {
    Rng rng(61);
    for (int i = 0; i < 1000; ++i) {
      HeartbeatSentence s;
      s.date = "150623";
      s.time = "235959";
      s.lat_udeg = static_cast<std::uint32_t>(rng.uniform() * 90e6);
      s.lat_hemi = rng.uniform() < 0.5 ? 'N' : 'S';
      s.lon_udeg = static_cast<std::uint32_t>(rng.uniform() * 180e6);
      s.lon_hemi = rng.uniform() < 0.5 ? 'E' : 'W';
      s.mode = static_cast<SystemMode>(1 + static_cast<int>(rng.uniform() * 3));
      CHECK(decode(encode(s)) == s);
    }
  }
  SUBCASE("error kinds") {
    std::string line = encode(sample());
    line.pop_back();
    line.pop_back();
    std::string bad = line;
    bad[bad.size() - 1] = bad.back() == '0' ? '1' : '0';
    CHECK(error_of(bad) == DecodeErrorKind::Checksum);
    CHECK(error_of(line.substr(1)) == DecodeErrorKind::Framing);
    CHECK(error_of("") == DecodeErrorKind::Framing);

    const auto resign = [](std::string payload) {
      char cs[3];
      std::snprintf(cs, sizeof cs, "%02X", oracle::xor_bytes(payload));
      return "$" + payload + "*" + cs;
    };
    CHECK(error_of(resign("RXHRB,081122,134501,21.309900,N,157.888100,W,OUXT")) == DecodeErrorKind::FieldCount);
    CHECK(error_of(resign("RXHRB,081122,134501,91.000000,N,157.888100,W,OUXT,2")) == DecodeErrorKind::Range);
    CHECK(error_of(resign("RXHRB,081122,134501,21.309900,N,157.888100,W,OUXT,4")) == DecodeErrorKind::Range);
    CHECK(error_of(resign("RXHRB,081122,134501,21.3099,N,157.888100,W,OUXT,2")) == DecodeErrorKind::Range);
    CHECK(error_of(resign("GPGGA,081122,134501,21.309900,N,157.888100,W,OUXT,2")) == DecodeErrorKind::Framing);
  }
  SUBCASE("any single-byte corruption is detected") {
    std::string line = encode(sample());
    line.resize(line.size() - 2);
    for (std::size_t i = 0; i < line.size(); ++i) {
      for (int b = 1; b < 256; ++b) {
        if (static_cast<char>(b) == line[i]) continue;
        std::string bad = line;
        bad[i] = static_cast<char>(b);
        CHECK_THROWS_AS(decode(bad), DecodeError);
      }
    }
  }
}

TEST_CASE("position conversion") {
  const GeoDatum datum;
  const auto s = make_sentence({0.0, 0.0, 0.0, SystemMode::Autonomous}, datum, "OUXT");
  CHECK(s.lat_udeg == 21'309'900);
  CHECK(s.lat_hemi == 'N');
  CHECK(s.lon_udeg == 157'888'100);
  CHECK(s.lon_hemi == 'W');
  const auto north = make_sentence({0.0, 0.0, 111.32, SystemMode::Autonomous}, datum, "OUXT");
  CHECK(north.lat_udeg == 21'310'900);
  const auto late = make_sentence({525.9, 0.0, 0.0, SystemMode::Killed}, datum, "OUXT", {"081122", 86000});
  CHECK(late.time == "000205");
  CHECK(late.mode == SystemMode::Killed);
}

TEST_CASE("line assembly is independent of segmentation") {
  const std::string stream = encode(sample()) + encode(HeartbeatSentence{}) + "partial";
  Rng rng(62);
  for (int trial = 0; trial < 100; ++trial) {
    LineAssembler la;
    std::vector<std::string> lines;
    std::size_t i = 0;
    while (i < stream.size()) {
      const auto n = std::min<std::size_t>(stream.size() - i, 1 + static_cast<std::size_t>(rng.uniform() * 20));
      for (auto& l : la.feed(std::string_view(stream).substr(i, n))) lines.push_back(l);
      i += n;
    }
    REQUIRE(lines.size() == 2);
    CHECK(decode(lines[0]) == sample());
    CHECK(decode(lines[1]) == HeartbeatSentence{});
    CHECK(la.pending() == 7);
  }
}

TEST_CASE("snapshot channel keeps the newest value") {
  SnapshotChannel<int> ch;
  CHECK_FALSE(ch.latest().has_value());
  ch.publish(1);
  ch.publish(2);
  CHECK(*ch.latest() == 2);
}

TEST_CASE("mock server") {
  MockServer server;
  REQUIRE(server.port() != 0);
  SUBCASE("byte-at-a-time writes from two clients") {
    auto a = tcp::connect_to("127.0.0.1", server.port());
    auto b = tcp::connect_to("127.0.0.1", server.port());
    tcp::set_nodelay(a.get());
    const std::string la = encode(sample());
    const std::string lb = encode(HeartbeatSentence{});
    for (std::size_t i = 0; i < std::max(la.size(), lb.size()); ++i) {
      if (i < la.size()) REQUIRE(tcp::send_all(a.get(), la.substr(i, 1)));
      if (i < lb.size()) REQUIRE(tcp::send_all(b.get(), lb.substr(i, 1)));
    }
    REQUIRE(server.wait_for_valid(2, 2s));
    const auto recs = server.records();
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].connection != recs[1].connection);
  }
  SUBCASE("garbage then a valid line") {
    auto c = tcp::connect_to("127.0.0.1", server.port());
    REQUIRE(tcp::send_all(c.get(), "hello there\r\n" + encode(sample())));
    REQUIRE(server.wait_for_valid(1, 2s));
    const auto recs = server.records();
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].error == DecodeErrorKind::Framing);
    CHECK_FALSE(recs[0].sentence.has_value());
    CHECK(recs[1].sentence == sample());
  }
}

TEST_CASE("client sends at the configured rate") {
  MockServer server;
  SnapshotChannel<VehicleSnapshot> channel;
  channel.publish({12.0, 5.0, -3.0, SystemMode::Autonomous});
  ClientConfig cfg;
  cfg.port = server.port();
  cfg.rate_hz = 10.0;
  HeartbeatClient client(cfg, channel);
  client.start();
  REQUIRE(server.wait_for_valid(5, 3s));
  client.stop();
  const auto recs = server.records();
  for (const auto& r : recs) {
    REQUIRE(r.sentence.has_value());
    CHECK(r.sentence->time == "000012");
  }
  CHECK(client.sent() >= 5);
  CHECK(client.connect_failures() == 0);
}

TEST_CASE("client retries while the server is down") {
  std::uint16_t port = 0;
  { auto probe = tcp::listen_on(0, port); }
  SnapshotChannel<VehicleSnapshot> channel;
  channel.publish({});
  ClientConfig cfg;
  cfg.port = port;
  cfg.backoff_initial = 20ms;
  cfg.backoff_max = 40ms;
  HeartbeatClient client(cfg, channel);
  client.start();
  std::this_thread::sleep_for(200ms);
  CHECK(client.connect_failures() >= 2);
  CHECK_FALSE(client.connected());
  client.stop();
  CHECK_THROWS_AS(HeartbeatClient(ClientConfig{.rate_hz = 0.0}, channel), std::invalid_argument);
}
