#include "srcwatch/platform_http.hpp"

#include <gtest/gtest.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <thread>

using namespace srcwatch;
using nlohmann::json;

namespace {

class HttpApi : public ::testing::Test {
 protected:
  void SetUp() override {
    server = std::make_unique<PlatformServer>(platform);
    server->start();
    client = std::make_unique<httplib::Client>("127.0.0.1", server->port());
  }
  void TearDown() override { server->stop(); }

  std::pair<int, json> get(const std::string& path) {
    auto r = client->Get(path);
    EXPECT_TRUE(r);
    return {r->status, json::parse(r->body)};
  }
  std::pair<int, json> post(const std::string& path, const json& body) {
    auto r = client->Post(path, body.dump(), "application/json");
    EXPECT_TRUE(r);
    return {r->status, json::parse(r->body)};
  }

  std::string frame_hex(std::uint32_t id, std::uint16_t seq, MsgType type) {
    UplinkFrame f;
    f.device_id = id;
    f.seq = seq;
    f.msg_type = type;
    return to_hex(encode_frame(f));
  }

  Platform platform;
  std::unique_ptr<PlatformServer> server;
  std::unique_ptr<httplib::Client> client;
};

}  // namespace

TEST_F(HttpApi, IngestAndDeviceViews) {
  auto [st, body] = post("/ingest", {{"frame_hex", frame_hex(42, 1, MsgType::Heartbeat)},
                                     {"received_at_ms", 1000}});
  EXPECT_EQ(st, 200);
  EXPECT_EQ(body["entries"].size(), 2u);
  EXPECT_EQ(body["offset"], 2);

  std::tie(st, body) = get("/devices");
  EXPECT_EQ(st, 200);
  ASSERT_EQ(body["devices"].size(), 1u);
  EXPECT_EQ(body["devices"][0]["device_id"], 42);
  EXPECT_EQ(body["devices"][0]["status"], "Online");

  std::tie(st, body) = get("/devices/42");
  EXPECT_EQ(st, 200);
  EXPECT_TRUE(body["open_alarm_id"].is_null());
  EXPECT_EQ(body["pending"].size(), 0u);

  std::tie(st, body) = get("/devices/43");
  EXPECT_EQ(st, 404);
  EXPECT_EQ(body["error"]["kind"], "UnknownDevice");
  EXPECT_EQ(body["offset"], 2);
}

TEST_F(HttpApi, AlarmAckFlow) {
  post("/ingest", {{"frame_hex", frame_hex(7, 1, MsgType::Alarm)}, {"received_at_ms", 5}});
  auto [st, body] = get("/alarms?state=open");
  ASSERT_EQ(body["alarms"].size(), 1u);
  const auto id = body["alarms"][0]["alarm_id"].get<std::uint64_t>();
  EXPECT_EQ(get("/devices/7").second["open_alarm_id"], id);

  std::tie(st, body) = post("/alarms/" + std::to_string(id) + "/ack", {{"operator", "kim"}});
  EXPECT_EQ(st, 200);
  EXPECT_EQ(body["entry"]["kind"], "AlarmAcked");
  EXPECT_EQ(get("/alarms?state=Acked").second["alarms"].size(), 1u);
  EXPECT_EQ(get("/alarms?state=open").second["alarms"].size(), 0u);
  EXPECT_EQ(get("/devices/7").second["device"]["status"], "Online");

  std::tie(st, body) = post("/alarms/" + std::to_string(id) + "/ack", {{"operator", "kim"}});
  EXPECT_EQ(st, 409);
  EXPECT_EQ(body["error"]["kind"], "NotOpen");
  std::tie(st, body) = post("/alarms/99/ack", {{"operator", "kim"}});
  EXPECT_EQ(st, 404);
  std::tie(st, body) = post("/alarms/" + std::to_string(id) + "/ack", json::object());
  EXPECT_EQ(st, 400);
  std::tie(st, body) =
      post("/alarms/" + std::to_string(id) + "/ack", {{"operator", "kim"}, {"close", true}});
  EXPECT_EQ(st, 200);
  EXPECT_EQ(get("/alarms?state=closed").second["alarms"].size(), 1u);
  EXPECT_EQ(get("/alarms?state=bogus").first, 400);
}

TEST_F(HttpApi, CommandsAndGatewayFetch) {
  post("/ingest", {{"frame_hex", frame_hex(9, 1, MsgType::Heartbeat)}, {"received_at_ms", 5}});
  auto [st, body] = post("/devices/9/commands", {{"cmd", "Wake"}, {"operator", "lee"}});
  EXPECT_EQ(st, 202);
  EXPECT_EQ(body["ticket"], 1);
  post("/devices/9/commands", {{"cmd", "Locate"}});
  EXPECT_EQ(get("/devices/9").second["pending"].size(), 2u);

  EXPECT_EQ(post("/devices/9/commands", {{"cmd", "Explode"}}).first, 400);
  EXPECT_EQ(post("/devices/10/commands", {{"cmd", "Wake"}}).first, 404);

  std::tie(st, body) = post("/gateway/devices/9/fetch", {{"now_ms", 6}});
  ASSERT_EQ(body["commands"].size(), 2u);
  EXPECT_EQ(body["commands"][0]["cmd"], "Wake");
  EXPECT_EQ(body["commands"][1]["cmd"], "Locate");
  EXPECT_EQ(post("/gateway/devices/9/fetch", {{"now_ms", 7}}).second["commands"].size(), 0u);

  // Operator actions without at_ms are stamped with the newest log time.
  const auto events = get("/devices/9/events?since=0").second["events"];
  for (const auto& e : events) EXPECT_LE(e.at("ts_ms").get<std::int64_t>(), 7);
}

TEST_F(HttpApi, EventsSinceAndOfflineScan) {
  post("/ingest", {{"frame_hex", frame_hex(1, 1, MsgType::Heartbeat)}, {"received_at_ms", 0}});
  post("/ingest", {{"frame_hex", frame_hex(2, 1, MsgType::Heartbeat)}, {"received_at_ms", 0}});
  EXPECT_EQ(get("/events?since=0").second["events"].size(), 4u);
  EXPECT_EQ(get("/events?since=3").second["events"].size(), 1u);
  EXPECT_EQ(get("/devices/2/events?since=0").second["events"].size(), 2u);
  EXPECT_EQ(get("/events?since=x").first, 400);

  auto [st, body] = post("/gateway/offline-scan",
                         {{"now_ms", 10'801'000}, {"heartbeat_period_s", 3600}, {"missed_heartbeats", 3}});
  EXPECT_EQ(st, 200);
  EXPECT_EQ(body["entries"].size(), 2u);
  EXPECT_EQ(get("/devices/1").second["device"]["status"], "Offline");
}

TEST_F(HttpApi, BadFramesAndBodies) {
  auto hex = frame_hex(1, 1, MsgType::Heartbeat);
  hex[4] = hex[4] == '0' ? '1' : '0';
  auto [st, body] = post("/ingest", {{"frame_hex", hex}, {"received_at_ms", 0}});
  EXPECT_EQ(st, 400);
  EXPECT_EQ(body["error"]["kind"], "BadFrame");
  EXPECT_EQ(post("/ingest", {{"frame_hex", "zz"}, {"received_at_ms", 0}}).first, 400);
  auto r = client->Post("/ingest", "[1,2", "application/json");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 400);
  EXPECT_EQ(platform.offset(), 0u);
}

TEST_F(HttpApi, HttpPlatformPortMatchesInProcess) {
  HttpPlatform remote("http://127.0.0.1:" + std::to_string(server->port()));
  UplinkFrame f;
  f.device_id = 5;
  f.seq = 1;
  f.msg_type = MsgType::Alarm;
  const auto bytes = encode_frame(f);
  const auto entries = remote.ingest(bytes, 100);
  ASSERT_EQ(entries.size(), 3u);
  EXPECT_EQ(entries, platform.log());
  EXPECT_EQ(remote.device(5), platform.snapshot()->devices.at(5));
  EXPECT_FALSE(remote.device(6));

  const auto t = remote.enqueue_command(5, CommandKind::Silence, "op", 200);
  const auto cmds = remote.fetch_pending(5, 300);
  ASSERT_EQ(cmds.size(), 1u);
  EXPECT_EQ(cmds[0].nonce, t.nonce);
  try {
    remote.enqueue_command(77, CommandKind::Wake, "op", 0);
    FAIL();
  } catch (const PlatformError& e) {
    EXPECT_EQ(e.kind(), PlatformError::Kind::UnknownDevice);
  }
  EXPECT_TRUE(remote.offline_scan(400, 3600, 3).empty());
}

TEST_F(HttpApi, ConcurrentClientsReplayToLiveState) {
  std::vector<std::thread> threads;
  std::atomic<int> failures{0};
  for (std::uint32_t id = 1; id <= 4; ++id) {
    threads.emplace_back([&, id] {
      httplib::Client c("127.0.0.1", server->port());
      for (std::uint16_t s = 1; s <= 25; ++s) {
        UplinkFrame f;
        f.device_id = id;
        f.seq = s;
        f.msg_type = s % 10 == 0 ? MsgType::Alarm : MsgType::Heartbeat;
        const json body{{"frame_hex", to_hex(encode_frame(f))}, {"received_at_ms", s * 100}};
        auto r = c.Post("/ingest", body.dump(), "application/json");
        if (!r || r->status != 200) ++failures;
        if (s % 10 == 0) {
          const auto alarms = json::parse(c.Get("/alarms?state=open")->body)["alarms"];
          for (const auto& a : alarms) {
            c.Post("/alarms/" + std::to_string(a["alarm_id"].get<int>()) + "/ack",
                   json{{"operator", "op"}}.dump(), "application/json");
          }
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(failures, 0);
  EXPECT_EQ(canonical_state(replay_log(platform.log())), canonical_state(*platform.snapshot()));
}
