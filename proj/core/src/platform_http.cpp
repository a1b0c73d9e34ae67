#include "srcwatch/platform_http.hpp"

#include "json_codec.hpp"

#include <httplib.h>

#include <thread>

namespace srcwatch {

using nlohmann::json;
namespace codec = json_codec;

namespace {

int status_for(PlatformError::Kind k) {
  switch (k) {
    case PlatformError::Kind::UnknownDevice:
    case PlatformError::Kind::UnknownAlarm: return 404;
    case PlatformError::Kind::NotOpen:
    case PlatformError::Kind::NotAcked: return 409;
    case PlatformError::Kind::CorruptEntry:
    case PlatformError::Kind::BadRequest: return 400;
  }
  return 500;
}

std::optional<PlatformError::Kind> error_kind_from_string(std::string_view s) {
  for (auto k : {PlatformError::Kind::UnknownDevice, PlatformError::Kind::UnknownAlarm,
                 PlatformError::Kind::NotOpen, PlatformError::Kind::NotAcked,
                 PlatformError::Kind::CorruptEntry, PlatformError::Kind::BadRequest}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

json entries_json(const std::vector<EventLogEntry>& entries) {
  json a = json::array();
  for (const auto& e : entries) a.push_back(codec::entry_to_json(e));
  return a;
}

json command_json(const DownlinkCommand& c) {
  const auto bytes = encode_command(c);
  return json{{"version", c.version},
              {"device_id", c.device_id},
              {"cmd", to_string(c.cmd)},
              {"cmd_byte", static_cast<unsigned>(c.cmd)},
              {"nonce", c.nonce},
              {"hex", to_hex(bytes)}};
}

std::uint32_t parse_id(const std::string& text) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(text, &used);
    if (used != text.size() || v > 0xFFFFFFFFull) throw std::out_of_range("id");
    return static_cast<std::uint32_t>(v);
  } catch (const std::exception&) {
    throw PlatformError(PlatformError::Kind::BadRequest, "bad id '" + text + "'");
  }
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  auto j = json::parse(req.body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw PlatformError(PlatformError::Kind::BadRequest, "body must be a JSON object");
  }
  return j;
}

template <typename T>
T field(const json& body, const char* key) {
  if (!body.contains(key)) {
    throw PlatformError(PlatformError::Kind::BadRequest, std::string("missing field '") + key + "'");
  }
  try {
    return body.at(key).get<T>();
  } catch (const json::exception&) {
    throw PlatformError(PlatformError::Kind::BadRequest, std::string("bad field '") + key + "'");
  }
}

template <typename T>
T field_or(const json& body, const char* key, T fallback) {
  return body.contains(key) ? field<T>(body, key) : fallback;
}

}  // namespace

// --- server -----------------------------------------------------------------

struct PlatformServer::Impl {
  Platform& platform;
  ServerOptions options;
  httplib::Server server;
  std::thread thread;

  Impl(Platform& p, ServerOptions o) : platform(p), options(std::move(o)) {
    if (!options.clock) {
      options.clock = [this] {
        const auto log = platform.log();
        return log.empty() ? std::int64_t{0} : log.back().timestamp_ms;
      };
    }
    server.set_tcp_nodelay(true);
    routes();
  }

  void reply(httplib::Response& res, json body, int status = 200) {
    body["offset"] = platform.offset();
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  template <typename F>
  httplib::Server::Handler wrap(F&& f) {
    return [this, f = std::forward<F>(f)](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const PlatformError& e) {
        reply(res,
              json{{"error", {{"kind", to_string(e.kind())}, {"message", e.what()}}}},
              status_for(e.kind()));
      } catch (const FrameError& e) {
        reply(res, json{{"error", {{"kind", "BadFrame"}, {"message", e.what()}}}}, 400);
      } catch (const std::invalid_argument& e) {
        reply(res, json{{"error", {{"kind", "BadRequest"}, {"message", e.what()}}}}, 400);
      }
    };
  }

  void routes() {
    server.Get("/devices", wrap([this](const httplib::Request&, httplib::Response& res) {
      const auto state = platform.snapshot();
      json a = json::array();
      for (const auto& [id, d] : state->devices) a.push_back(codec::device_to_json(d));
      reply(res, {{"devices", a}});
    }));

    server.Get(R"(/devices/(\d+))", wrap([this](const httplib::Request& req,
                                                  httplib::Response& res) {
      const auto id = parse_id(req.matches[1]);
      const auto state = platform.snapshot();
      const auto it = state->devices.find(id);
      if (it == state->devices.end()) {
        throw PlatformError(PlatformError::Kind::UnknownDevice,
                            "unknown device " + std::to_string(id));
      }
      json pending = json::array();
      if (const auto p = state->pending.find(id); p != state->pending.end()) {
        for (const auto& c : p->second) pending.push_back(codec::pending_to_json(c));
      }
      json alarm = nullptr;
      if (const auto a = state->open_alarm_for(id)) alarm = *a;
      reply(res, {{"device", codec::device_to_json(it->second)},
                  {"pending", pending},
                  {"open_alarm_id", alarm}});
    }));

    server.Get(R"(/devices/(\d+)/events)", wrap([this](const httplib::Request& req,
                                                         httplib::Response& res) {
      const auto id = parse_id(req.matches[1]);
      reply(res, {{"events", entries_json(platform.events_since(since(req), id))}});
    }));

    server.Get("/events", wrap([this](const httplib::Request& req, httplib::Response& res) {
      reply(res, {{"events", entries_json(platform.events_since(since(req)))}});
    }));

    server.Post(R"(/devices/(\d+)/commands)", wrap([this](const httplib::Request& req,
                                                            httplib::Response& res) {
      const auto id = parse_id(req.matches[1]);
      const auto body = parse_body(req);
      const auto name = field<std::string>(body, "cmd");
      const auto cmd = command_from_string(name);
      if (!cmd) throw PlatformError(PlatformError::Kind::BadRequest, "unknown command " + name);
      const auto t = platform.enqueue_command(
          id, *cmd, field_or<std::string>(body, "operator", "operator"),
          field_or<std::int64_t>(body, "at_ms", options.clock()));
      reply(res, {{"ticket", t.ticket}, {"nonce", t.nonce}, {"entry_offset", t.offset}}, 202);
    }));

    server.Get("/alarms", wrap([this](const httplib::Request& req, httplib::Response& res) {
      std::optional<AlarmState> filter;
      if (req.has_param("state")) {
        auto text = req.get_param_value("state");
        if (!text.empty()) text[0] = static_cast<char>(std::toupper(text[0]));
        filter = alarm_state_from_string(text);
        if (!filter) {
          throw PlatformError(PlatformError::Kind::BadRequest,
                              "unknown state " + req.get_param_value("state"));
        }
      }
      const auto state = platform.snapshot();
      json a = json::array();
      for (const auto& [id, alarm] : state->alarms) {
        if (!filter || alarm.state == *filter) a.push_back(codec::alarm_to_json(alarm));
      }
      reply(res, {{"alarms", a}});
    }));

    server.Post(R"(/alarms/(\d+)/ack)", wrap([this](const httplib::Request& req,
                                                      httplib::Response& res) {
      const auto id = parse_id(req.matches[1]);
      const auto body = parse_body(req);
      const auto entry = platform.ack_alarm(id, field<std::string>(body, "operator"),
                                            field_or<std::int64_t>(body, "at_ms", options.clock()),
                                            field_or<bool>(body, "close", false));
      reply(res, {{"entry", codec::entry_to_json(entry)}});
    }));

    server.Post("/ingest", wrap([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = parse_body(req);
      const auto bytes = from_hex(field<std::string>(body, "frame_hex"));
      const auto frame = decode_frame(bytes);
      const auto entries = platform.ingest(frame, field<std::int64_t>(body, "received_at_ms"));
      reply(res, {{"entries", entries_json(entries)}});
    }));

    server.Post("/gateway/offline-scan", wrap([this](const httplib::Request& req,
                                                      httplib::Response& res) {
      const auto body = parse_body(req);
      const auto entries = platform.offline_scan(field<std::int64_t>(body, "now_ms"),
                                                 field<double>(body, "heartbeat_period_s"),
                                                 field<int>(body, "missed_heartbeats"));
      reply(res, {{"entries", entries_json(entries)}});
    }));

    server.Post(R"(/gateway/devices/(\d+)/fetch)", wrap([this](const httplib::Request& req,
                                                                 httplib::Response& res) {
      const auto id = parse_id(req.matches[1]);
      const auto body = parse_body(req);
      json a = json::array();
      for (const auto& c : platform.fetch_pending(id, field<std::int64_t>(body, "now_ms"))) {
        a.push_back(command_json(c));
      }
      reply(res, {{"commands", a}});
    }));
  }

  static std::uint64_t since(const httplib::Request& req) {
    if (!req.has_param("since")) return 0;
    const auto text = req.get_param_value("since");
    try {
      std::size_t used = 0;
      const auto v = std::stoull(text, &used);
      if (used == text.size()) return v;
    } catch (const std::exception&) {
    }
    throw PlatformError(PlatformError::Kind::BadRequest, "bad since '" + text + "'");
  }
};

PlatformServer::PlatformServer(Platform& platform, ServerOptions options)
    : impl_(std::make_unique<Impl>(platform, std::move(options))) {}

PlatformServer::~PlatformServer() { stop(); }

namespace {
int bind(httplib::Server& server, const ServerOptions& o) {
  if (o.port == 0) {
    const int port = server.bind_to_any_port(o.host);
    if (port <= 0) throw std::runtime_error("cannot bind " + o.host);
    return port;
  }
  if (!server.bind_to_port(o.host, o.port)) {
    throw std::runtime_error("cannot bind " + o.host + ":" + std::to_string(o.port));
  }
  return o.port;
}
}  // namespace

void PlatformServer::start() {
  port_ = bind(impl_->server, impl_->options);
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void PlatformServer::run() {
  port_ = bind(impl_->server, impl_->options);
  impl_->server.listen_after_bind();
}

void PlatformServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

// --- client -----------------------------------------------------------------

struct HttpPlatform::Impl {
  httplib::Client client;

  explicit Impl(const std::string& base) : client(base) {
    client.set_keep_alive(true);
    client.set_tcp_nodelay(true);
    client.set_connection_timeout(5);
    client.set_read_timeout(30);
  }

  json call(const char* method, const std::string& path, const json* body = nullptr) {
    httplib::Result res = method[0] == 'G'
                              ? client.Get(path)
                              : client.Post(path, body ? body->dump() : "{}", "application/json");
    if (!res) {
      throw std::runtime_error("platform unreachable: " + httplib::to_string(res.error()));
    }
    auto j = json::parse(res->body, nullptr, false);
    if (j.is_discarded()) throw std::runtime_error("platform sent non-JSON for " + path);
    if (res->status >= 400) {
      const auto& err = j.value("error", json::object());
      const auto kind = error_kind_from_string(err.value("kind", ""));
      const auto message = err.value("message", "HTTP " + std::to_string(res->status));
      if (kind) throw PlatformError(*kind, message);
      throw std::runtime_error(message);
    }
    return j;
  }
};

HttpPlatform::HttpPlatform(const std::string& base_url)
    : impl_(std::make_unique<Impl>(base_url)) {}

HttpPlatform::~HttpPlatform() = default;

namespace {
std::vector<EventLogEntry> entries_from(const json& j) {
  std::vector<EventLogEntry> out;
  for (const auto& e : j.at("entries")) out.push_back(codec::entry_from_json(e));
  return out;
}
}  // namespace

std::vector<EventLogEntry> HttpPlatform::ingest(std::span<const std::uint8_t> frame,
                                                std::int64_t received_at_ms) {
  const json body{{"frame_hex", to_hex(frame)}, {"received_at_ms", received_at_ms}};
  return entries_from(impl_->call("POST", "/ingest", &body));
}

std::vector<EventLogEntry> HttpPlatform::offline_scan(std::int64_t now_ms,
                                                      double heartbeat_period_s, int missed_k) {
  const json body{{"now_ms", now_ms},
                  {"heartbeat_period_s", heartbeat_period_s},
                  {"missed_heartbeats", missed_k}};
  return entries_from(impl_->call("POST", "/gateway/offline-scan", &body));
}

CommandTicket HttpPlatform::enqueue_command(std::uint32_t device_id, CommandKind cmd,
                                            const std::string& operator_name,
                                            std::int64_t now_ms) {
  const json body{{"cmd", to_string(cmd)}, {"operator", operator_name}, {"at_ms", now_ms}};
  const auto j =
      impl_->call("POST", "/devices/" + std::to_string(device_id) + "/commands", &body);
  return CommandTicket{j.at("ticket").get<std::uint64_t>(), j.at("nonce").get<std::uint32_t>(),
                       j.at("entry_offset").get<std::uint64_t>()};
}

std::vector<DownlinkCommand> HttpPlatform::fetch_pending(std::uint32_t device_id,
                                                         std::int64_t now_ms) {
  const json body{{"now_ms", now_ms}};
  const auto j =
      impl_->call("POST", "/gateway/devices/" + std::to_string(device_id) + "/fetch", &body);
  std::vector<DownlinkCommand> out;
  for (const auto& c : j.at("commands")) {
    out.push_back(decode_command(from_hex(c.at("hex").get<std::string>())));
  }
  return out;
}

std::optional<DeviceRecord> HttpPlatform::device(std::uint32_t device_id) {
  try {
    const auto j = impl_->call("GET", "/devices/" + std::to_string(device_id));
    return codec::device_from_json(j.at("device"));
  } catch (const PlatformError& e) {
    if (e.kind() == PlatformError::Kind::UnknownDevice) return std::nullopt;
    throw;
  }
}

}  // namespace srcwatch
