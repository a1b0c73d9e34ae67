#pragma once

// JSON-over-HTTP binding of the monitoring platform.
//
//   GET  /devices                          {offset, devices:[...]}
//   GET  /devices/{id}                     {offset, device}
//   GET  /devices/{id}/events?since=N      {offset, events:[...]}
//   GET  /events?since=N                   {offset, events:[...]}
//   POST /devices/{id}/commands            {cmd, operator?, at_ms?} -> {offset, ticket, nonce}
//   GET  /alarms?state=open|acked|closed   {offset, alarms:[...]}
//   POST /alarms/{id}/ack                  {operator, close?, at_ms?} -> {offset, entry}
//   POST /ingest                           {frame_hex, received_at_ms} -> {offset, entries}
//   POST /gateway/offline-scan             {now_ms, heartbeat_period_s, missed_heartbeats}
//   POST /gateway/devices/{id}/fetch       {now_ms} -> {offset, commands:[...]}
//
// Errors are {offset, error:{kind, message}} with 400, 404 or 409.

#include "srcwatch/platform.hpp"
#include "srcwatch/sim.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <string>

namespace srcwatch {

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 0;  // 0 picks a free port
  /// Time stamped on operator actions that carry no at_ms. Defaults to the
  /// newest log timestamp so a simulator-driven platform stays on sim time.
  std::function<std::int64_t()> clock;
};

class PlatformServer {
 public:
  PlatformServer(Platform& platform, ServerOptions options = {});
  ~PlatformServer();
  PlatformServer(const PlatformServer&) = delete;
  PlatformServer& operator=(const PlatformServer&) = delete;

  /// Binds and serves on a background thread. Throws std::runtime_error if
  /// the address cannot be bound.
  void start();
  /// Binds and serves on the calling thread until stop().
  void run();
  void stop();
  int port() const noexcept { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

/// PlatformPort over HTTP; platform errors come back as PlatformError.
class HttpPlatform final : public PlatformPort {
 public:
  explicit HttpPlatform(const std::string& base_url);
  ~HttpPlatform() override;

  std::vector<EventLogEntry> ingest(std::span<const std::uint8_t> frame,
                                    std::int64_t received_at_ms) override;
  std::vector<EventLogEntry> offline_scan(std::int64_t now_ms, double heartbeat_period_s,
                                          int missed_k) override;
  CommandTicket enqueue_command(std::uint32_t device_id, CommandKind cmd,
                                const std::string& operator_name, std::int64_t now_ms) override;
  std::vector<DownlinkCommand> fetch_pending(std::uint32_t device_id,
                                             std::int64_t now_ms) override;
  std::optional<DeviceRecord> device(std::uint32_t device_id) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace srcwatch
