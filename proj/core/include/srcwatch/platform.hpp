#pragma once

// Cloud side: device registry, alarm lifecycle, offline detection and the
// downlink command queue, all derived from an append-only event log.
//
// Every mutation is expressed as log entries first; the live state is the
// fold of apply() over the log, which is also how a restart rebuilds it.

#include "srcwatch/frames.hpp"
#include "srcwatch/nmea.hpp"

#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace srcwatch {

enum class DeviceStatus : std::uint8_t { Online, Offline, Alarming };
enum class AlarmState : std::uint8_t { Open, Acked, Closed };

struct DeviceRecord {
  std::uint32_t device_id = 0;
  std::int64_t last_seen_ms = 0;
  DeviceStatus status = DeviceStatus::Online;
  std::optional<GeoFix> last_fix;
  std::uint16_t battery_dAh = 0;
  std::optional<std::uint16_t> seq_high;
  std::uint8_t last_flags = 0;
  std::uint64_t frames_in = 0;

  bool operator==(const DeviceRecord&) const = default;
};

struct AlarmRecord {
  std::uint64_t alarm_id = 0;
  std::uint32_t device_id = 0;
  std::int64_t opened_at_ms = 0;
  std::optional<GeoFix> fix_at_open;
  AlarmState state = AlarmState::Open;
  std::optional<std::string> acked_by;

  bool operator==(const AlarmRecord&) const = default;
};

struct PendingCommand {
  std::uint64_t ticket = 0;
  std::uint32_t device_id = 0;
  CommandKind cmd = CommandKind::Ping;
  std::string operator_name;
  std::uint32_t nonce = 0;
  std::int64_t queued_at_ms = 0;

  bool operator==(const PendingCommand&) const = default;
};

enum class EventKind : std::uint8_t {
  DeviceRegistered,
  FrameIn,
  AlarmOpened,
  AlarmAcked,
  AlarmClosed,
  WentOffline,
  CameOnline,
  CommandQueued,
  CommandDelivered,
};

std::string_view to_string(EventKind k) noexcept;
std::string_view to_string(DeviceStatus s) noexcept;
std::string_view to_string(AlarmState s) noexcept;
std::optional<EventKind> event_kind_from_string(std::string_view name) noexcept;
std::optional<AlarmState> alarm_state_from_string(std::string_view name) noexcept;

struct EventLogEntry {
  std::uint64_t offset = 0;
  std::int64_t timestamp_ms = 0;
  EventKind kind = EventKind::FrameIn;
  std::uint32_t device_id = 0;
  std::string payload;  // canonical JSON object, sorted keys

  bool operator==(const EventLogEntry&) const = default;
};

struct PlatformState {
  std::map<std::uint32_t, DeviceRecord> devices;
  std::map<std::uint64_t, AlarmRecord> alarms;
  std::map<std::uint32_t, std::deque<PendingCommand>> pending;
  std::uint64_t next_offset = 0;
  std::uint64_t next_alarm_id = 1;
  std::uint64_t next_ticket = 1;

  bool operator==(const PlatformState&) const = default;

  std::optional<std::uint64_t> open_alarm_for(std::uint32_t device_id) const;
};

class PlatformError : public std::runtime_error {
 public:
  enum class Kind { UnknownDevice, UnknownAlarm, NotOpen, NotAcked, CorruptEntry, BadRequest };
  PlatformError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

std::string_view to_string(PlatformError::Kind k) noexcept;

/// Applies one entry. Throws PlatformError(CorruptEntry) on an offset gap,
/// an unparsable payload, or a transition the state does not allow.
void apply(PlatformState& state, const EventLogEntry& entry);

/// Rebuilds state from `entries` in offset order, starting at offset 0.
PlatformState replay_log(std::span<const EventLogEntry> entries);

/// Canonical JSON of the whole state; equal states give equal strings.
std::string canonical_state(const PlatformState& state);

/// One log line (no trailing newline) and its inverse. parse_entry throws
/// PlatformError(CorruptEntry).
std::string serialize_entry(const EventLogEntry& entry);
EventLogEntry parse_entry(std::string_view line);

/// Reads a log file written by Platform; throws CorruptEntry on bad lines.
std::vector<EventLogEntry> read_log_file(const std::filesystem::path& path);

enum class UnknownDevicePolicy { AutoRegister, Reject };

struct CommandTicket {
  std::uint64_t ticket = 0;
  std::uint32_t nonce = 0;
  std::uint64_t offset = 0;  // offset of the CommandQueued entry
};

struct PlatformOptions {
  UnknownDevicePolicy unknown_devices = UnknownDevicePolicy::AutoRegister;
  /// When set, the log is loaded from and appended to this file.
  std::optional<std::filesystem::path> log_path;
};

/// Single-writer service object. Mutations serialize on an internal mutex;
/// readers get immutable snapshots and may run concurrently.
class Platform {
 public:
  explicit Platform(PlatformOptions options = {});
  Platform(const Platform&) = delete;
  Platform& operator=(const Platform&) = delete;

  /// `frame` must already be CRC-validated. Retransmissions (seq not above
  /// seq_high) are logged but never open alarms.
  std::vector<EventLogEntry> ingest(const UplinkFrame& frame, std::int64_t received_at_ms);

  /// Marks Online devices silent for more than k heartbeat periods as Offline.
  std::vector<EventLogEntry> offline_scan(std::int64_t now_ms, double heartbeat_period_s,
                                          int missed_k);

  CommandTicket enqueue_command(std::uint32_t device_id, CommandKind cmd,
                                std::string operator_name, std::int64_t now_ms);

  /// Drains the device's queue in FIFO order.
  std::vector<DownlinkCommand> fetch_pending(std::uint32_t device_id, std::int64_t now_ms);

  /// Open -> Acked, or Acked -> Closed when `close` is set.
  EventLogEntry ack_alarm(std::uint64_t alarm_id, const std::string& operator_name,
                          std::int64_t now_ms, bool close = false);

  std::shared_ptr<const PlatformState> snapshot() const;
  std::uint64_t offset() const;
  /// Entries with offset >= `since`, optionally only for one device.
  std::vector<EventLogEntry> events_since(std::uint64_t since,
                                          std::optional<std::uint32_t> device = {}) const;
  std::vector<EventLogEntry> log() const;

 private:
  class Batch;

  void commit(PlatformState next, std::vector<EventLogEntry>& entries);

  PlatformOptions options_;
  mutable std::mutex mutex_;
  std::shared_ptr<const PlatformState> state_;
  std::vector<EventLogEntry> log_;
  std::ofstream log_file_;
};

}  // namespace srcwatch
