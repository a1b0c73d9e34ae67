#pragma once

// Discrete-event simulator: scripted stimuli drive the sensor models, the
// device state machine, the radio and the platform on one logical clock in
// integer milliseconds. Ties are broken by insertion order.

#include "srcwatch/platform.hpp"
#include "srcwatch/scenario.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace srcwatch {

/// What the simulator needs from the monitoring platform. Implemented
/// in-process here and over HTTP in platform_http.hpp.
class PlatformPort {
 public:
  virtual ~PlatformPort() = default;

  /// `frame` is the raw 21-byte uplink as it came off the air.
  virtual std::vector<EventLogEntry> ingest(std::span<const std::uint8_t> frame,
                                            std::int64_t received_at_ms) = 0;
  virtual std::vector<EventLogEntry> offline_scan(std::int64_t now_ms, double heartbeat_period_s,
                                                  int missed_k) = 0;
  virtual CommandTicket enqueue_command(std::uint32_t device_id, CommandKind cmd,
                                        const std::string& operator_name,
                                        std::int64_t now_ms) = 0;
  virtual std::vector<DownlinkCommand> fetch_pending(std::uint32_t device_id,
                                                     std::int64_t now_ms) = 0;
  virtual std::optional<DeviceRecord> device(std::uint32_t device_id) = 0;
};

class InProcessPlatform final : public PlatformPort {
 public:
  explicit InProcessPlatform(Platform& platform) : platform_(platform) {}

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
  Platform& platform_;
};

struct SimOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> path_loss_dB;  // replaces every device's channel timeline
  std::optional<RadioTechKind> tech;
};

/// Scenario with overrides folded in.
Scenario apply_overrides(Scenario scenario, const SimOverrides& overrides);

struct DeviceReport {
  std::uint32_t device_id = 0;
  std::optional<std::int64_t> shed_at_ms;
  std::optional<std::int64_t> trigger_at_ms;         // stimulus that raised the first local alarm
  std::optional<std::int64_t> local_alarm_at_ms;     // first entry into Alarming
  std::optional<std::int64_t> platform_alarm_at_ms;  // first AlarmOpened for this device
  std::uint64_t frames_sent = 0;
  std::uint64_t frames_delivered = 0;
  std::uint64_t frames_failed = 0;
  std::uint64_t heartbeats_sent = 0;
  std::uint64_t alarm_frames_sent = 0;
  std::uint64_t downlinks_delivered = 0;
  std::uint64_t alarms_opened = 0;
  std::array<double, 6> energy_mAh{};  // indexed by Component
  double energy_total_mAh = 0.0;
  double battery_remaining_mAh = 0.0;
  Mode final_mode = Mode::Dormant;
  LockState final_lock = LockState::Open;
  std::string final_status;  // platform view; "Unregistered" if never heard

  std::optional<double> shed_to_local_alarm_s() const;
  std::optional<double> shed_to_platform_alarm_s() const;
};

struct SimReport {
  std::string scenario;
  std::uint64_t seed = 0;
  std::int64_t duration_ms = 0;
  std::vector<DeviceReport> devices;     // in scenario order
  std::map<std::string, std::uint64_t> counts;
};

/// One powered interval [start_ms, end_ms) of a component in Active mode.
struct PowerInterval {
  std::uint32_t device_id = 0;
  Component component = Component::Mcu;
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;
};

struct SimTraceLine {
  std::int64_t at_ms = 0;
  std::uint32_t device_id = 0;
  std::string text;
};

/// Everything a run produces. The report is the stable artifact; the power
/// intervals and trace serve cross-checks.
struct SimOutcome {
  SimReport report;
  std::vector<PowerInterval> active_intervals;
  std::vector<SimTraceLine> trace;
};

/// Raised for failures inside the loop; carries the simulated time.
class SimError : public std::runtime_error {
 public:
  SimError(std::int64_t at_ms, const std::string& what);
  std::int64_t at_ms() const noexcept { return at_ms_; }

 private:
  std::int64_t at_ms_;
};

/// Runs against a fresh in-process platform.
SimOutcome run(const Scenario& scenario, const SimOverrides& overrides = {});
/// Runs against `platform`, which should hold no state for these devices.
SimOutcome run(const Scenario& scenario, const SimOverrides& overrides, PlatformPort& platform);

}  // namespace srcwatch
