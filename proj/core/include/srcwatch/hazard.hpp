#pragma once

// Device-side judgment and disposal. The core is a pure event fold:
// step() maps (snapshot, event) to the next snapshot plus the actions the
// firmware would perform, and replay() folds a whole event list.
//
//   Dormant --gamma current / Wake / any command--> Active
//   Dormant|Active --verdict Alarm--> Alarming
//   Alarming --source back (Safe) or Silence after clear--> Active
//   Active --Safe, nothing pending, idle for the timeout--> Dormant

#include "srcwatch/frames.hpp"
#include "srcwatch/nmea.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace srcwatch {

// Low is always the unsafe reading; an open circuit reads Low.
enum class SwitchLevel : std::uint8_t { High, Low };
enum class SwitchId : std::uint8_t { First, Second };
enum class SourcePosition : std::uint8_t { Retracted, Extended, Shed };
enum class DetectorPosture : std::uint8_t { OnGround, Lifted };

// Ordered by severity.
enum class HazardVerdict : std::uint8_t { Safe = 0, Warning = 1, Alarm = 2 };

enum class Mode : std::uint8_t { Dormant, Active, Alarming };
enum class Peripheral : std::uint8_t { Gps, SirenLight, Radio };

inline constexpr Peripheral kAllPeripherals[] = {Peripheral::Gps, Peripheral::SirenLight,
                                                 Peripheral::Radio};

class PowerSet {
 public:
  constexpr PowerSet() = default;

  constexpr bool contains(Peripheral p) const noexcept { return (bits_ & bit(p)) != 0; }
  constexpr void insert(Peripheral p) noexcept { bits_ |= bit(p); }
  constexpr void erase(Peripheral p) noexcept { bits_ &= static_cast<std::uint8_t>(~bit(p)); }
  constexpr bool empty() const noexcept { return bits_ == 0; }
  constexpr std::uint8_t bits() const noexcept { return bits_; }

  constexpr bool operator==(const PowerSet&) const = default;

 private:
  static constexpr std::uint8_t bit(Peripheral p) noexcept {
    return static_cast<std::uint8_t>(1u << static_cast<unsigned>(p));
  }
  std::uint8_t bits_ = 0;
};

struct DeviceMode {
  Mode mode = Mode::Dormant;
  PowerSet powered;

  bool operator==(const DeviceMode&) const = default;
};

struct DeviceConfig {
  std::int64_t inactivity_timeout_ms = 300'000;
  std::int64_t heartbeat_period_ms = 86'400'000;  // 0 disables heartbeats
};

struct DeviceSnapshot {
  std::uint32_t device_id = 0;
  DeviceMode mode;
  SwitchLevel first = SwitchLevel::High;
  SwitchLevel second = SwitchLevel::High;
  SourcePosition braid = SourcePosition::Retracted;
  DetectorPosture posture = DetectorPosture::OnGround;
  double battery_mah_remaining = 0.0;
  std::optional<GeoFix> last_fix;

  bool lock_engaged = false;
  bool gamma_triggered = false;
  std::uint16_t next_seq = 0;
  std::int64_t clock_ms = 0;
  std::int64_t last_activity_ms = 0;
  std::int64_t next_heartbeat_ms = 0;

  bool operator==(const DeviceSnapshot&) const = default;
};

// --- events ---------------------------------------------------------------

struct GammaCurrentDetected {
  bool operator==(const GammaCurrentDetected&) const = default;
};
struct SwitchChanged {
  SwitchId which = SwitchId::First;
  SwitchLevel level = SwitchLevel::High;
  bool operator==(const SwitchChanged&) const = default;
};
struct LockEngaged {
  bool operator==(const LockEngaged&) const = default;
};
struct DownlinkReceived {
  DownlinkCommand command;
  bool operator==(const DownlinkReceived&) const = default;
};
struct TimerTick {
  bool operator==(const TimerTick&) const = default;
};
// The GPS module delivered a position after a RequestFix.
struct FixAcquired {
  GeoFix fix;
  bool operator==(const FixAcquired&) const = default;
};

using DeviceEventKind = std::variant<GammaCurrentDetected, SwitchChanged, LockEngaged,
                                     DownlinkReceived, TimerTick, FixAcquired>;

struct DeviceEvent {
  std::int64_t at_ms = 0;
  DeviceEventKind kind;

  bool operator==(const DeviceEvent&) const = default;
};

// --- actions --------------------------------------------------------------

struct PowerOn {
  Peripheral component;
  bool operator==(const PowerOn&) const = default;
};
struct PowerOff {
  Peripheral component;
  bool operator==(const PowerOff&) const = default;
};
struct SoundAlarm {
  bool operator==(const SoundAlarm&) const = default;
};
struct RequestFix {
  bool operator==(const RequestFix&) const = default;
};
struct SendUplink {
  UplinkFrame frame;
  bool operator==(const SendUplink&) const = default;
};
struct Sleep {
  bool operator==(const Sleep&) const = default;
};

using DeviceAction = std::variant<PowerOn, PowerOff, SoundAlarm, RequestFix, SendUplink, Sleep>;

// Things worth logging that produce no action.
enum class DeviceNote : std::uint8_t { UnknownCommand, ForeignCommand, SilenceRefused };

struct StepResult {
  DeviceSnapshot snapshot;
  std::vector<DeviceAction> actions;
  std::vector<DeviceNote> notes;
};

struct ReplayResult {
  DeviceSnapshot snapshot;
  std::vector<DeviceAction> actions;
  std::vector<DeviceNote> notes;
};

class UnorderedEventsError : public std::invalid_argument {
 public:
  UnorderedEventsError(std::size_t index, std::int64_t previous_ms, std::int64_t at_ms);
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// Alarm iff both switches read Low; Warning when the source is out but the
/// detector is still grounded; Safe otherwise.
constexpr HazardVerdict judge_hazard(SwitchLevel first, SwitchLevel second) noexcept {
  if (first == SwitchLevel::Low) {
    return second == SwitchLevel::Low ? HazardVerdict::Alarm : HazardVerdict::Warning;
  }
  return HazardVerdict::Safe;
}

/// Fresh device: Dormant, both switches pressed, braid home, detector grounded.
DeviceSnapshot initial_snapshot(std::uint32_t device_id, double battery_mah);

StepResult step(const DeviceSnapshot& snapshot, const DeviceEvent& event,
                const DeviceConfig& config = {});

/// Folds step() over `events`. Throws UnorderedEventsError if a timestamp
/// decreases.
ReplayResult replay(std::span<const DeviceEvent> events, const DeviceSnapshot& initial,
                    const DeviceConfig& config = {});

/// Earliest time at which a TimerTick would change anything, if any.
std::optional<std::int64_t> next_deadline_ms(const DeviceSnapshot& snapshot,
                                             const DeviceConfig& config);

/// Uplink flags byte for the snapshot's current readings.
std::uint8_t status_flags(const DeviceSnapshot& snapshot) noexcept;

std::string_view to_string(SwitchLevel v) noexcept;
std::string_view to_string(SwitchId v) noexcept;
std::string_view to_string(SourcePosition v) noexcept;
std::string_view to_string(DetectorPosture v) noexcept;
std::string_view to_string(HazardVerdict v) noexcept;
std::string_view to_string(Mode v) noexcept;
std::string_view to_string(Peripheral v) noexcept;
std::string_view to_string(DeviceNote v) noexcept;

/// One-line rendering used by traces and determinism checks.
std::string describe(const DeviceAction& action);
std::string describe(const DeviceEvent& event);

/// Canonical text form: JSON with sorted keys, shortest round-trip doubles.
std::string serialize_snapshot(const DeviceSnapshot& snapshot);
/// Inverse of serialize_snapshot; throws std::invalid_argument on bad input.
DeviceSnapshot parse_snapshot(std::string_view text);

}  // namespace srcwatch
