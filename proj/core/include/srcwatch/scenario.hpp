#pragma once

// Scripted incident scenarios. Files are YAML with units in key names, e.g.
//
//   name: shed-and-run
//   seed: 7
//   duration_s: 600
//   devices:
//     - {id: 1001, lat_deg: 31.23, lon_deg: 121.47, cell: cell-a,
//        channel: [{from_s: 0, path_loss_dB: 120}]}
//   events:
//     - {at_s: 100, device: 1001, kind: ShedSource}
//
// See tests/fixtures/shed-and-run.scn for every section.

#include "srcwatch/frames.hpp"
#include "srcwatch/hazard.hpp"
#include "srcwatch/link.hpp"
#include "srcwatch/power.hpp"
#include "srcwatch/sensors.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace srcwatch {

enum class StimulusKind : std::uint8_t {
  ExtendBraid,
  RetractBraid,
  ShedSource,
  LiftDetector,
  GroundDetector,
  InjectSwitchFault,
  OperatorCommand,
};

std::string_view to_string(StimulusKind k) noexcept;

struct Stimulus {
  std::int64_t at_ms = 0;
  std::uint32_t device_id = 0;
  StimulusKind kind = StimulusKind::ExtendBraid;
  // InjectSwitchFault
  SwitchId target = SwitchId::First;
  SwitchFault fault = SwitchFault::None;
  // OperatorCommand
  CommandKind command = CommandKind::Ping;
  std::string operator_name = "operator";
  int line = 0;  // source line, 1-based; 0 when built in code
};

struct ChannelSegment {
  std::int64_t from_ms = 0;
  double path_loss_dB = 120.0;
};

struct DeviceSpec {
  std::uint32_t id = 0;
  double lat_deg = 0.0;
  double lon_deg = 0.0;
  std::string profile = "default";
  std::string cell;
  Isotope isotope = Isotope::Ir192;
  double activity_GBq = 3.7;
  std::vector<ChannelSegment> channel;  // piecewise constant, first from 0

  double path_loss_at(std::int64_t t_ms) const;
};

struct CellSpec {
  std::string name;
  std::uint32_t capacity = kCellCapacityLow;
};

struct PlatformSettings {
  double heartbeat_period_s = 86'400.0;
  int missed_heartbeats = 3;
  double offline_scan_interval_s = 3'600.0;  // 0 disables
  std::int64_t paging_delay_ms = 10'000;
  std::int64_t downlink_latency_ms = 1'500;
  std::int64_t command_poll_interval_ms = 0;  // 0: fetch only on contact and on enqueue
};

struct GpsSettings {
  std::int64_t ttff_ms = 30'000;
  std::int64_t fix_interval_ms = 60'000;
  double sigma_m = 5.0;
};

struct Scenario {
  std::string name;
  std::uint64_t seed = 1;
  std::int64_t duration_ms = 0;

  RadioTechKind tech = RadioTechKind::NbIot;
  double tx_power_dBm = 23.0;
  double noise_floor_dBm = -114.0;
  double gprs_threshold_dB = kDefaultGprsThreshold_dB;
  RetryPolicy retry;

  std::int64_t inactivity_timeout_ms = 300'000;
  PlatformSettings platform;
  GpsSettings gps;
  GammaSensorConfig sensor;
  Battery battery;
  std::map<std::string, PowerProfile> profiles;  // always has "default"

  std::vector<CellSpec> cells;
  std::vector<DeviceSpec> devices;
  std::vector<Stimulus> events;

  DeviceConfig device_config() const;
};

class ScenarioError : public std::runtime_error {
 public:
  enum class Kind { ParseError, ValidationError };
  ScenarioError(Kind kind, const std::string& what, int line = 0, std::string field = {})
      : std::runtime_error(what), kind_(kind), line_(line), field_(std::move(field)) {}

  Kind kind() const noexcept { return kind_; }
  int line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  Kind kind_;
  int line_;
  std::string field_;
};

Scenario load_scenario(const std::filesystem::path& path);
Scenario parse_scenario(std::string_view text, std::string_view source_name = "<memory>");

/// Cross-checks ids, references and ordering; throws ValidationError.
void validate(const Scenario& scenario);

}  // namespace srcwatch
