#include "srcwatch/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace srcwatch {

namespace {

using Kind = ScenarioError::Kind;

int line_of(const YAML::Node& n) {
  const auto mark = n.Mark();
  return mark.line < 0 ? 0 : mark.line + 1;
}

[[noreturn]] void parse_fail(const YAML::Node& n, const std::string& field, const std::string& msg) {
  const int line = line_of(n);
  throw ScenarioError(Kind::ParseError, fmt::format("line {}: {}: {}", line, field, msg), line,
                      field);
}

void check_keys(const YAML::Node& map, std::initializer_list<std::string_view> allowed,
                const std::string& where) {
  if (!map.IsMap()) parse_fail(map, where, "expected a mapping");
  for (const auto& kv : map) {
    const auto key = kv.first.as<std::string>();
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      parse_fail(kv.first, where.empty() ? key : where + "." + key, "unknown key");
    }
  }
}

template <typename T>
T scalar(const YAML::Node& n, const std::string& field) {
  if (!n.IsScalar()) parse_fail(n, field, "expected a scalar");
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    parse_fail(n, field, fmt::format("cannot read '{}'", n.Scalar()));
  }
}

double real(const YAML::Node& n, const std::string& field) {
  const double v = scalar<double>(n, field);
  if (!std::isfinite(v)) parse_fail(n, field, "must be finite");
  return v;
}

std::int64_t seconds_to_ms(const YAML::Node& n, const std::string& field) {
  const double s = real(n, field);
  if (s < 0) parse_fail(n, field, "must not be negative");
  return std::llround(s * 1000.0);
}

template <typename T>
void opt(const YAML::Node& parent, const char* key, T& out, const std::string& prefix) {
  if (const auto n = parent[key]) {
    const std::string field = prefix.empty() ? key : prefix + "." + key;
    if constexpr (std::is_same_v<T, double>) {
      out = real(n, field);
    } else {
      out = scalar<T>(n, field);
    }
  }
}

void opt_ms(const YAML::Node& parent, const char* key, std::int64_t& out, const std::string& prefix) {
  if (const auto n = parent[key]) out = seconds_to_ms(n, prefix + "." + key);
}

template <typename E, typename F>
E named(const YAML::Node& n, const std::string& field, F&& from_string) {
  const auto text = scalar<std::string>(n, field);
  if (auto v = from_string(text)) return *v;
  parse_fail(n, field, fmt::format("unknown value '{}'", text));
}

std::optional<StimulusKind> stimulus_from_string(std::string_view s) {
  for (auto k : {StimulusKind::ExtendBraid, StimulusKind::RetractBraid, StimulusKind::ShedSource,
                 StimulusKind::LiftDetector, StimulusKind::GroundDetector,
                 StimulusKind::InjectSwitchFault, StimulusKind::OperatorCommand}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

std::optional<RadioTechKind> tech_from_string(std::string_view s) {
  if (s == "NbIot") return RadioTechKind::NbIot;
  if (s == "GprsBaseline") return RadioTechKind::GprsBaseline;
  return std::nullopt;
}

std::optional<SwitchId> switch_from_string(std::string_view s) {
  if (s == "first" || s == "First") return SwitchId::First;
  if (s == "second" || s == "Second") return SwitchId::Second;
  return std::nullopt;
}

std::optional<Component> component_from_string(std::string_view s) {
  for (auto c : {Component::Mcu, Component::Radio, Component::Gps, Component::SirenLight,
                 Component::GammaSensor, Component::Switches}) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

void read_radio(const YAML::Node& n, Scenario& s) {
  check_keys(n, {"tech", "tx_power_dBm", "noise_floor_dBm", "gprs_threshold_dB"}, "radio");
  if (n["tech"]) s.tech = named<RadioTechKind>(n["tech"], "radio.tech", tech_from_string);
  opt(n, "tx_power_dBm", s.tx_power_dBm, "radio");
  opt(n, "noise_floor_dBm", s.noise_floor_dBm, "radio");
  opt(n, "gprs_threshold_dB", s.gprs_threshold_dB, "radio");
}

void read_retry(const YAML::Node& n, RetryPolicy& r) {
  check_keys(n,
             {"max_attempts", "base_backoff_ms", "backoff_factor", "attempt_duration_ms",
              "residual_loss"},
             "retry");
  opt(n, "max_attempts", r.max_attempts, "retry");
  opt(n, "base_backoff_ms", r.base_backoff_ms, "retry");
  opt(n, "backoff_factor", r.backoff_factor, "retry");
  opt(n, "attempt_duration_ms", r.attempt_duration_ms, "retry");
  opt(n, "residual_loss", r.residual_loss, "retry");
}

void read_platform(const YAML::Node& n, PlatformSettings& p) {
  check_keys(n,
             {"heartbeat_period_s", "missed_heartbeats", "offline_scan_interval_s",
              "paging_delay_s", "downlink_latency_ms", "command_poll_interval_s"},
             "platform");
  opt(n, "heartbeat_period_s", p.heartbeat_period_s, "platform");
  opt(n, "missed_heartbeats", p.missed_heartbeats, "platform");
  opt(n, "offline_scan_interval_s", p.offline_scan_interval_s, "platform");
  opt_ms(n, "paging_delay_s", p.paging_delay_ms, "platform");
  opt(n, "downlink_latency_ms", p.downlink_latency_ms, "platform");
  opt_ms(n, "command_poll_interval_s", p.command_poll_interval_ms, "platform");
}

void read_gps(const YAML::Node& n, GpsSettings& g) {
  check_keys(n, {"ttff_s", "fix_interval_s", "sigma_m"}, "gps");
  opt_ms(n, "ttff_s", g.ttff_ms, "gps");
  opt_ms(n, "fix_interval_s", g.fix_interval_ms, "gps");
  opt(n, "sigma_m", g.sigma_m, "gps");
}

void read_sensor(const YAML::Node& n, GammaSensorConfig& c) {
  check_keys(n,
             {"threshold_uA", "responsivity_uA_per_mSvh", "lead_thickness_mm", "mu_source_per_mm",
              "mu_du_per_mm", "sense_distance_m", "du_background_mSvh"},
             "sensor");
  opt(n, "threshold_uA", c.threshold_uA, "sensor");
  opt(n, "responsivity_uA_per_mSvh", c.responsivity_uA_per_mSvh, "sensor");
  opt(n, "lead_thickness_mm", c.lead_thickness_mm, "sensor");
  opt(n, "mu_source_per_mm", c.mu_source_per_mm, "sensor");
  opt(n, "mu_du_per_mm", c.mu_du_per_mm, "sensor");
  opt(n, "sense_distance_m", c.sense_distance_m, "sensor");
  opt(n, "du_background_mSvh", c.du_background_mSvh, "sensor");
}

void read_battery(const YAML::Node& n, Battery& b) {
  check_keys(n, {"capacity_mAh", "self_discharge_fraction_per_year"}, "battery");
  opt(n, "capacity_mAh", b.capacity_mAh, "battery");
  opt(n, "self_discharge_fraction_per_year", b.self_discharge_fraction_per_year, "battery");
}

// profiles: {name: {Component: {sleep_uA, active_mA}}}; unnamed components
// keep the default draw.
void read_profiles(const YAML::Node& n, std::map<std::string, PowerProfile>& out) {
  if (!n.IsMap()) parse_fail(n, "profiles", "expected a mapping");
  for (const auto& kv : n) {
    const auto name = kv.first.as<std::string>();
    const std::string field = "profiles." + name;
    PowerProfile p = PowerProfile::defaults();
    if (!kv.second.IsMap()) parse_fail(kv.second, field, "expected a mapping");
    for (const auto& ckv : kv.second) {
      const auto cname = ckv.first.as<std::string>();
      const auto comp = component_from_string(cname);
      if (!comp) parse_fail(ckv.first, field + "." + cname, "unknown component");
      check_keys(ckv.second, {"sleep_uA", "active_mA"}, field + "." + cname);
      ComponentDraw d = p.draw(*comp);
      opt(ckv.second, "sleep_uA", d.sleep_uA, field + "." + cname);
      opt(ckv.second, "active_mA", d.active_mA, field + "." + cname);
      p.set(*comp, d);
    }
    out[name] = p;
  }
}

DeviceSpec read_device(const YAML::Node& n, std::size_t i) {
  const std::string f = fmt::format("devices[{}]", i);
  check_keys(n,
             {"id", "lat_deg", "lon_deg", "profile", "cell", "isotope", "activity_GBq", "channel"},
             f);
  DeviceSpec d;
  if (!n["id"]) parse_fail(n, f + ".id", "missing");
  d.id = scalar<std::uint32_t>(n["id"], f + ".id");
  opt(n, "lat_deg", d.lat_deg, f);
  opt(n, "lon_deg", d.lon_deg, f);
  opt(n, "profile", d.profile, f);
  opt(n, "cell", d.cell, f);
  if (n["isotope"]) {
    d.isotope = named<Isotope>(n["isotope"], f + ".isotope", isotope_from_string);
  }
  opt(n, "activity_GBq", d.activity_GBq, f);
  if (const auto ch = n["channel"]) {
    if (!ch.IsSequence()) parse_fail(ch, f + ".channel", "expected a list");
    for (std::size_t k = 0; k < ch.size(); ++k) {
      const std::string cf = fmt::format("{}.channel[{}]", f, k);
      check_keys(ch[k], {"from_s", "path_loss_dB"}, cf);
      ChannelSegment seg;
      if (ch[k]["from_s"]) seg.from_ms = seconds_to_ms(ch[k]["from_s"], cf + ".from_s");
      if (!ch[k]["path_loss_dB"]) parse_fail(ch[k], cf + ".path_loss_dB", "missing");
      seg.path_loss_dB = real(ch[k]["path_loss_dB"], cf + ".path_loss_dB");
      d.channel.push_back(seg);
    }
  } else {
    d.channel.push_back({});
  }
  return d;
}

Stimulus read_event(const YAML::Node& n, std::size_t i) {
  const std::string f = fmt::format("events[{}]", i);
  check_keys(n, {"at_s", "device", "kind", "switch", "fault", "command", "operator"}, f);
  Stimulus s;
  s.line = line_of(n);
  if (!n["at_s"]) parse_fail(n, f + ".at_s", "missing");
  if (!n["device"]) parse_fail(n, f + ".device", "missing");
  if (!n["kind"]) parse_fail(n, f + ".kind", "missing");
  s.at_ms = seconds_to_ms(n["at_s"], f + ".at_s");
  s.device_id = scalar<std::uint32_t>(n["device"], f + ".device");
  s.kind = named<StimulusKind>(n["kind"], f + ".kind", stimulus_from_string);

  if (s.kind == StimulusKind::InjectSwitchFault) {
    if (!n["switch"]) parse_fail(n, f + ".switch", "missing for InjectSwitchFault");
    if (!n["fault"]) parse_fail(n, f + ".fault", "missing for InjectSwitchFault");
    s.target = named<SwitchId>(n["switch"], f + ".switch", switch_from_string);
    s.fault = named<SwitchFault>(n["fault"], f + ".fault", switch_fault_from_string);
  } else if (n["switch"] || n["fault"]) {
    parse_fail(n, f, "switch/fault only apply to InjectSwitchFault");
  }
  if (s.kind == StimulusKind::OperatorCommand) {
    if (!n["command"]) parse_fail(n, f + ".command", "missing for OperatorCommand");
    s.command = named<CommandKind>(n["command"], f + ".command", command_from_string);
    opt(n, "operator", s.operator_name, f);
  } else if (n["command"] || n["operator"]) {
    parse_fail(n, f, "command/operator only apply to OperatorCommand");
  }
  return s;
}

[[noreturn]] void invalid(const std::string& field, const std::string& msg, int line = 0) {
  throw ScenarioError(Kind::ValidationError,
                      line > 0 ? fmt::format("line {}: {}: {}", line, field, msg)
                               : fmt::format("{}: {}", field, msg),
                      line, field);
}

}  // namespace

std::string_view to_string(StimulusKind k) noexcept {
  switch (k) {
    case StimulusKind::ExtendBraid: return "ExtendBraid";
    case StimulusKind::RetractBraid: return "RetractBraid";
    case StimulusKind::ShedSource: return "ShedSource";
    case StimulusKind::LiftDetector: return "LiftDetector";
    case StimulusKind::GroundDetector: return "GroundDetector";
    case StimulusKind::InjectSwitchFault: return "InjectSwitchFault";
    case StimulusKind::OperatorCommand: return "OperatorCommand";
  }
  return "?";
}

double DeviceSpec::path_loss_at(std::int64_t t_ms) const {
  double loss = channel.empty() ? ChannelSegment{}.path_loss_dB : channel.front().path_loss_dB;
  for (const auto& seg : channel) {
    if (seg.from_ms > t_ms) break;
    loss = seg.path_loss_dB;
  }
  return loss;
}

DeviceConfig Scenario::device_config() const {
  DeviceConfig c;
  c.inactivity_timeout_ms = inactivity_timeout_ms;
  c.heartbeat_period_ms = std::llround(platform.heartbeat_period_s * 1000.0);
  return c;
}

Scenario parse_scenario(std::string_view text, std::string_view source_name) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    const int line = e.mark.line < 0 ? 0 : e.mark.line + 1;
    throw ScenarioError(Kind::ParseError,
                        fmt::format("{}: line {}: {}", source_name, line, e.msg), line, "");
  }
  if (!root || !root.IsMap()) {
    throw ScenarioError(Kind::ParseError, fmt::format("{}: expected a mapping", source_name), 1,
                        "");
  }
  check_keys(root,
             {"name", "seed", "duration_s", "inactivity_timeout_s", "radio", "retry", "platform",
              "gps", "sensor", "battery", "profiles", "cells", "devices", "events"},
             "");

  Scenario s;
  s.profiles["default"] = PowerProfile::defaults();
  if (!root["name"]) parse_fail(root, "name", "missing");
  if (!root["duration_s"]) parse_fail(root, "duration_s", "missing");
  s.name = scalar<std::string>(root["name"], "name");
  opt(root, "seed", s.seed, "");
  s.duration_ms = seconds_to_ms(root["duration_s"], "duration_s");
  if (root["inactivity_timeout_s"]) {
    s.inactivity_timeout_ms = seconds_to_ms(root["inactivity_timeout_s"], "inactivity_timeout_s");
  }
  if (root["radio"]) read_radio(root["radio"], s);
  if (root["retry"]) read_retry(root["retry"], s.retry);
  if (root["platform"]) read_platform(root["platform"], s.platform);
  if (root["gps"]) read_gps(root["gps"], s.gps);
  if (root["sensor"]) read_sensor(root["sensor"], s.sensor);
  if (root["battery"]) read_battery(root["battery"], s.battery);
  if (root["profiles"]) read_profiles(root["profiles"], s.profiles);

  if (const auto cells = root["cells"]) {
    if (!cells.IsSequence()) parse_fail(cells, "cells", "expected a list");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const std::string f = fmt::format("cells[{}]", i);
      check_keys(cells[i], {"name", "capacity"}, f);
      if (!cells[i]["name"]) parse_fail(cells[i], f + ".name", "missing");
      CellSpec c;
      c.name = scalar<std::string>(cells[i]["name"], f + ".name");
      opt(cells[i], "capacity", c.capacity, f);
      s.cells.push_back(c);
    }
  }
  if (const auto devs = root["devices"]) {
    if (!devs.IsSequence()) parse_fail(devs, "devices", "expected a list");
    for (std::size_t i = 0; i < devs.size(); ++i) s.devices.push_back(read_device(devs[i], i));
  }
  if (const auto evs = root["events"]) {
    if (!evs.IsSequence()) parse_fail(evs, "events", "expected a list");
    for (std::size_t i = 0; i < evs.size(); ++i) s.events.push_back(read_event(evs[i], i));
  }

  // A single unnamed cell when none is declared.
  if (s.cells.empty()) s.cells.push_back({"default", kCellCapacityLow});
  for (auto& d : s.devices) {
    if (d.cell.empty()) d.cell = s.cells.front().name;
  }

  validate(s);
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ScenarioError(Kind::ParseError, fmt::format("{}: cannot open", path.string()), 0, "");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path.string());
}

void validate(const Scenario& s) {
  if (s.name.empty()) invalid("name", "must not be empty");
  if (s.duration_ms <= 0) invalid("duration_s", "must be positive");
  if (s.inactivity_timeout_ms <= 0) invalid("inactivity_timeout_s", "must be positive");
  if (s.platform.heartbeat_period_s < 0) invalid("platform.heartbeat_period_s", "negative");
  if (s.platform.missed_heartbeats < 1) invalid("platform.missed_heartbeats", "must be >= 1");
  if (s.platform.offline_scan_interval_s < 0) {
    invalid("platform.offline_scan_interval_s", "negative");
  }
  if (s.platform.downlink_latency_ms < 0) invalid("platform.downlink_latency_ms", "negative");
  if (s.gps.sigma_m < 0) invalid("gps.sigma_m", "negative");
  if (s.retry.max_attempts < 1) invalid("retry.max_attempts", "must be >= 1");
  if (s.retry.base_backoff_ms < 0) invalid("retry.base_backoff_ms", "negative");
  if (s.retry.backoff_factor < 1.0) invalid("retry.backoff_factor", "must be >= 1");
  if (s.retry.attempt_duration_ms <= 0) invalid("retry.attempt_duration_ms", "must be positive");
  if (!(s.retry.residual_loss >= 0.0 && s.retry.residual_loss <= 1.0)) {
    invalid("retry.residual_loss", "must lie in [0, 1]");
  }
  try {
    s.sensor.validate();
    s.battery.validate();
    for (const auto& [name, p] : s.profiles) p.validate();
  } catch (const std::invalid_argument& e) {
    invalid("config", e.what());
  }

  std::set<std::string> cell_names;
  for (const auto& c : s.cells) {
    if (!cell_names.insert(c.name).second) invalid("cells", fmt::format("duplicate cell '{}'", c.name));
  }

  std::set<std::uint32_t> ids;
  for (std::size_t i = 0; i < s.devices.size(); ++i) {
    const auto& d = s.devices[i];
    const std::string f = fmt::format("devices[{}]", i);
    if (!ids.insert(d.id).second) invalid(f + ".id", fmt::format("duplicate device id {}", d.id));
    if (!(d.lat_deg >= -90 && d.lat_deg <= 90)) invalid(f + ".lat_deg", "out of range");
    if (!(d.lon_deg >= -180 && d.lon_deg <= 180)) invalid(f + ".lon_deg", "out of range");
    if (!s.profiles.contains(d.profile)) {
      invalid(f + ".profile", fmt::format("unknown profile '{}'", d.profile));
    }
    if (!cell_names.contains(d.cell)) invalid(f + ".cell", fmt::format("unknown cell '{}'", d.cell));
    if (!(d.activity_GBq > 0)) invalid(f + ".activity_GBq", "must be positive");
    if (d.isotope == Isotope::DepletedUraniumShield) {
      invalid(f + ".isotope", "the shield is not a working source");
    }
    if (d.channel.empty() || d.channel.front().from_ms != 0) {
      invalid(f + ".channel", "first segment must start at 0");
    }
    for (std::size_t k = 1; k < d.channel.size(); ++k) {
      if (d.channel[k].from_ms <= d.channel[k - 1].from_ms) {
        invalid(fmt::format("{}.channel[{}]", f, k), "segments must be strictly increasing");
      }
    }
  }

  for (std::size_t i = 0; i < s.events.size(); ++i) {
    const auto& e = s.events[i];
    const std::string f = fmt::format("events[{}]", i);
    if (i > 0 && e.at_ms < s.events[i - 1].at_ms) {
      invalid(f + ".at_s",
              fmt::format("out of order: {} s follows {} s", e.at_ms / 1000.0,
                          s.events[i - 1].at_ms / 1000.0),
              e.line);
    }
    if (!ids.contains(e.device_id)) {
      invalid(f + ".device", fmt::format("unknown device {}", e.device_id), e.line);
    }
    if (e.at_ms > s.duration_ms) {
      invalid(f + ".at_s", "after the end of the run", e.line);
    }
    if (e.kind == StimulusKind::OperatorCommand && !is_known_command(e.command)) {
      invalid(f + ".command", "unknown command", e.line);
    }
  }
}

}  // namespace srcwatch
