#include "srcwatch/hazard.hpp"

#include "json_codec.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace srcwatch {
namespace {

using nlohmann::json;
using json_codec::fix_from_json;
using json_codec::fix_to_json;
using json_codec::parse_enum;

class Transition {
 public:
  Transition(const DeviceSnapshot& s, const DeviceConfig& cfg) : cfg_(cfg) { out_.snapshot = s; }

  DeviceSnapshot& s() { return out_.snapshot; }
  HazardVerdict verdict() const {
    return judge_hazard(out_.snapshot.first, out_.snapshot.second);
  }

  void emit(DeviceAction a) { out_.actions.push_back(std::move(a)); }
  void note(DeviceNote n) { out_.notes.push_back(n); }

  void power_on(Peripheral p) {
    s().mode.powered.insert(p);
    emit(PowerOn{p});
  }
  void power_off(Peripheral p) {
    s().mode.powered.erase(p);
    emit(PowerOff{p});
  }
  void ensure_on(Peripheral p) {
    if (!s().mode.powered.contains(p)) power_on(p);
  }

  void send(MsgType type) {
    auto& snap = s();
    UplinkFrame f;
    f.device_id = snap.device_id;
    f.seq = snap.next_seq++;
    f.msg_type = type;
    f.flags = status_flags(snap);
    if (snap.last_fix && snap.last_fix->usable()) {
      f.lat_e7 = snap.last_fix->lat_e7;
      f.lon_e7 = snap.last_fix->lon_e7;
    }
    const double dah = std::floor(std::max(snap.battery_mah_remaining, 0.0) / 100.0);
    f.battery_dAh = static_cast<std::uint16_t>(std::min(dah, 65535.0));
    emit(SendUplink{f});
  }

  void wake() {
    if (s().mode.mode == Mode::Dormant) s().mode.mode = Mode::Active;
  }

  // Disposal sequence: siren first, then GPS, then the radio report.
  void enter_alarm() {
    s().mode.mode = Mode::Alarming;
    power_on(Peripheral::SirenLight);
    emit(SoundAlarm{});
    power_on(Peripheral::Gps);
    emit(RequestFix{});
    power_on(Peripheral::Radio);
    send(MsgType::Alarm);
  }

  void leave_alarm() {
    s().mode.mode = Mode::Active;
    power_off(Peripheral::SirenLight);
    power_off(Peripheral::Gps);
  }

  void go_dormant() {
    for (auto p : kAllPeripherals) {
      if (s().mode.powered.contains(p)) power_off(p);
    }
    s().mode.mode = Mode::Dormant;
    s().gamma_triggered = false;
    emit(Sleep{});
  }

  void on(const GammaCurrentDetected&, std::int64_t t) {
    s().gamma_triggered = true;
    s().last_activity_ms = t;
    wake();
    if (verdict() == HazardVerdict::Alarm && s().mode.mode != Mode::Alarming) enter_alarm();
  }

  void on(const SwitchChanged& e, std::int64_t t) {
    auto& snap = s();
    snap.last_activity_ms = t;
    if (e.which == SwitchId::First) {
      snap.first = e.level;
      if (e.level == SwitchLevel::High) {
        snap.braid = SourcePosition::Retracted;
        snap.lock_engaged = false;
      } else if (snap.braid == SourcePosition::Retracted) {
        snap.braid = SourcePosition::Extended;
      }
    } else {
      snap.second = e.level;
      snap.posture =
          e.level == SwitchLevel::High ? DetectorPosture::OnGround : DetectorPosture::Lifted;
    }

    const auto v = verdict();
    if (v == HazardVerdict::Alarm) {
      if (snap.mode.mode != Mode::Alarming) enter_alarm();
    } else if (v == HazardVerdict::Safe && snap.mode.mode == Mode::Alarming) {
      leave_alarm();
      send(MsgType::Heartbeat);
    }
    // Warning is indicated by the mechanical lock only; no uplink.
  }

  void on(const LockEngaged&, std::int64_t t) {
    s().lock_engaged = true;
    s().last_activity_ms = t;
  }

  void on(const FixAcquired& e, std::int64_t t) {
    auto& snap = s();
    if (snap.mode.mode == Mode::Dormant || !snap.mode.powered.contains(Peripheral::Gps)) {
      return;  // stale fix from a module we already switched off
    }
    snap.last_fix = e.fix;
    snap.last_activity_ms = t;
    if (snap.mode.mode == Mode::Alarming) {
      send(MsgType::FixReport);
      emit(RequestFix{});
    } else {
      ensure_on(Peripheral::Radio);
      send(MsgType::FixReport);
      power_off(Peripheral::Gps);
    }
  }

  void on(const DownlinkReceived& e, std::int64_t t) {
    const auto& cmd = e.command;
    if (cmd.device_id != s().device_id) {
      note(DeviceNote::ForeignCommand);
      return;
    }
    if (!is_known_command(cmd.cmd)) {
      note(DeviceNote::UnknownCommand);
      return;
    }
    s().last_activity_ms = t;
    wake();
    switch (cmd.cmd) {
      case CommandKind::Wake:
        // Answer the page so the platform sees the device again.
        ensure_on(Peripheral::Radio);
        send(MsgType::Ack);
        break;
      case CommandKind::Locate:
        ensure_on(Peripheral::Gps);
        emit(RequestFix{});
        break;
      case CommandKind::Silence:
        if (s().mode.mode == Mode::Alarming) {
          if (verdict() == HazardVerdict::Alarm) {
            note(DeviceNote::SilenceRefused);
          } else {
            leave_alarm();
          }
        }
        break;
      case CommandKind::Ping:
        ensure_on(Peripheral::Radio);
        send(MsgType::Ack);
        break;
    }
  }

  void on(const TimerTick&, std::int64_t t) {
    auto& snap = s();
    if (cfg_.heartbeat_period_ms > 0 && t >= snap.next_heartbeat_ms) {
      while (snap.next_heartbeat_ms <= t) snap.next_heartbeat_ms += cfg_.heartbeat_period_ms;
      if (snap.mode.mode == Mode::Dormant) {
        // Brief radio burst; the device never leaves Dormant.
        power_on(Peripheral::Radio);
        send(MsgType::Heartbeat);
        power_off(Peripheral::Radio);
        emit(Sleep{});
      } else {
        ensure_on(Peripheral::Radio);
        send(MsgType::Heartbeat);
      }
    }
    if (idle_expired(snap, cfg_, t)) go_dormant();
  }

  static bool idle_expired(const DeviceSnapshot& snap, const DeviceConfig& cfg, std::int64_t t) {
    return snap.mode.mode == Mode::Active &&
           judge_hazard(snap.first, snap.second) == HazardVerdict::Safe &&
           !snap.mode.powered.contains(Peripheral::Gps) &&
           t - snap.last_activity_ms >= cfg.inactivity_timeout_ms;
  }

  StepResult finish() && { return std::move(out_); }

 private:
  const DeviceConfig& cfg_;
  StepResult out_;
};

template <class E>
std::string_view pick(E v, std::initializer_list<std::pair<E, std::string_view>> names) {
  for (const auto& [key, name] : names) {
    if (key == v) return name;
  }
  return "Unknown";
}

}  // namespace

UnorderedEventsError::UnorderedEventsError(std::size_t index, std::int64_t previous_ms,
                                           std::int64_t at_ms)
    : std::invalid_argument(fmt::format(
          "event {} at {} ms precedes the previous event at {} ms", index, at_ms, previous_ms)),
      index_(index) {}

DeviceSnapshot initial_snapshot(std::uint32_t device_id, double battery_mah) {
  DeviceSnapshot s;
  s.device_id = device_id;
  s.battery_mah_remaining = battery_mah;
  return s;
}

StepResult step(const DeviceSnapshot& snapshot, const DeviceEvent& event,
                const DeviceConfig& config) {
  Transition tr(snapshot, config);
  tr.s().clock_ms = std::max(tr.s().clock_ms, event.at_ms);
  std::visit([&](const auto& e) { tr.on(e, event.at_ms); }, event.kind);
  return std::move(tr).finish();
}

ReplayResult replay(std::span<const DeviceEvent> events, const DeviceSnapshot& initial,
                    const DeviceConfig& config) {
  ReplayResult out{initial, {}, {}};
  std::int64_t previous = std::numeric_limits<std::int64_t>::min();
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (events[i].at_ms < previous) throw UnorderedEventsError(i, previous, events[i].at_ms);
    previous = events[i].at_ms;
    auto r = step(out.snapshot, events[i], config);
    out.snapshot = std::move(r.snapshot);
    out.actions.insert(out.actions.end(), r.actions.begin(), r.actions.end());
    out.notes.insert(out.notes.end(), r.notes.begin(), r.notes.end());
  }
  return out;
}

std::optional<std::int64_t> next_deadline_ms(const DeviceSnapshot& s, const DeviceConfig& cfg) {
  std::optional<std::int64_t> deadline;
  if (cfg.heartbeat_period_ms > 0) deadline = s.next_heartbeat_ms;
  if (s.mode.mode == Mode::Active && judge_hazard(s.first, s.second) == HazardVerdict::Safe &&
      !s.mode.powered.contains(Peripheral::Gps)) {
    const auto idle = s.last_activity_ms + cfg.inactivity_timeout_ms;
    deadline = deadline ? std::min(*deadline, idle) : idle;
  }
  return deadline;
}

std::uint8_t status_flags(const DeviceSnapshot& s) noexcept {
  std::uint8_t flags = 0;
  if (s.first == SwitchLevel::Low) flags |= frame_flags::kFirstSwitchLow;
  if (s.second == SwitchLevel::Low) flags |= frame_flags::kSecondSwitchLow;
  if (s.lock_engaged) flags |= frame_flags::kLockEngaged;
  if (s.gamma_triggered) flags |= frame_flags::kGammaTriggered;
  if (s.last_fix && s.last_fix->usable()) flags |= frame_flags::kFixValid;
  return flags;
}

std::string_view to_string(SwitchLevel v) noexcept {
  return pick(v, {{SwitchLevel::High, "High"}, {SwitchLevel::Low, "Low"}});
}
std::string_view to_string(SwitchId v) noexcept {
  return pick(v, {{SwitchId::First, "first"}, {SwitchId::Second, "second"}});
}
std::string_view to_string(SourcePosition v) noexcept {
  return pick(v, {{SourcePosition::Retracted, "Retracted"},
                  {SourcePosition::Extended, "Extended"},
                  {SourcePosition::Shed, "Shed"}});
}
std::string_view to_string(DetectorPosture v) noexcept {
  return pick(v, {{DetectorPosture::OnGround, "OnGround"}, {DetectorPosture::Lifted, "Lifted"}});
}
std::string_view to_string(HazardVerdict v) noexcept {
  return pick(v, {{HazardVerdict::Safe, "Safe"},
                  {HazardVerdict::Warning, "Warning"},
                  {HazardVerdict::Alarm, "Alarm"}});
}
std::string_view to_string(Mode v) noexcept {
  return pick(v, {{Mode::Dormant, "Dormant"}, {Mode::Active, "Active"}, {Mode::Alarming, "Alarming"}});
}
std::string_view to_string(Peripheral v) noexcept {
  return pick(v, {{Peripheral::Gps, "Gps"},
                  {Peripheral::SirenLight, "SirenLight"},
                  {Peripheral::Radio, "Radio"}});
}
std::string_view to_string(DeviceNote v) noexcept {
  return pick(v, {{DeviceNote::UnknownCommand, "UnknownCommand"},
                  {DeviceNote::ForeignCommand, "ForeignCommand"},
                  {DeviceNote::SilenceRefused, "SilenceRefused"}});
}

std::string describe(const DeviceAction& action) {
  struct Visitor {
    std::string operator()(const PowerOn& a) const {
      return fmt::format("PowerOn({})", to_string(a.component));
    }
    std::string operator()(const PowerOff& a) const {
      return fmt::format("PowerOff({})", to_string(a.component));
    }
    std::string operator()(const SoundAlarm&) const { return "SoundAlarm"; }
    std::string operator()(const RequestFix&) const { return "RequestFix"; }
    std::string operator()(const SendUplink& a) const {
      return fmt::format("SendUplink({} seq={} {})", to_string(a.frame.msg_type), a.frame.seq,
                         to_hex(encode_frame(a.frame)));
    }
    std::string operator()(const Sleep&) const { return "Sleep"; }
  };
  return std::visit(Visitor{}, action);
}

std::string describe(const DeviceEvent& event) {
  struct Visitor {
    std::string operator()(const GammaCurrentDetected&) const { return "GammaCurrentDetected"; }
    std::string operator()(const SwitchChanged& e) const {
      return fmt::format("SwitchChanged({}->{})", to_string(e.which), to_string(e.level));
    }
    std::string operator()(const LockEngaged&) const { return "LockEngaged"; }
    std::string operator()(const DownlinkReceived& e) const {
      return fmt::format("DownlinkReceived({})", to_hex(encode_command(e.command)));
    }
    std::string operator()(const TimerTick&) const { return "TimerTick"; }
    std::string operator()(const FixAcquired& e) const {
      return fmt::format("FixAcquired({},{})", e.fix.lat_e7, e.fix.lon_e7);
    }
  };
  return fmt::format("{} {}", event.at_ms, std::visit(Visitor{}, event.kind));
}

std::string serialize_snapshot(const DeviceSnapshot& s) {
  json powered = json::array();
  for (auto p : kAllPeripherals) {
    if (s.mode.powered.contains(p)) powered.push_back(to_string(p));
  }
  json j{
      {"device_id", s.device_id},
      {"mode", to_string(s.mode.mode)},
      {"powered", powered},
      {"first", to_string(s.first)},
      {"second", to_string(s.second)},
      {"braid", to_string(s.braid)},
      {"posture", to_string(s.posture)},
      {"battery_mah_remaining", s.battery_mah_remaining},
      {"last_fix", s.last_fix ? fix_to_json(*s.last_fix) : json(nullptr)},
      {"lock_engaged", s.lock_engaged},
      {"gamma_triggered", s.gamma_triggered},
      {"next_seq", s.next_seq},
      {"clock_ms", s.clock_ms},
      {"last_activity_ms", s.last_activity_ms},
      {"next_heartbeat_ms", s.next_heartbeat_ms},
  };
  return j.dump();
}

DeviceSnapshot parse_snapshot(std::string_view text) {
  try {
    const auto j = json::parse(text);
    DeviceSnapshot s;
    s.device_id = j.at("device_id").get<std::uint32_t>();
    s.mode.mode = parse_enum(j.at("mode"), {Mode::Dormant, Mode::Active, Mode::Alarming});
    for (const auto& p : j.at("powered")) {
      s.mode.powered.insert(
          parse_enum(p, {Peripheral::Gps, Peripheral::SirenLight, Peripheral::Radio}));
    }
    s.first = parse_enum(j.at("first"), {SwitchLevel::High, SwitchLevel::Low});
    s.second = parse_enum(j.at("second"), {SwitchLevel::High, SwitchLevel::Low});
    s.braid = parse_enum(j.at("braid"), {SourcePosition::Retracted, SourcePosition::Extended,
                                         SourcePosition::Shed});
    s.posture = parse_enum(j.at("posture"), {DetectorPosture::OnGround, DetectorPosture::Lifted});
    s.battery_mah_remaining = j.at("battery_mah_remaining").get<double>();
    if (!j.at("last_fix").is_null()) s.last_fix = fix_from_json(j.at("last_fix"));
    s.lock_engaged = j.at("lock_engaged").get<bool>();
    s.gamma_triggered = j.at("gamma_triggered").get<bool>();
    s.next_seq = j.at("next_seq").get<std::uint16_t>();
    s.clock_ms = j.at("clock_ms").get<std::int64_t>();
    s.last_activity_ms = j.at("last_activity_ms").get<std::int64_t>();
    s.next_heartbeat_ms = j.at("next_heartbeat_ms").get<std::int64_t>();
    return s;
  } catch (const json::exception& e) {
    throw std::invalid_argument(fmt::format("bad snapshot: {}", e.what()));
  }
}

}  // namespace srcwatch
