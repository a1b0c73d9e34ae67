#include "srcwatch/sim.hpp"

#include "srcwatch/nmea.hpp"
#include "srcwatch/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <queue>
#include <variant>

namespace srcwatch {

// --- in-process port --------------------------------------------------------

std::vector<EventLogEntry> InProcessPlatform::ingest(std::span<const std::uint8_t> frame,
                                                     std::int64_t received_at_ms) {
  return platform_.ingest(decode_frame(frame), received_at_ms);
}

std::vector<EventLogEntry> InProcessPlatform::offline_scan(std::int64_t now_ms,
                                                           double heartbeat_period_s,
                                                           int missed_k) {
  return platform_.offline_scan(now_ms, heartbeat_period_s, missed_k);
}

CommandTicket InProcessPlatform::enqueue_command(std::uint32_t device_id, CommandKind cmd,
                                                 const std::string& operator_name,
                                                 std::int64_t now_ms) {
  return platform_.enqueue_command(device_id, cmd, operator_name, now_ms);
}

std::vector<DownlinkCommand> InProcessPlatform::fetch_pending(std::uint32_t device_id,
                                                              std::int64_t now_ms) {
  return platform_.fetch_pending(device_id, now_ms);
}

std::optional<DeviceRecord> InProcessPlatform::device(std::uint32_t device_id) {
  const auto state = platform_.snapshot();
  const auto it = state->devices.find(device_id);
  if (it == state->devices.end()) return std::nullopt;
  return it->second;
}

// --- report helpers ---------------------------------------------------------

std::optional<double> DeviceReport::shed_to_local_alarm_s() const {
  if (!shed_at_ms || !local_alarm_at_ms) return std::nullopt;
  return static_cast<double>(*local_alarm_at_ms - *shed_at_ms) / 1000.0;
}

std::optional<double> DeviceReport::shed_to_platform_alarm_s() const {
  if (!shed_at_ms || !platform_alarm_at_ms) return std::nullopt;
  return static_cast<double>(*platform_alarm_at_ms - *shed_at_ms) / 1000.0;
}

SimError::SimError(std::int64_t at_ms, const std::string& what)
    : std::runtime_error(fmt::format("t={} ms: {}", at_ms, what)), at_ms_(at_ms) {}

Scenario apply_overrides(Scenario s, const SimOverrides& o) {
  if (o.seed) s.seed = *o.seed;
  if (o.tech) s.tech = *o.tech;
  if (o.path_loss_dB) {
    for (auto& d : s.devices) d.channel = {ChannelSegment{0, *o.path_loss_dB}};
  }
  return s;
}

namespace {

constexpr std::size_t kComponents = 6;
constexpr std::uint64_t kStreamRadio = 1;
constexpr std::uint64_t kStreamGps = 2;

std::size_t idx(Component c) { return static_cast<std::size_t>(c); }

// Per-device energy meter. Every component except the radio follows the
// device state; the radio is active only while an attempt is on the air.
class Meter {
 public:
  Meter(std::uint32_t device_id, PowerProfile profile)
      : device_id_(device_id), profile_(profile) {}

  void set(Component c, bool active, std::int64_t t) {
    advance(t);
    auto& since = on_since_[idx(c)];
    if (active && !since) {
      since = t;
    } else if (!active && since) {
      if (t > *since) intervals_.push_back({device_id_, c, *since, t});
      since.reset();
    }
  }

  void add_burst(std::int64_t start, std::int64_t end) {
    merge(pending_, start, end);
    merge(all_bursts_, start, end);
  }

  void advance(std::int64_t t) {
    for (std::size_t i = 0; i < kComponents; ++i) {
      const auto c = static_cast<Component>(i);
      if (c == Component::Radio) continue;
      accrue_to(c, on_since_[i] ? PowerMode::Active : PowerMode::Sleep, t);
    }
    // Radio: walk scheduled bursts up to t.
    auto& cur = cursor_ms_[idx(Component::Radio)];
    while (cur < t) {
      auto it = pending_.begin();
      while (it != pending_.end() && it->second <= cur) it = pending_.erase(it);
      if (it == pending_.end() || it->first >= t) {
        accrue_to(Component::Radio, PowerMode::Sleep, t);
      } else if (it->first > cur) {
        accrue_to(Component::Radio, PowerMode::Sleep, it->first);
      } else {
        accrue_to(Component::Radio, PowerMode::Active, std::min(it->second, t));
      }
    }
  }

  /// Closes everything at `end` and returns the active intervals.
  std::vector<PowerInterval> finish(std::int64_t end) {
    advance(end);
    for (std::size_t i = 0; i < kComponents; ++i) {
      if (on_since_[i] && end > *on_since_[i]) {
        intervals_.push_back({device_id_, static_cast<Component>(i), *on_since_[i], end});
      }
      on_since_[i].reset();
    }
    for (const auto& [s, e] : all_bursts_) {
      if (s >= end) break;
      intervals_.push_back({device_id_, Component::Radio, s, std::min(e, end)});
    }
    std::stable_sort(intervals_.begin(), intervals_.end(), [](const auto& a, const auto& b) {
      return std::tie(a.start_ms, a.component) < std::tie(b.start_ms, b.component);
    });
    return std::move(intervals_);
  }

  const EnergyLedger& ledger() const { return ledger_; }

 private:
  void accrue_to(Component c, PowerMode mode, std::int64_t t) {
    auto& cur = cursor_ms_[idx(c)];
    if (t <= cur) return;
    ledger_ = accrue(std::move(ledger_), c, mode, static_cast<double>(t - cur) / 1000.0, profile_);
    cur = t;
  }

  static void merge(std::map<std::int64_t, std::int64_t>& set, std::int64_t s, std::int64_t e) {
    auto it = set.upper_bound(s);
    if (it != set.begin()) {
      auto prev = std::prev(it);
      if (prev->second >= s) {
        s = prev->first;
        e = std::max(e, prev->second);
        it = set.erase(prev);
      }
    }
    while (it != set.end() && it->first <= e) {
      e = std::max(e, it->second);
      it = set.erase(it);
    }
    set.emplace(s, e);
  }

  std::uint32_t device_id_;
  PowerProfile profile_;
  EnergyLedger ledger_;
  std::array<std::int64_t, kComponents> cursor_ms_{};
  std::array<std::optional<std::int64_t>, kComponents> on_since_{};
  std::map<std::int64_t, std::int64_t> pending_;
  std::map<std::int64_t, std::int64_t> all_bursts_;
  std::vector<PowerInterval> intervals_;
};

struct DeviceRuntime {
  const DeviceSpec* spec = nullptr;
  std::size_t cell = 0;
  DeviceSnapshot snap;
  Meter meter;
  RadiationSource source;
  std::uint64_t stream_base = 0;

  // physical truth
  SourcePosition braid = SourcePosition::Retracted;
  DetectorPosture posture = DetectorPosture::OnGround;
  std::array<SwitchFault, 2> faults{SwitchFault::None, SwitchFault::None};
  std::array<SwitchLevel, 2> seen{SwitchLevel::High, SwitchLevel::High};
  LockState lock = LockState::Open;
  std::int32_t true_lat_e7 = 0;
  std::int32_t true_lon_e7 = 0;

  std::optional<std::int64_t> tick_at{};
  std::uint64_t tick_token = 0;
  bool fix_pending = false;
  bool gps_warm = false;
  std::uint64_t fix_token = 0;
  std::uint64_t fixes = 0;
  std::uint64_t frames = 0;
  std::optional<std::int64_t> last_stimulus_ms{};

  DeviceReport rep{};
};

struct StimulusEv {
  std::size_t index;
};
struct DeviceInput {
  std::size_t dev;
  DeviceEventKind kind;
};
struct TickEv {
  std::size_t dev;
  std::uint64_t token;
};
struct FixEv {
  std::size_t dev;
  std::uint64_t token;
};
struct UplinkArrival {
  std::size_t dev;
  std::array<std::uint8_t, kUplinkFrameSize> bytes;
};
struct DownlinkArrival {
  std::size_t dev;
  DownlinkCommand cmd;
};
struct OfflineScanEv {};
struct PollEv {};

using Payload = std::variant<StimulusEv, DeviceInput, TickEv, FixEv, UplinkArrival,
                             DownlinkArrival, OfflineScanEv, PollEv>;

struct Queued {
  std::int64_t t;
  std::uint64_t seq;
  Payload what;
};

struct Later {
  bool operator()(const Queued& a, const Queued& b) const {
    return a.t != b.t ? a.t > b.t : a.seq > b.seq;
  }
};

class Simulator {
 public:
  Simulator(const Scenario& s, PlatformPort& platform)
      : s_(s), platform_(platform), cfg_(s.device_config()) {
    for (const auto& c : s_.cells) cells_.emplace_back(c.capacity);
    devices_.reserve(s_.devices.size());
    for (const auto& spec : s_.devices) {
      const auto cell_it = std::find_if(s_.cells.begin(), s_.cells.end(),
                                        [&](const CellSpec& c) { return c.name == spec.cell; });
      DeviceRuntime d{
          .spec = &spec,
          .cell = static_cast<std::size_t>(cell_it - s_.cells.begin()),
          .snap = initial_snapshot(spec.id, s_.battery.capacity_mAh),
          .meter = Meter(spec.id, s_.profiles.at(spec.profile)),
          .source = RadiationSource::working(spec.isotope, spec.activity_GBq),
          .stream_base = derive_seed(s_.seed, spec.id),
      };
      d.true_lat_e7 = degrees_to_e7(spec.lat_deg);
      d.true_lon_e7 = degrees_to_e7(spec.lon_deg);
      d.rep.device_id = spec.id;
      if (cells_[d.cell].attach(spec.id) != AttachResult::Attached) ++counts_["cell_refused"];
      devices_.push_back(std::move(d));
      by_id_[spec.id] = devices_.size() - 1;
    }
  }

  SimOutcome run() {
    for (std::size_t i = 0; i < devices_.size(); ++i) reschedule_tick(i, 0, false);
    for (std::size_t i = 0; i < s_.events.size(); ++i) push(s_.events[i].at_ms, StimulusEv{i});
    if (s_.platform.offline_scan_interval_s > 0 && s_.platform.heartbeat_period_s > 0) {
      push(scan_interval_ms(), OfflineScanEv{});
    }
    if (s_.platform.command_poll_interval_ms > 0) {
      push(s_.platform.command_poll_interval_ms, PollEv{});
    }

    while (!queue_.empty() && queue_.top().t <= s_.duration_ms) {
      Queued q = queue_.top();
      queue_.pop();
      now_ = q.t;
      try {
        std::visit([&](auto& ev) { handle(ev); }, q.what);
      } catch (const SimError&) {
        throw;
      } catch (const std::exception& e) {
        throw SimError(now_, e.what());
      }
    }
    return finish();
  }

 private:
  template <typename T>
  void push(std::int64_t t, T ev) {
    queue_.push(Queued{t, next_seq_++, Payload(std::move(ev))});
  }

  std::int64_t scan_interval_ms() const {
    return std::max<std::int64_t>(1, std::llround(s_.platform.offline_scan_interval_s * 1000.0));
  }

  void trace(const DeviceRuntime& d, std::string text) {
    trace_.push_back({now_, d.spec->id, std::move(text)});
  }

  // --- stimuli and sensors ---

  void handle(const StimulusEv& ev) {
    const auto& st = s_.events[ev.index];
    auto& d = devices_[by_id_.at(st.device_id)];
    ++counts_["stimuli"];
    d.last_stimulus_ms = now_;
    trace(d, fmt::format("stimulus {}", to_string(st.kind)));
    const std::size_t di = by_id_.at(st.device_id);

    switch (st.kind) {
      case StimulusKind::ExtendBraid:
        if (d.braid != SourcePosition::Retracted) break;
        move_braid(di, SourcePosition::Extended);
        break;
      case StimulusKind::ShedSource:
        if (d.braid == SourcePosition::Shed) break;
        if (!d.rep.shed_at_ms) d.rep.shed_at_ms = now_;
        move_braid(di, SourcePosition::Shed);
        break;
      case StimulusKind::RetractBraid:
        // A shed source cannot come home.
        if (d.braid != SourcePosition::Extended) {
          ++counts_["stimuli_ignored"];
          break;
        }
        move_braid(di, SourcePosition::Retracted);
        break;
      case StimulusKind::LiftDetector:
        d.posture = DetectorPosture::Lifted;
        read_switches(di);
        break;
      case StimulusKind::GroundDetector:
        d.posture = DetectorPosture::OnGround;
        read_switches(di);
        break;
      case StimulusKind::InjectSwitchFault:
        d.faults[static_cast<std::size_t>(st.target)] = st.fault;
        read_switches(di);
        break;
      case StimulusKind::OperatorCommand:
        operator_command(di, st);
        break;
    }
  }

  void move_braid(std::size_t di, SourcePosition to) {
    auto& d = devices_[di];
    const auto from = d.braid;
    d.braid = to;
    // The source passes the sensor whenever it leaves or re-enters the tank.
    const bool passes = from == SourcePosition::Retracted || to == SourcePosition::Retracted;
    if (passes && sensor_triggered(d.source, s_.sensor.sense_distance_m, s_.sensor)) {
      push(now_, DeviceInput{di, GammaCurrentDetected{}});
    }
    read_switches(di);
    const auto lock = lock_transition(d.lock, d.braid, false).state;
    if (lock == LockState::EngagedBlocking && d.lock != LockState::EngagedBlocking) {
      push(now_, DeviceInput{di, LockEngaged{}});
    }
    d.lock = lock;
  }

  void read_switches(std::size_t di) {
    auto& d = devices_[di];
    const std::array<SwitchLevel, 2> levels{
        servo_read(d.braid == SourcePosition::Retracted, d.faults[0]),
        servo_read(d.posture == DetectorPosture::OnGround, d.faults[1])};
    for (std::size_t k = 0; k < 2; ++k) {
      if (levels[k] == d.seen[k]) continue;
      d.seen[k] = levels[k];
      push(now_, DeviceInput{di, SwitchChanged{static_cast<SwitchId>(k), levels[k]}});
    }
  }

  // --- device ---

  void handle(const DeviceInput& ev) { process(ev.dev, ev.kind); }

  void handle(const TickEv& ev) {
    auto& d = devices_[ev.dev];
    if (ev.token != d.tick_token) return;
    d.tick_at.reset();
    process(ev.dev, TimerTick{}, true);
  }

  void handle(const FixEv& ev) {
    auto& d = devices_[ev.dev];
    if (ev.token != d.fix_token) return;
    d.fix_pending = false;
    d.gps_warm = true;
    const auto stream = derive_seed(d.stream_base, (kStreamGps << 32) | d.fixes++);
    const double utc = static_cast<double>(now_ % 86'400'000) / 1000.0;
    const auto fix = simulate_fix(d.true_lat_e7, d.true_lon_e7, s_.gps.sigma_m, stream, utc);
    ++counts_["fixes"];
    process(ev.dev, FixAcquired{fix.fix});
  }

  void handle(const DownlinkArrival& ev) {
    auto& d = devices_[ev.dev];
    ++d.rep.downlinks_delivered;
    ++counts_["downlinks_delivered"];
    process(ev.dev, DownlinkReceived{ev.cmd});
  }

  void process(std::size_t di, const DeviceEventKind& kind, bool from_tick = false) {
    auto& d = devices_[di];
    d.meter.advance(now_);
    d.snap.battery_mah_remaining = remaining(d.meter.ledger(), s_.battery, years(now_));

    const DeviceEvent event{now_, kind};
    const bool was_alarming = d.snap.mode.mode == Mode::Alarming;
    StepResult r = step(d.snap, event, cfg_);
    ++counts_["device_events"];
    trace(d, describe(event));
    d.snap = r.snapshot;
    for (auto note : r.notes) {
      ++counts_[fmt::format("note.{}", to_string(note))];
      trace(d, fmt::format("note {}", to_string(note)));
    }

    for (const auto& action : r.actions) {
      trace(d, describe(action));
      std::visit([&](const auto& a) { act(di, a); }, action);
    }

    const auto& m = d.snap.mode;
    const bool awake = m.mode != Mode::Dormant;
    d.meter.set(Component::Mcu, awake, now_);
    d.meter.set(Component::GammaSensor, awake, now_);
    d.meter.set(Component::Switches, awake, now_);
    d.meter.set(Component::Gps, m.powered.contains(Peripheral::Gps), now_);
    d.meter.set(Component::SirenLight, m.powered.contains(Peripheral::SirenLight), now_);

    if (!was_alarming && m.mode == Mode::Alarming && !d.rep.local_alarm_at_ms) {
      d.rep.local_alarm_at_ms = now_;
      d.rep.trigger_at_ms = d.last_stimulus_ms;
    }
    reschedule_tick(di, now_, from_tick);
  }

  void act(std::size_t di, const PowerOn& a) {
    auto& d = devices_[di];
    if (a.component == Peripheral::Gps) d.gps_warm = false;
  }

  void act(std::size_t di, const PowerOff& a) {
    auto& d = devices_[di];
    if (a.component == Peripheral::Gps) {
      d.gps_warm = false;
      d.fix_pending = false;
      ++d.fix_token;
    }
  }

  void act(std::size_t, const SoundAlarm&) { ++counts_["sirens"]; }
  void act(std::size_t, const Sleep&) {}

  void act(std::size_t di, const RequestFix&) {
    auto& d = devices_[di];
    if (d.fix_pending || !d.snap.mode.powered.contains(Peripheral::Gps)) return;
    d.fix_pending = true;
    push(now_ + (d.gps_warm ? s_.gps.fix_interval_ms : s_.gps.ttff_ms), FixEv{di, d.fix_token});
  }

  void act(std::size_t di, const SendUplink& a) {
    auto& d = devices_[di];
    ++d.rep.frames_sent;
    ++counts_["uplinks_sent"];
    if (a.frame.msg_type == MsgType::Heartbeat) ++d.rep.heartbeats_sent;
    if (a.frame.msg_type == MsgType::Alarm) ++d.rep.alarm_frames_sent;

    const Channel channel{
        LinkBudget{s_.tx_power_dBm, d.spec->path_loss_at(now_), s_.noise_floor_dBm},
        RadioTech::make(s_.tech, s_.gprs_threshold_dB)};
    const auto stream = derive_seed(d.stream_base, (kStreamRadio << 32) | d.frames++);
    DeliveryOutcome out;
    try {
      out = transmit(cells_[d.cell], d.spec->id, channel, s_.retry, stream);
    } catch (const NotAttachedError&) {
      ++d.rep.frames_failed;
      ++counts_["uplinks_failed"];
      trace(d, "uplink refused: not attached");
      return;
    }
    for (const auto start : out.attempt_start_ms) {
      d.meter.add_burst(now_ + start, now_ + start + s_.retry.attempt_duration_ms);
    }
    if (out.delivered) {
      ++d.rep.frames_delivered;
      ++counts_["uplinks_delivered"];
      UplinkArrival arrival{di, {}};
      const auto bytes = encode_frame(a.frame);
      std::copy(bytes.begin(), bytes.end(), arrival.bytes.begin());
      push(now_ + out.latency_ms, std::move(arrival));
    } else {
      ++d.rep.frames_failed;
      ++counts_["uplinks_failed"];
    }
    trace(d, fmt::format("transmit seq={} attempts={} delivered={} latency_ms={}", a.frame.seq,
                         out.attempts, out.delivered, out.latency_ms));
  }

  void reschedule_tick(std::size_t di, std::int64_t now, bool after_tick) {
    auto& d = devices_[di];
    auto deadline = next_deadline_ms(d.snap, cfg_);
    if (deadline && *deadline <= now && after_tick) deadline = now + 1;
    if (deadline == d.tick_at) return;
    ++d.tick_token;
    d.tick_at = deadline;
    if (deadline) push(std::max(*deadline, now), TickEv{di, d.tick_token});
  }

  // --- platform side ---

  void handle(const UplinkArrival& ev) {
    auto& d = devices_[ev.dev];
    const auto entries = platform_.ingest(ev.bytes, now_);
    note_entries(entries);
    // The uplink opens a receive window for whatever is queued.
    route(ev.dev, platform_.fetch_pending(d.spec->id, now_), now_ + s_.platform.downlink_latency_ms);
  }

  void operator_command(std::size_t di, const Stimulus& st) {
    auto& d = devices_[di];
    try {
      platform_.enqueue_command(d.spec->id, st.command, st.operator_name, now_);
    } catch (const PlatformError& e) {
      if (e.kind() != PlatformError::Kind::UnknownDevice) throw;
      ++counts_["commands_rejected"];
      trace(d, fmt::format("command {} rejected: {}", to_string(st.command), e.what()));
      return;
    }
    ++counts_["commands_queued"];
    if (reachable(d)) {
      route(di, platform_.fetch_pending(d.spec->id, now_), now_ + s_.platform.downlink_latency_ms);
    } else if (st.command == CommandKind::Wake) {
      // The network pages a sleeping device; everything queued rides along.
      route(di, platform_.fetch_pending(d.spec->id, now_), now_ + s_.platform.paging_delay_ms);
    }
  }

  void handle(const PollEv&) {
    for (std::size_t i = 0; i < devices_.size(); ++i) {
      auto& d = devices_[i];
      if (!reachable(d) || !platform_.device(d.spec->id)) continue;
      route(i, platform_.fetch_pending(d.spec->id, now_), now_ + s_.platform.downlink_latency_ms);
    }
    push(now_ + s_.platform.command_poll_interval_ms, PollEv{});
  }

  void handle(const OfflineScanEv&) {
    note_entries(platform_.offline_scan(now_, s_.platform.heartbeat_period_s,
                                        s_.platform.missed_heartbeats));
    push(now_ + scan_interval_ms(), OfflineScanEv{});
  }

  static bool reachable(const DeviceRuntime& d) {
    return d.snap.mode.powered.contains(Peripheral::Radio);
  }

  void route(std::size_t di, const std::vector<DownlinkCommand>& cmds, std::int64_t at) {
    for (const auto& c : cmds) push(at, DownlinkArrival{di, c});
  }

  void note_entries(const std::vector<EventLogEntry>& entries) {
    for (const auto& e : entries) {
      ++counts_[fmt::format("platform.{}", to_string(e.kind))];
      if (e.kind != EventKind::AlarmOpened) continue;
      const auto it = by_id_.find(e.device_id);
      if (it == by_id_.end()) continue;
      auto& rep = devices_[it->second].rep;
      ++rep.alarms_opened;
      if (!rep.platform_alarm_at_ms) rep.platform_alarm_at_ms = e.timestamp_ms;
    }
  }

  static double years(std::int64_t t_ms) {
    return static_cast<double>(t_ms) / (1000.0 * 86'400.0 * 365.0);
  }

  SimOutcome finish() {
    SimOutcome out;
    now_ = s_.duration_ms;
    auto& report = out.report;
    report.scenario = s_.name;
    report.seed = s_.seed;
    report.duration_ms = s_.duration_ms;
    for (auto& d : devices_) {
      auto intervals = d.meter.finish(s_.duration_ms);
      out.active_intervals.insert(out.active_intervals.end(), intervals.begin(), intervals.end());
      const auto& ledger = d.meter.ledger();
      for (std::size_t i = 0; i < kComponents; ++i) {
        d.rep.energy_mAh[i] = ledger.component_total_mAh(static_cast<Component>(i));
      }
      d.rep.energy_total_mAh = ledger.total_mAh();
      d.rep.battery_remaining_mAh = remaining(ledger, s_.battery, years(s_.duration_ms));
      d.rep.final_mode = d.snap.mode.mode;
      d.rep.final_lock = d.lock;
      const auto rec = platform_.device(d.spec->id);
      d.rep.final_status = rec ? std::string(to_string(rec->status)) : "Unregistered";
      report.devices.push_back(d.rep);
    }
    report.counts = counts_;
    out.trace = std::move(trace_);
    return out;
  }

  const Scenario& s_;
  PlatformPort& platform_;
  DeviceConfig cfg_;
  std::vector<CellState> cells_;
  std::vector<DeviceRuntime> devices_;
  std::map<std::uint32_t, std::size_t> by_id_;
  std::priority_queue<Queued, std::vector<Queued>, Later> queue_;
  std::uint64_t next_seq_ = 0;
  std::int64_t now_ = 0;
  std::map<std::string, std::uint64_t> counts_;
  std::vector<SimTraceLine> trace_;
};

}  // namespace

SimOutcome run(const Scenario& scenario, const SimOverrides& overrides, PlatformPort& platform) {
  const Scenario s = apply_overrides(scenario, overrides);
  validate(s);
  Simulator sim(s, platform);
  return sim.run();
}

SimOutcome run(const Scenario& scenario, const SimOverrides& overrides) {
  Platform platform;
  InProcessPlatform port(platform);
  return run(scenario, overrides, port);
}

}  // namespace srcwatch
