#include "srcwatch/platform.hpp"

#include "json_codec.hpp"
#include "srcwatch/rng.hpp"

#include <fmt/format.h>

#include <cmath>

namespace srcwatch {
namespace {

using nlohmann::json;
using namespace json_codec;

[[noreturn]] void corrupt(const EventLogEntry& e, const std::string& why) {
  throw PlatformError(PlatformError::Kind::CorruptEntry,
                      fmt::format("log entry {} ({}): {}", e.offset, to_string(e.kind), why));
}

DeviceRecord& device_or_corrupt(PlatformState& s, const EventLogEntry& e) {
  const auto it = s.devices.find(e.device_id);
  if (it == s.devices.end()) corrupt(e, fmt::format("unknown device {}", e.device_id));
  return it->second;
}

AlarmRecord& alarm_or_corrupt(PlatformState& s, const EventLogEntry& e, const json& p) {
  const auto id = p.at("alarm_id").get<std::uint64_t>();
  const auto it = s.alarms.find(id);
  if (it == s.alarms.end()) corrupt(e, fmt::format("unknown alarm {}", id));
  if (it->second.device_id != e.device_id) corrupt(e, "alarm belongs to another device");
  return it->second;
}

DeviceStatus status_after_alarm_change(const PlatformState& s, std::uint32_t device_id) {
  return s.open_alarm_for(device_id) ? DeviceStatus::Alarming : DeviceStatus::Online;
}

std::optional<GeoFix> fix_from_frame(const UplinkFrame& f, std::int64_t received_at_ms) {
  if ((f.flags & frame_flags::kFixValid) == 0) return std::nullopt;
  GeoFix fix;
  fix.lat_e7 = f.lat_e7;
  fix.lon_e7 = f.lon_e7;
  fix.quality = FixQuality::Gps;
  fix.utc_s_of_day = static_cast<double>(received_at_ms % 86'400'000) / 1000.0;
  return fix;
}

void apply_payload(PlatformState& s, const EventLogEntry& e, const json& p) {
  switch (e.kind) {
    case EventKind::DeviceRegistered: {
      if (s.devices.contains(e.device_id)) corrupt(e, "device already registered");
      DeviceRecord d;
      d.device_id = e.device_id;
      d.last_seen_ms = e.timestamp_ms;
      s.devices.emplace(e.device_id, d);
      break;
    }
    case EventKind::FrameIn: {
      auto& d = device_or_corrupt(s, e);
      const auto bytes = from_hex(p.at("frame_hex").get<std::string>());
      const auto frame = decode_frame(bytes);
      if (frame.device_id != e.device_id) corrupt(e, "frame device id mismatch");
      const bool fresh = p.at("fresh").get<bool>();
      if (fresh != (!d.seq_high || frame.seq > *d.seq_high)) corrupt(e, "freshness mismatch");
      d.last_seen_ms = e.timestamp_ms;
      ++d.frames_in;
      if (fresh) {
        d.seq_high = frame.seq;
        d.battery_dAh = frame.battery_dAh;
        d.last_flags = frame.flags;
        if (auto fix = fix_from_frame(frame, e.timestamp_ms)) d.last_fix = fix;
      }
      break;
    }
    case EventKind::AlarmOpened: {
      auto& d = device_or_corrupt(s, e);
      const auto id = p.at("alarm_id").get<std::uint64_t>();
      if (id != s.next_alarm_id) corrupt(e, "alarm id out of sequence");
      if (s.open_alarm_for(e.device_id)) corrupt(e, "device already has an open alarm");
      AlarmRecord a;
      a.alarm_id = id;
      a.device_id = e.device_id;
      a.opened_at_ms = e.timestamp_ms;
      if (!p.at("fix").is_null()) a.fix_at_open = fix_from_json(p.at("fix"));
      s.alarms.emplace(id, std::move(a));
      ++s.next_alarm_id;
      d.status = DeviceStatus::Alarming;
      break;
    }
    case EventKind::AlarmAcked: {
      auto& a = alarm_or_corrupt(s, e, p);
      if (a.state != AlarmState::Open) corrupt(e, "alarm is not open");
      a.state = AlarmState::Acked;
      a.acked_by = p.at("operator").get<std::string>();
      device_or_corrupt(s, e).status = status_after_alarm_change(s, e.device_id);
      break;
    }
    case EventKind::AlarmClosed: {
      auto& a = alarm_or_corrupt(s, e, p);
      if (a.state != AlarmState::Acked) corrupt(e, "alarm is not acknowledged");
      a.state = AlarmState::Closed;
      break;
    }
    case EventKind::WentOffline: {
      auto& d = device_or_corrupt(s, e);
      if (d.status != DeviceStatus::Online) corrupt(e, "device is not online");
      d.status = DeviceStatus::Offline;
      break;
    }
    case EventKind::CameOnline: {
      auto& d = device_or_corrupt(s, e);
      if (d.status != DeviceStatus::Offline) corrupt(e, "device is not offline");
      d.status = DeviceStatus::Online;
      break;
    }
    case EventKind::CommandQueued: {
      device_or_corrupt(s, e);
      PendingCommand c;
      c.ticket = p.at("ticket").get<std::uint64_t>();
      if (c.ticket != s.next_ticket) corrupt(e, "ticket out of sequence");
      c.device_id = e.device_id;
      c.cmd = static_cast<CommandKind>(p.at("cmd_byte").get<std::uint8_t>());
      c.operator_name = p.at("operator").get<std::string>();
      c.nonce = p.at("nonce").get<std::uint32_t>();
      c.queued_at_ms = e.timestamp_ms;
      s.pending[e.device_id].push_back(std::move(c));
      ++s.next_ticket;
      break;
    }
    case EventKind::CommandDelivered: {
      device_or_corrupt(s, e);
      auto it = s.pending.find(e.device_id);
      const auto ticket = p.at("ticket").get<std::uint64_t>();
      if (it == s.pending.end() || it->second.empty() || it->second.front().ticket != ticket) {
        corrupt(e, "delivered command is not at the head of the queue");
      }
      it->second.pop_front();
      if (it->second.empty()) s.pending.erase(it);
      break;
    }
  }
}

}  // namespace

std::string_view to_string(EventKind k) noexcept {
  switch (k) {
    case EventKind::DeviceRegistered: return "DeviceRegistered";
    case EventKind::FrameIn: return "FrameIn";
    case EventKind::AlarmOpened: return "AlarmOpened";
    case EventKind::AlarmAcked: return "AlarmAcked";
    case EventKind::AlarmClosed: return "AlarmClosed";
    case EventKind::WentOffline: return "WentOffline";
    case EventKind::CameOnline: return "CameOnline";
    case EventKind::CommandQueued: return "CommandQueued";
    case EventKind::CommandDelivered: return "CommandDelivered";
  }
  return "Unknown";
}

std::string_view to_string(DeviceStatus s) noexcept {
  switch (s) {
    case DeviceStatus::Online: return "Online";
    case DeviceStatus::Offline: return "Offline";
    case DeviceStatus::Alarming: return "Alarming";
  }
  return "Unknown";
}

std::string_view to_string(AlarmState s) noexcept {
  switch (s) {
    case AlarmState::Open: return "Open";
    case AlarmState::Acked: return "Acked";
    case AlarmState::Closed: return "Closed";
  }
  return "Unknown";
}

std::optional<EventKind> event_kind_from_string(std::string_view name) noexcept {
  for (auto k : {EventKind::DeviceRegistered, EventKind::FrameIn, EventKind::AlarmOpened,
                 EventKind::AlarmAcked, EventKind::AlarmClosed, EventKind::WentOffline,
                 EventKind::CameOnline, EventKind::CommandQueued, EventKind::CommandDelivered}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

std::optional<AlarmState> alarm_state_from_string(std::string_view name) noexcept {
  for (auto s : {AlarmState::Open, AlarmState::Acked, AlarmState::Closed}) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

std::string_view to_string(PlatformError::Kind k) noexcept {
  switch (k) {
    case PlatformError::Kind::UnknownDevice: return "UnknownDevice";
    case PlatformError::Kind::UnknownAlarm: return "UnknownAlarm";
    case PlatformError::Kind::NotOpen: return "NotOpen";
    case PlatformError::Kind::NotAcked: return "NotAcked";
    case PlatformError::Kind::CorruptEntry: return "CorruptEntry";
    case PlatformError::Kind::BadRequest: return "BadRequest";
  }
  return "Unknown";
}

std::optional<std::uint64_t> PlatformState::open_alarm_for(std::uint32_t device_id) const {
  for (const auto& [id, a] : alarms) {
    if (a.device_id == device_id && a.state == AlarmState::Open) return id;
  }
  return std::nullopt;
}

void apply(PlatformState& state, const EventLogEntry& entry) {
  if (entry.offset != state.next_offset) {
    corrupt(entry, fmt::format("expected offset {}", state.next_offset));
  }
  try {
    const auto payload = json::parse(entry.payload);
    apply_payload(state, entry, payload);
  } catch (const json::exception& e) {
    corrupt(entry, fmt::format("bad payload: {}", e.what()));
  } catch (const FrameError& e) {
    corrupt(entry, fmt::format("bad frame: {}", e.what()));
  } catch (const std::invalid_argument& e) {
    corrupt(entry, e.what());
  }
  ++state.next_offset;
}

PlatformState replay_log(std::span<const EventLogEntry> entries) {
  PlatformState state;
  for (const auto& e : entries) apply(state, e);
  return state;
}

std::string canonical_state(const PlatformState& s) {
  json devices = json::array();
  for (const auto& [id, d] : s.devices) devices.push_back(device_to_json(d));
  json alarms = json::array();
  for (const auto& [id, a] : s.alarms) alarms.push_back(alarm_to_json(a));
  json pending = json::array();
  for (const auto& [id, queue] : s.pending) {
    for (const auto& c : queue) pending.push_back(pending_to_json(c));
  }
  return json{{"devices", devices},
              {"alarms", alarms},
              {"pending", pending},
              {"next_offset", s.next_offset},
              {"next_alarm_id", s.next_alarm_id},
              {"next_ticket", s.next_ticket}}
      .dump();
}

std::string serialize_entry(const EventLogEntry& entry) { return entry_to_json(entry).dump(); }

EventLogEntry parse_entry(std::string_view line) {
  try {
    return entry_from_json(json::parse(line));
  } catch (const std::exception& e) {
    throw PlatformError(PlatformError::Kind::CorruptEntry,
                        fmt::format("unparsable log line: {}", e.what()));
  }
}

std::vector<EventLogEntry> read_log_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw PlatformError(PlatformError::Kind::CorruptEntry,
                        fmt::format("cannot open log {}", path.string()));
  }
  std::vector<EventLogEntry> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    entries.push_back(parse_entry(line));
  }
  return entries;
}

// Accumulates entries against a private copy of the state; nothing is
// visible until Platform::commit.
class Platform::Batch {
 public:
  explicit Batch(const PlatformState& base) : state_(base) {}

  const EventLogEntry& add(std::int64_t ts, EventKind kind, std::uint32_t device_id, json payload) {
    EventLogEntry e;
    e.offset = state_.next_offset;
    e.timestamp_ms = ts;
    e.kind = kind;
    e.device_id = device_id;
    e.payload = payload.dump();
    apply(state_, e);
    entries_.push_back(std::move(e));
    return entries_.back();
  }

  PlatformState& state() { return state_; }
  std::vector<EventLogEntry>& entries() { return entries_; }

 private:
  PlatformState state_;
  std::vector<EventLogEntry> entries_;
};

Platform::Platform(PlatformOptions options)
    : options_(std::move(options)), state_(std::make_shared<const PlatformState>()) {
  if (options_.log_path) {
    if (std::filesystem::exists(*options_.log_path)) {
      log_ = read_log_file(*options_.log_path);
      state_ = std::make_shared<const PlatformState>(replay_log(log_));
    }
    log_file_.open(*options_.log_path, std::ios::app);
    if (!log_file_) {
      throw std::runtime_error(
          fmt::format("cannot open log {} for append", options_.log_path->string()));
    }
  }
}

void Platform::commit(PlatformState next, std::vector<EventLogEntry>& entries) {
  if (log_file_.is_open()) {
    for (const auto& e : entries) log_file_ << serialize_entry(e) << '\n';
    log_file_.flush();
  }
  log_.insert(log_.end(), entries.begin(), entries.end());
  state_ = std::make_shared<const PlatformState>(std::move(next));
}

std::vector<EventLogEntry> Platform::ingest(const UplinkFrame& frame, std::int64_t received_at_ms) {
  std::lock_guard lock(mutex_);
  Batch batch(*state_);
  const auto id = frame.device_id;
  if (!batch.state().devices.contains(id)) {
    if (options_.unknown_devices == UnknownDevicePolicy::Reject) {
      throw PlatformError(PlatformError::Kind::UnknownDevice,
                          fmt::format("frame from unregistered device {}", id));
    }
    batch.add(received_at_ms, EventKind::DeviceRegistered, id, json{{"device_id", id}});
  }
  const auto& before = batch.state().devices.at(id);
  const bool fresh = !before.seq_high || frame.seq > *before.seq_high;
  const bool was_offline = before.status == DeviceStatus::Offline;

  batch.add(received_at_ms, EventKind::FrameIn, id,
            json{{"frame_hex", to_hex(encode_frame(frame))},
                 {"fresh", fresh},
                 {"seq", frame.seq},
                 {"msg_type", to_string(frame.msg_type)}});
  if (was_offline) batch.add(received_at_ms, EventKind::CameOnline, id, json{{"device_id", id}});
  if (fresh && frame.msg_type == MsgType::Alarm && !batch.state().open_alarm_for(id)) {
    const auto fix = fix_from_frame(frame, received_at_ms);
    batch.add(received_at_ms, EventKind::AlarmOpened, id,
              json{{"alarm_id", batch.state().next_alarm_id}, {"fix", optional_fix(fix)}});
  }
  commit(std::move(batch.state()), batch.entries());
  return std::move(batch.entries());
}

std::vector<EventLogEntry> Platform::offline_scan(std::int64_t now_ms, double heartbeat_period_s,
                                                  int missed_k) {
  if (!(heartbeat_period_s > 0) || missed_k < 1) {
    throw PlatformError(PlatformError::Kind::BadRequest,
                        "offline scan needs a positive period and k >= 1");
  }
  const auto limit_ms = static_cast<std::int64_t>(std::llround(missed_k * heartbeat_period_s * 1000.0));
  std::lock_guard lock(mutex_);
  Batch batch(*state_);
  for (const auto& [id, d] : state_->devices) {
    if (d.status != DeviceStatus::Online) continue;
    const auto silent = now_ms - d.last_seen_ms;
    if (silent > limit_ms) {
      batch.add(now_ms, EventKind::WentOffline, id, json{{"device_id", id}, {"silent_ms", silent}});
    }
  }
  if (!batch.entries().empty()) commit(std::move(batch.state()), batch.entries());
  return std::move(batch.entries());
}

CommandTicket Platform::enqueue_command(std::uint32_t device_id, CommandKind cmd,
                                        std::string operator_name, std::int64_t now_ms) {
  std::lock_guard lock(mutex_);
  if (!state_->devices.contains(device_id)) {
    throw PlatformError(PlatformError::Kind::UnknownDevice,
                        fmt::format("unknown device {}", device_id));
  }
  Batch batch(*state_);
  CommandTicket t;
  t.ticket = batch.state().next_ticket;
  t.nonce = static_cast<std::uint32_t>(mix_seed(t.ticket));
  const auto& e = batch.add(now_ms, EventKind::CommandQueued, device_id,
                            json{{"ticket", t.ticket},
                                 {"cmd", to_string(cmd)},
                                 {"cmd_byte", static_cast<unsigned>(cmd)},
                                 {"operator", operator_name},
                                 {"nonce", t.nonce}});
  t.offset = e.offset;
  commit(std::move(batch.state()), batch.entries());
  return t;
}

std::vector<DownlinkCommand> Platform::fetch_pending(std::uint32_t device_id, std::int64_t now_ms) {
  std::lock_guard lock(mutex_);
  if (!state_->devices.contains(device_id)) {
    throw PlatformError(PlatformError::Kind::UnknownDevice,
                        fmt::format("unknown device {}", device_id));
  }
  std::vector<DownlinkCommand> out;
  const auto it = state_->pending.find(device_id);
  if (it == state_->pending.end()) return out;
  Batch batch(*state_);
  for (const auto& c : it->second) {
    DownlinkCommand cmd;
    cmd.device_id = device_id;
    cmd.cmd = c.cmd;
    cmd.nonce = c.nonce;
    out.push_back(cmd);
    batch.add(now_ms, EventKind::CommandDelivered, device_id, json{{"ticket", c.ticket}});
  }
  commit(std::move(batch.state()), batch.entries());
  return out;
}

EventLogEntry Platform::ack_alarm(std::uint64_t alarm_id, const std::string& operator_name,
                                  std::int64_t now_ms, bool close) {
  std::lock_guard lock(mutex_);
  const auto it = state_->alarms.find(alarm_id);
  if (it == state_->alarms.end()) {
    throw PlatformError(PlatformError::Kind::UnknownAlarm, fmt::format("unknown alarm {}", alarm_id));
  }
  const auto& alarm = it->second;
  Batch batch(*state_);
  if (close) {
    if (alarm.state == AlarmState::Open) {
      throw PlatformError(PlatformError::Kind::NotAcked,
                          fmt::format("alarm {} must be acknowledged before closing", alarm_id));
    }
    if (alarm.state == AlarmState::Closed) {
      throw PlatformError(PlatformError::Kind::NotOpen, fmt::format("alarm {} is closed", alarm_id));
    }
    batch.add(now_ms, EventKind::AlarmClosed, alarm.device_id,
              json{{"alarm_id", alarm_id}, {"operator", operator_name}});
  } else {
    if (alarm.state != AlarmState::Open) {
      throw PlatformError(PlatformError::Kind::NotOpen,
                          fmt::format("alarm {} is {}", alarm_id, to_string(alarm.state)));
    }
    batch.add(now_ms, EventKind::AlarmAcked, alarm.device_id,
              json{{"alarm_id", alarm_id}, {"operator", operator_name}});
  }
  auto entry = batch.entries().front();
  commit(std::move(batch.state()), batch.entries());
  return entry;
}

std::shared_ptr<const PlatformState> Platform::snapshot() const {
  std::lock_guard lock(mutex_);
  return state_;
}

std::uint64_t Platform::offset() const {
  std::lock_guard lock(mutex_);
  return state_->next_offset;
}

std::vector<EventLogEntry> Platform::events_since(std::uint64_t since,
                                                  std::optional<std::uint32_t> device) const {
  std::lock_guard lock(mutex_);
  std::vector<EventLogEntry> out;
  for (auto i = static_cast<std::size_t>(std::min<std::uint64_t>(since, log_.size()));
       i < log_.size(); ++i) {
    if (!device || log_[i].device_id == *device) out.push_back(log_[i]);
  }
  return out;
}

std::vector<EventLogEntry> Platform::log() const {
  std::lock_guard lock(mutex_);
  return log_;
}

}  // namespace srcwatch
