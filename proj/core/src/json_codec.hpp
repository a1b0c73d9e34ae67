#pragma once

// JSON encodings shared by the platform, its HTTP binding and the report
// emitter. Internal to the build; not installed.

#include "srcwatch/nmea.hpp"
#include "srcwatch/platform.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <initializer_list>
#include <stdexcept>
#include <string>

namespace srcwatch::json_codec {

using nlohmann::json;

template <class E>
E parse_enum(const json& j, std::initializer_list<E> values) {
  const auto text = j.get<std::string>();
  for (auto v : values) {
    if (to_string(v) == text) return v;
  }
  throw std::invalid_argument(fmt::format("unknown enum value '{}'", text));
}

inline json fix_to_json(const GeoFix& f) {
  return json{{"lat_e7", f.lat_e7},         {"lon_e7", f.lon_e7},
              {"quality", to_string(f.quality)}, {"num_sats", f.num_sats},
              {"hdop_x10", f.hdop_x10},     {"utc_s_of_day", f.utc_s_of_day}};
}

inline GeoFix fix_from_json(const json& j) {
  GeoFix f;
  f.lat_e7 = j.at("lat_e7").get<std::int32_t>();
  f.lon_e7 = j.at("lon_e7").get<std::int32_t>();
  f.quality = parse_enum(j.at("quality"), {FixQuality::NoFix, FixQuality::Gps, FixQuality::Dgps});
  f.num_sats = j.at("num_sats").get<std::uint8_t>();
  f.hdop_x10 = j.at("hdop_x10").get<std::uint16_t>();
  f.utc_s_of_day = j.at("utc_s_of_day").get<double>();
  return f;
}

inline json optional_fix(const std::optional<GeoFix>& f) {
  return f ? fix_to_json(*f) : json(nullptr);
}

inline json device_to_json(const DeviceRecord& d) {
  return json{{"device_id", d.device_id},
              {"last_seen_ms", d.last_seen_ms},
              {"status", to_string(d.status)},
              {"last_fix", optional_fix(d.last_fix)},
              {"battery_dAh", d.battery_dAh},
              {"seq_high", d.seq_high ? json(*d.seq_high) : json(nullptr)},
              {"last_flags", d.last_flags},
              {"frames_in", d.frames_in}};
}

inline DeviceRecord device_from_json(const json& j) {
  DeviceRecord d;
  d.device_id = j.at("device_id").get<std::uint32_t>();
  d.last_seen_ms = j.at("last_seen_ms").get<std::int64_t>();
  d.status = parse_enum(j.at("status"),
                        {DeviceStatus::Online, DeviceStatus::Offline, DeviceStatus::Alarming});
  if (!j.at("last_fix").is_null()) d.last_fix = fix_from_json(j.at("last_fix"));
  d.battery_dAh = j.at("battery_dAh").get<std::uint16_t>();
  if (!j.at("seq_high").is_null()) d.seq_high = j.at("seq_high").get<std::uint16_t>();
  d.last_flags = j.at("last_flags").get<std::uint8_t>();
  d.frames_in = j.at("frames_in").get<std::uint64_t>();
  return d;
}

inline json alarm_to_json(const AlarmRecord& a) {
  return json{{"alarm_id", a.alarm_id},
              {"device_id", a.device_id},
              {"opened_at_ms", a.opened_at_ms},
              {"fix_at_open", optional_fix(a.fix_at_open)},
              {"state", to_string(a.state)},
              {"acked_by", a.acked_by ? json(*a.acked_by) : json(nullptr)}};
}

inline json pending_to_json(const PendingCommand& p) {
  return json{{"ticket", p.ticket},
              {"device_id", p.device_id},
              {"cmd", to_string(p.cmd)},
              {"cmd_byte", static_cast<unsigned>(p.cmd)},
              {"operator", p.operator_name},
              {"nonce", p.nonce},
              {"queued_at_ms", p.queued_at_ms}};
}

inline json entry_to_json(const EventLogEntry& e) {
  return json{{"offset", e.offset},
              {"ts_ms", e.timestamp_ms},
              {"kind", to_string(e.kind)},
              {"device_id", e.device_id},
              {"payload", json::parse(e.payload)}};
}

inline EventLogEntry entry_from_json(const json& j) {
  EventLogEntry e;
  e.offset = j.at("offset").get<std::uint64_t>();
  e.timestamp_ms = j.at("ts_ms").get<std::int64_t>();
  const auto kind = event_kind_from_string(j.at("kind").get<std::string>());
  if (!kind) throw std::invalid_argument("unknown event kind");
  e.kind = *kind;
  e.device_id = j.at("device_id").get<std::uint32_t>();
  const auto& payload = j.at("payload");
  if (!payload.is_object()) throw std::invalid_argument("payload must be an object");
  e.payload = payload.dump();
  return e;
}

}  // namespace srcwatch::json_codec
