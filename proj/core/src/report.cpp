#include "srcwatch/report.hpp"

#include <nlohmann/json.hpp>

#include <fmt/format.h>

#include <cmath>

namespace srcwatch {

namespace {

std::string secs(std::optional<std::int64_t> ms) {
  if (!ms) return {};
  return fmt::format("{:.3f}", static_cast<double>(*ms) / 1000.0);
}

std::string secs(std::optional<double> s) { return s ? fmt::format("{:.3f}", *s) : std::string{}; }

std::string mah(double v) { return fmt::format("{:.6f}", v); }

// Rounded so the JSON text is as stable as the CSV.
double round_to(double v, double scale) { return std::round(v * scale) / scale; }

nlohmann::ordered_json opt_secs(std::optional<std::int64_t> ms) {
  if (!ms) return nullptr;
  return round_to(static_cast<double>(*ms) / 1000.0, 1e3);
}

nlohmann::ordered_json opt_secs(std::optional<double> s) {
  if (!s) return nullptr;
  return round_to(*s, 1e3);
}

constexpr Component kOrder[] = {Component::Mcu,        Component::Radio,
                                Component::Gps,        Component::SirenLight,
                                Component::GammaSensor, Component::Switches};

double energy(const DeviceReport& d, Component c) {
  return d.energy_mAh[static_cast<std::size_t>(c)];
}

std::string csv(const SimReport& r) {
  std::string out(kReportCsvHeader);
  out += '\n';
  for (const auto& d : r.devices) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{}", d.device_id, secs(d.shed_at_ms),
                       secs(d.trigger_at_ms), secs(d.local_alarm_at_ms),
                       secs(d.platform_alarm_at_ms), secs(d.shed_to_local_alarm_s()),
                       secs(d.shed_to_platform_alarm_s()), d.frames_sent, d.frames_delivered,
                       d.frames_failed, d.heartbeats_sent, d.alarm_frames_sent,
                       d.downlinks_delivered, d.alarms_opened);
    for (auto c : kOrder) out += "," + mah(energy(d, c));
    out += fmt::format(",{},{},{},{},{}\n", mah(d.energy_total_mAh), mah(d.battery_remaining_mAh),
                       to_string(d.final_mode), to_string(d.final_lock), d.final_status);
  }
  return out;
}

std::string json_lines(const SimReport& r) {
  std::string out;
  for (const auto& d : r.devices) {
    nlohmann::ordered_json j;
    j["record"] = "device";
    j["device_id"] = d.device_id;
    j["shed_at_s"] = opt_secs(d.shed_at_ms);
    j["trigger_at_s"] = opt_secs(d.trigger_at_ms);
    j["local_alarm_at_s"] = opt_secs(d.local_alarm_at_ms);
    j["platform_alarm_at_s"] = opt_secs(d.platform_alarm_at_ms);
    j["shed_to_local_alarm_s"] = opt_secs(d.shed_to_local_alarm_s());
    j["shed_to_platform_alarm_s"] = opt_secs(d.shed_to_platform_alarm_s());
    j["frames"] = {{"sent", d.frames_sent},
                   {"delivered", d.frames_delivered},
                   {"failed", d.frames_failed},
                   {"heartbeats", d.heartbeats_sent},
                   {"alarms", d.alarm_frames_sent}};
    j["downlinks_delivered"] = d.downlinks_delivered;
    j["alarms_opened"] = d.alarms_opened;
    nlohmann::ordered_json e;
    for (auto c : kOrder) e[std::string(to_string(c))] = round_to(energy(d, c), 1e6);
    e["total"] = round_to(d.energy_total_mAh, 1e6);
    j["energy_mAh"] = e;
    j["battery_remaining_mAh"] = round_to(d.battery_remaining_mAh, 1e6);
    j["final_mode"] = to_string(d.final_mode);
    j["final_lock"] = to_string(d.final_lock);
    j["final_status"] = d.final_status;
    out += j.dump() + "\n";
  }
  nlohmann::ordered_json s;
  s["record"] = "summary";
  s["scenario"] = r.scenario;
  s["seed"] = r.seed;
  s["duration_s"] = round_to(static_cast<double>(r.duration_ms) / 1000.0, 1e3);
  s["devices"] = r.devices.size();
  s["counts"] = nlohmann::json(r.counts);  // std::map: sorted keys
  out += s.dump() + "\n";
  return out;
}

std::string human(const SimReport& r) {
  std::string out = fmt::format("scenario {} (seed {}, {:.3f} s, {} device{})\n", r.scenario,
                                r.seed, static_cast<double>(r.duration_ms) / 1000.0,
                                r.devices.size(), r.devices.size() == 1 ? "" : "s");
  auto or_dash = [](const std::string& s) { return s.empty() ? std::string("-") : s; };
  for (const auto& d : r.devices) {
    out += fmt::format("\ndevice {}\n", d.device_id);
    out += fmt::format("  shed at            {} s\n", or_dash(secs(d.shed_at_ms)));
    out += fmt::format("  local alarm at     {} s\n", or_dash(secs(d.local_alarm_at_ms)));
    out += fmt::format("  platform alarm at  {} s\n", or_dash(secs(d.platform_alarm_at_ms)));
    out += fmt::format("  shed -> local      {} s\n", or_dash(secs(d.shed_to_local_alarm_s())));
    out += fmt::format("  shed -> platform   {} s\n",
                       or_dash(secs(d.shed_to_platform_alarm_s())));
    out += fmt::format("  frames             {} sent, {} delivered, {} failed\n", d.frames_sent,
                       d.frames_delivered, d.frames_failed);
    out += fmt::format("  alarms opened      {}\n", d.alarms_opened);
    out += "  energy (mAh)      ";
    for (auto c : kOrder) out += fmt::format(" {}={}", to_string(c), mah(energy(d, c)));
    out += fmt::format("\n  energy total       {} mAh\n", mah(d.energy_total_mAh));
    out += fmt::format("  battery remaining  {} mAh\n", mah(d.battery_remaining_mAh));
    out += fmt::format("  final              mode={} lock={} platform={}\n",
                       to_string(d.final_mode), to_string(d.final_lock), d.final_status);
  }
  if (!r.counts.empty()) {
    out += "\ncounts\n";
    for (const auto& [k, v] : r.counts) out += fmt::format("  {:<32} {}\n", k, v);
  }
  return out;
}

}  // namespace

std::optional<ReportFormat> report_format_from_string(std::string_view name) noexcept {
  if (name == "human") return ReportFormat::Human;
  if (name == "csv") return ReportFormat::Csv;
  if (name == "json-lines") return ReportFormat::JsonLines;
  return std::nullopt;
}

std::string emit_report(const SimReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::Human: return human(report);
    case ReportFormat::Csv: return csv(report);
    case ReportFormat::JsonLines: return json_lines(report);
  }
  return {};
}

}  // namespace srcwatch
