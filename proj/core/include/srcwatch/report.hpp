#pragma once

#include "srcwatch/sim.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace srcwatch {

enum class ReportFormat { Human, Csv, JsonLines };

std::optional<ReportFormat> report_format_from_string(std::string_view name) noexcept;

/// CSV has one row per device under a fixed header (see kReportCsvHeader);
/// empty optionals are empty cells. JSON lines: one {"record":"device"} object
/// per device followed by one {"record":"summary"} object. Times are seconds
/// with millisecond precision, energies mAh with six decimals.
std::string emit_report(const SimReport& report, ReportFormat format);

inline constexpr std::string_view kReportCsvHeader =
    "device_id,shed_at_s,trigger_at_s,local_alarm_at_s,platform_alarm_at_s,"
    "shed_to_local_alarm_s,shed_to_platform_alarm_s,frames_sent,frames_delivered,"
    "frames_failed,heartbeats_sent,alarm_frames_sent,downlinks_delivered,alarms_opened,"
    "energy_mcu_mAh,energy_radio_mAh,energy_gps_mAh,energy_siren_light_mAh,"
    "energy_gamma_sensor_mAh,energy_switches_mAh,energy_total_mAh,battery_remaining_mAh,"
    "final_mode,final_lock,final_status";

}  // namespace srcwatch
