#include "srcwatch/power.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>

namespace srcwatch {
namespace {

constexpr double kHoursPerYear = 8760.0;
constexpr double kSecondsPerWeek = 7.0 * 86'400.0;

}  // namespace

std::string_view to_string(Component c) noexcept {
  switch (c) {
    case Component::Mcu: return "Mcu";
    case Component::Radio: return "Radio";
    case Component::Gps: return "Gps";
    case Component::SirenLight: return "SirenLight";
    case Component::GammaSensor: return "GammaSensor";
    case Component::Switches: return "Switches";
  }
  return "Unknown";
}

std::string_view to_string(PowerMode m) noexcept {
  return m == PowerMode::Sleep ? "sleep" : "active";
}

PowerProfile PowerProfile::defaults() {
  PowerProfile p;
  p.set(Component::Mcu, {2.0, 5.0});
  p.set(Component::Radio, {3.0, 220.0});
  p.set(Component::Gps, {0.0, 30.0});
  p.set(Component::SirenLight, {0.0, 150.0});
  p.set(Component::GammaSensor, {0.0, 0.002});
  p.set(Component::Switches, {0.0, 0.01});
  return p;
}

double PowerProfile::current_mA(Component c, PowerMode mode) const {
  const auto& d = draw(c);
  return mode == PowerMode::Sleep ? d.sleep_uA / 1000.0 : d.active_mA;
}

void PowerProfile::validate() const {
  for (auto c : kAllComponents) {
    const auto& d = draw(c);
    if (!(d.sleep_uA >= 0) || !(d.active_mA >= 0)) {
      throw PowerError(PowerError::Kind::InvalidProfile,
                       fmt::format("{}: currents must be non-negative", to_string(c)));
    }
    if (d.sleep_uA / 1000.0 > d.active_mA) {
      throw PowerError(PowerError::Kind::InvalidProfile,
                       fmt::format("{}: sleep draw exceeds active draw", to_string(c)));
    }
  }
  for (auto c : {Component::GammaSensor, Component::Switches}) {
    if (draw(c).sleep_uA != 0.0) {
      throw PowerError(PowerError::Kind::InvalidProfile,
                       fmt::format("{}: standby draw must be zero", to_string(c)));
    }
  }
}

void Battery::validate() const {
  if (!(capacity_mAh > 0)) {
    throw PowerError(PowerError::Kind::InvalidBattery, "battery capacity must be positive");
  }
  if (!(self_discharge_fraction_per_year >= 0) || !(self_discharge_fraction_per_year < 1)) {
    throw PowerError(PowerError::Kind::InvalidBattery, "self-discharge must be in [0, 1)");
  }
}

EnergyLedger accrue(EnergyLedger ledger, Component component, PowerMode mode, double duration_s,
                    const PowerProfile& profile) {
  if (!(duration_s >= 0)) {
    throw PowerError(PowerError::Kind::NegativeDuration,
                     fmt::format("duration must be non-negative, got {}", duration_s));
  }
  if (duration_s == 0) return ledger;
  const auto idx = static_cast<std::size_t>(component);
  const double start = ledger.cursor_s_[idx];
  const double end = start + duration_s;
  const double charge = profile.current_mA(component, mode) * duration_s / 3600.0;

  // Coalesce only with the newest entry so the record stays append-only.
  if (!ledger.entries_.empty()) {
    auto& last = ledger.entries_.back();
    if (last.component == component && last.mode == mode && last.t_end_s == start) {
      last.t_end_s = end;
      last.charge_mAh += charge;
      ledger.cursor_s_[idx] = end;
      ledger.by_component_[idx] += charge;
      ledger.total_mAh_ += charge;
      return ledger;
    }
  }
  ledger.entries_.push_back({start, end, component, mode, charge});
  ledger.cursor_s_[idx] = end;
  ledger.by_component_[idx] += charge;
  ledger.total_mAh_ += charge;
  return ledger;
}

double average_current_mA(const PowerProfile& profile, const DutyCycle& duty) {
  double total = 0.0;
  for (auto c : kAllComponents) {
    const auto it = duty.find(c);
    const double f = it == duty.end() ? 0.0 : it->second;
    if (!(f >= 0.0 && f <= 1.0)) {
      throw PowerError(PowerError::Kind::InvalidDuty,
                       fmt::format("{}: duty fraction {} outside [0, 1]", to_string(c), f));
    }
    total += f * profile.current_mA(c, PowerMode::Active) +
             (1.0 - f) * profile.current_mA(c, PowerMode::Sleep);
  }
  return total;
}

LifetimeProjection project_lifetime(const PowerProfile& profile, const Battery& battery,
                                    const DutyCycle& duty) {
  battery.validate();
  LifetimeProjection out;
  const double draw = average_current_mA(profile, duty) * kHoursPerYear;
  out.annual_draw_mAh = draw;
  if (draw <= 0.0) {
    out.years = std::numeric_limits<double>::infinity();
    return out;
  }
  const double s = battery.self_discharge_fraction_per_year;
  if (s == 0.0) {
    out.years = battery.capacity_mAh / draw;
  } else {
    const double lambda = -std::log1p(-s);
    out.years = std::log1p(lambda * battery.capacity_mAh / draw) / lambda;
  }
  return out;
}

double remaining(const EnergyLedger& ledger, const Battery& battery, double elapsed_years) {
  const double left =
      battery.capacity_mAh * std::pow(1.0 - battery.self_discharge_fraction_per_year,
                                      std::max(elapsed_years, 0.0)) -
      ledger.total_mAh();
  return std::max(left, 0.0);
}

DutyCycle nominal_duty(const NominalUsage& u) {
  const double episode = u.episodes_per_week * u.episode_s / kSecondsPerWeek;
  const double heartbeat = u.heartbeat_period_s > 0 ? u.radio_burst_s / u.heartbeat_period_s : 0.0;
  DutyCycle duty;
  duty[Component::Mcu] = episode;
  duty[Component::Radio] = std::min(1.0, episode + heartbeat);
  duty[Component::Gps] = episode;
  duty[Component::SirenLight] = episode;
  duty[Component::GammaSensor] = episode;
  duty[Component::Switches] = episode;
  for (auto& [c, f] : duty) f = std::min(f, 1.0);
  return duty;
}

std::string breakdown_csv(const PowerProfile& profile, const DutyCycle& duty) {
  std::string out = "component,sleep_uA,active_mA,duty,avg_uA,annual_mAh\n";
  for (auto c : kAllComponents) {
    const auto it = duty.find(c);
    const double f = it == duty.end() ? 0.0 : it->second;
    const double avg_mA = f * profile.current_mA(c, PowerMode::Active) +
                          (1.0 - f) * profile.current_mA(c, PowerMode::Sleep);
    out += fmt::format("{},{:.3f},{:.3f},{:.9f},{:.4f},{:.3f}\n", to_string(c),
                       profile.draw(c).sleep_uA, profile.draw(c).active_mA, f, avg_mA * 1000.0,
                       avg_mA * kHoursPerYear);
  }
  return out;
}

std::string sensitivity_csv(const PowerProfile& profile, const Battery& battery,
                            double target_years) {
  std::string out = "episodes_per_week,heartbeat_period_s,avg_uA,years,meets_target\n";
  const double episodes[] = {0, 1, 7, 14, 28, 56, 112, 224};
  const double heartbeats[] = {3600, 21600, 86400};
  for (double hb : heartbeats) {
    for (double e : episodes) {
      NominalUsage u;
      u.heartbeat_period_s = hb;
      u.episodes_per_week = e;
      const auto duty = nominal_duty(u);
      const auto p = project_lifetime(profile, battery, duty);
      const std::string years = p.exceeds_horizon()
                                    ? std::string("exceeds horizon")
                                    : fmt::format("{:.2f}", p.years);
      out += fmt::format("{},{},{:.3f},{},{}\n", e, hb, average_current_mA(profile, duty) * 1000.0,
                         years, p.years >= target_years ? "yes" : "no");
    }
  }
  return out;
}

}  // namespace srcwatch
