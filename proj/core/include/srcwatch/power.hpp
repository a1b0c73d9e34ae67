#pragma once

// Charge accounting and battery lifetime projection.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace srcwatch {

enum class Component : std::uint8_t { Mcu, Radio, Gps, SirenLight, GammaSensor, Switches };

inline constexpr std::array<Component, 6> kAllComponents = {
    Component::Mcu,        Component::Radio,       Component::Gps,
    Component::SirenLight, Component::GammaSensor, Component::Switches};

std::string_view to_string(Component c) noexcept;

enum class PowerMode : std::uint8_t { Sleep, Active };

std::string_view to_string(PowerMode m) noexcept;

class PowerError : public std::invalid_argument {
 public:
  enum class Kind { NegativeDuration, InvalidProfile, InvalidBattery, InvalidDuty };
  PowerError(Kind kind, const std::string& what) : std::invalid_argument(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

struct ComponentDraw {
  double sleep_uA = 0.0;
  double active_mA = 0.0;
};

class PowerProfile {
 public:
  PowerProfile() = default;

  /// Datasheet-class defaults: MCU 2 uA / 5 mA, radio 3 uA PSM / 220 mA TX,
  /// GPS 0 / 30 mA, siren+light 0 / 150 mA, sensor and switches 0 standby.
  static PowerProfile defaults();

  const ComponentDraw& draw(Component c) const { return draws_[index(c)]; }
  void set(Component c, ComponentDraw d) { draws_[index(c)] = d; }

  /// Current in mA for the component in the given mode.
  double current_mA(Component c, PowerMode mode) const;

  /// Throws PowerError(InvalidProfile): negative currents, sleep above
  /// active, or standby draw on the gamma sensor or the switches.
  void validate() const;

 private:
  static std::size_t index(Component c) { return static_cast<std::size_t>(c); }
  std::array<ComponentDraw, 6> draws_{};
};

struct Battery {
  double capacity_mAh = 19'000.0;
  double self_discharge_fraction_per_year = 0.01;

  void validate() const;
};

struct LedgerEntry {
  double t_start_s = 0.0;
  double t_end_s = 0.0;
  Component component = Component::Mcu;
  PowerMode mode = PowerMode::Sleep;
  double charge_mAh = 0.0;
};

/// Append-only per-component interval record. Each component has its own
/// cursor; new intervals start where the previous one for that component
/// ended, so intervals never overlap. Contiguous intervals in the same mode
/// are coalesced.
class EnergyLedger {
 public:
  const std::vector<LedgerEntry>& entries() const noexcept { return entries_; }
  double total_mAh() const noexcept { return total_mAh_; }
  double cursor_s(Component c) const noexcept { return cursor_s_[static_cast<std::size_t>(c)]; }
  double component_total_mAh(Component c) const noexcept {
    return by_component_[static_cast<std::size_t>(c)];
  }

 private:
  friend EnergyLedger accrue(EnergyLedger, Component, PowerMode, double, const PowerProfile&);

  std::vector<LedgerEntry> entries_;
  std::array<double, 6> cursor_s_{};
  std::array<double, 6> by_component_{};
  double total_mAh_ = 0.0;
};

/// Appends `duration_s` of `component` in `mode`. Throws
/// PowerError(NegativeDuration) for negative durations.
EnergyLedger accrue(EnergyLedger ledger, Component component, PowerMode mode, double duration_s,
                    const PowerProfile& profile);

/// Fraction of time each component spends active; missing entries mean 0.
using DutyCycle = std::map<Component, double>;

struct LifetimeProjection {
  static constexpr double kHorizonYears = 50.0;

  double years = 0.0;           // unbounded solve; +inf when nothing draws
  double annual_draw_mAh = 0.0;
  bool exceeds_horizon() const noexcept { return years > kHorizonYears; }
};

/// Average draw of the duty cycle, in mA.
double average_current_mA(const PowerProfile& profile, const DutyCycle& duty);

/// Years until the battery is empty under constant average draw D and
/// continuous self-discharge at rate lambda = -ln(1 - s):
///   years = ln(1 + lambda * C / D) / lambda   (C / D when s = 0).
/// Throws PowerError(InvalidBattery) for non-positive capacity and
/// PowerError(InvalidDuty) for fractions outside [0, 1].
LifetimeProjection project_lifetime(const PowerProfile& profile, const Battery& battery,
                                    const DutyCycle& duty);

/// capacity * (1 - s)^elapsed - consumed, floored at zero.
double remaining(const EnergyLedger& ledger, const Battery& battery, double elapsed_years);

/// Nominal field duty: one heartbeat of `radio_burst_s` per
/// `heartbeat_period_s`, plus `episodes_per_week` alarm episodes of
/// `episode_s` with MCU, GPS, siren and radio all active.
struct NominalUsage {
  double heartbeat_period_s = 86'400.0;
  double radio_burst_s = 1.5;
  double episodes_per_week = 1.0;
  double episode_s = 10.0;
};

DutyCycle nominal_duty(const NominalUsage& usage);

/// CSV: component,sleep_uA,active_mA,duty,avg_uA,annual_mAh
std::string breakdown_csv(const PowerProfile& profile, const DutyCycle& duty);

/// CSV sensitivity table of projected lifetime against alarm episodes per
/// week and heartbeat period; marks rows that miss `target_years`.
std::string sensitivity_csv(const PowerProfile& profile, const Battery& battery,
                            double target_years = 10.0);

}  // namespace srcwatch
