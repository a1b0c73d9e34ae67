#pragma once

// Physics-lite models of the detector's sensing elements: the gamma-ray
// photo sensor behind its lead filter, the two keyed switches read through
// servo circuits, and the braid lock.

#include "srcwatch/hazard.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace srcwatch {

class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct GammaSensorConfig {
  double threshold_uA = 1.0;
  double responsivity_uA_per_mSvh = 1.0;
  double lead_thickness_mm = 2.0;
  double mu_source_per_mm = 0.06;  // flaw-source gamma energies
  double mu_du_per_mm = 1.5;       // depleted-uranium gamma, low energy
  double sense_distance_m = 0.05;  // sensor to braid at the retracted position
  double du_background_mSvh = 0.5; // tank background at the sensor, unshielded

  /// Throws DomainError if any field violates its range.
  void validate() const;
};

enum class Isotope { Ir192, Se75, Cs137, Co60, DepletedUraniumShield };

std::string_view to_string(Isotope isotope) noexcept;
std::optional<Isotope> isotope_from_string(std::string_view name) noexcept;

/// Dose-rate constant in mSv/h per GBq at 1 m. Placeholder values in the
/// range quoted by radiography handbooks; not used for DU.
double gamma_constant(Isotope isotope);

class RadiationSource {
 public:
  /// Throws DomainError unless activity and gamma constant are positive.
  RadiationSource(Isotope isotope, double activity_GBq,
                  double gamma_constant_mSvh_per_GBq_at_1m);

  /// Working isotope with its tabulated dose-rate constant.
  static RadiationSource working(Isotope isotope, double activity_GBq = 3.7);
  /// The shield tank as a point source that yields `cfg.du_background_mSvh`
  /// at the sense distance without lead.
  static RadiationSource depleted_uranium_background(const GammaSensorConfig& cfg);

  Isotope isotope() const noexcept { return isotope_; }
  double activity_GBq() const noexcept { return activity_GBq_; }
  double gamma_constant_mSvh_per_GBq_at_1m() const noexcept { return gamma_; }

 private:
  Isotope isotope_;
  double activity_GBq_;
  double gamma_;
};

/// Point-source dose: gamma * A / d^2 * exp(-mu * t), mSv/h.
double dose_rate(const RadiationSource& source, double distance_m, double shield_mm,
                 double mu_per_mm);

/// Linear photodiode: responsivity * dose, in uA. Zero dose draws no current.
double photo_current(double dose_mSvh, const GammaSensorConfig& cfg);

/// Current the sensor sees from `source` at `distance_m` through the
/// configured lead sheet, using the attenuation matching the isotope.
double sensed_current(const RadiationSource& source, double distance_m,
                      const GammaSensorConfig& cfg);

bool sensor_triggered(const RadiationSource& source, double distance_m,
                      const GammaSensorConfig& cfg);

enum class SwitchFault { None, StuckOpen, StuckClosed, WireBreak };

std::string_view to_string(SwitchFault fault) noexcept;
std::optional<SwitchFault> switch_fault_from_string(std::string_view name) noexcept;

/// Servo circuit: a closed (pressed) switch pulls the detection point High.
/// Open-type faults read Low whatever the switch does; StuckClosed reads
/// High, which is the one failure the circuit cannot expose.
SwitchLevel servo_read(bool pressed, SwitchFault fault) noexcept;

enum class LockState { Open, ClosedSafe, EngagedBlocking };

std::string_view to_string(LockState state) noexcept;

struct LockOutcome {
  LockState state = LockState::Open;
  bool blocked = false;  // the close attempt was mechanically refused

  bool operator==(const LockOutcome&) const = default;
};

/// The lock blocks whenever the braid is out and releases by itself once
/// the braid is back.
LockOutcome lock_transition(LockState current, SourcePosition braid, bool attempt_close) noexcept;

/// Loads a YAML sensor config; keys match the struct fields. Missing keys
/// keep their defaults. Throws DomainError on bad values.
GammaSensorConfig load_sensor_config(const std::filesystem::path& path);
GammaSensorConfig parse_sensor_config(std::string_view yaml_text);

}  // namespace srcwatch
