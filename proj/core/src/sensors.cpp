#include "srcwatch/sensors.hpp"

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <sstream>

namespace srcwatch {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw DomainError(what);
}

}  // namespace

void GammaSensorConfig::validate() const {
  require(threshold_uA > 0, "threshold_uA must be positive");
  require(responsivity_uA_per_mSvh > 0, "responsivity_uA_per_mSvh must be positive");
  require(lead_thickness_mm >= 0, "lead_thickness_mm must be non-negative");
  require(mu_source_per_mm > 0, "mu_source_per_mm must be positive");
  require(mu_du_per_mm > 0, "mu_du_per_mm must be positive");
  require(sense_distance_m > 0, "sense_distance_m must be positive");
  require(du_background_mSvh > 0, "du_background_mSvh must be positive");
}

std::string_view to_string(Isotope isotope) noexcept {
  switch (isotope) {
    case Isotope::Ir192: return "Ir192";
    case Isotope::Se75: return "Se75";
    case Isotope::Cs137: return "Cs137";
    case Isotope::Co60: return "Co60";
    case Isotope::DepletedUraniumShield: return "DepletedUraniumShield";
  }
  return "Unknown";
}

std::optional<Isotope> isotope_from_string(std::string_view name) noexcept {
  for (auto i : {Isotope::Ir192, Isotope::Se75, Isotope::Cs137, Isotope::Co60,
                 Isotope::DepletedUraniumShield}) {
    if (to_string(i) == name) return i;
  }
  return std::nullopt;
}

double gamma_constant(Isotope isotope) {
  switch (isotope) {
    case Isotope::Ir192: return 0.13;
    case Isotope::Se75: return 0.054;
    case Isotope::Cs137: return 0.0927;
    case Isotope::Co60: return 0.351;
    case Isotope::DepletedUraniumShield: break;
  }
  throw DomainError("depleted uranium has no tabulated dose-rate constant");
}

RadiationSource::RadiationSource(Isotope isotope, double activity_GBq,
                                 double gamma_constant_mSvh_per_GBq_at_1m)
    : isotope_(isotope), activity_GBq_(activity_GBq), gamma_(gamma_constant_mSvh_per_GBq_at_1m) {
  // Negated comparisons also reject NaN.
  require(!(activity_GBq <= 0) && !std::isnan(activity_GBq), "activity_GBq must be positive");
  require(!(gamma_ <= 0) && !std::isnan(gamma_), "gamma constant must be positive");
}

RadiationSource RadiationSource::working(Isotope isotope, double activity_GBq) {
  return RadiationSource(isotope, activity_GBq, gamma_constant(isotope));
}

RadiationSource RadiationSource::depleted_uranium_background(const GammaSensorConfig& cfg) {
  cfg.validate();
  const double d = cfg.sense_distance_m;
  return RadiationSource(Isotope::DepletedUraniumShield, 1.0, cfg.du_background_mSvh * d * d);
}

double dose_rate(const RadiationSource& source, double distance_m, double shield_mm,
                 double mu_per_mm) {
  if (!(distance_m > 0)) throw DomainError(fmt::format("distance_m must be > 0, got {}", distance_m));
  if (!(shield_mm >= 0)) throw DomainError("shield_mm must be >= 0");
  if (!(mu_per_mm > 0)) throw DomainError("mu_per_mm must be > 0");
  return source.gamma_constant_mSvh_per_GBq_at_1m() * source.activity_GBq() /
         (distance_m * distance_m) * std::exp(-mu_per_mm * shield_mm);
}

double photo_current(double dose_mSvh, const GammaSensorConfig& cfg) {
  return cfg.responsivity_uA_per_mSvh * dose_mSvh;
}

double sensed_current(const RadiationSource& source, double distance_m,
                      const GammaSensorConfig& cfg) {
  const double mu = source.isotope() == Isotope::DepletedUraniumShield ? cfg.mu_du_per_mm
                                                                       : cfg.mu_source_per_mm;
  return photo_current(dose_rate(source, distance_m, cfg.lead_thickness_mm, mu), cfg);
}

bool sensor_triggered(const RadiationSource& source, double distance_m,
                      const GammaSensorConfig& cfg) {
  return sensed_current(source, distance_m, cfg) > cfg.threshold_uA;
}

std::string_view to_string(SwitchFault fault) noexcept {
  switch (fault) {
    case SwitchFault::None: return "None";
    case SwitchFault::StuckOpen: return "StuckOpen";
    case SwitchFault::StuckClosed: return "StuckClosed";
    case SwitchFault::WireBreak: return "WireBreak";
  }
  return "Unknown";
}

std::optional<SwitchFault> switch_fault_from_string(std::string_view name) noexcept {
  for (auto f : {SwitchFault::None, SwitchFault::StuckOpen, SwitchFault::StuckClosed,
                 SwitchFault::WireBreak}) {
    if (to_string(f) == name) return f;
  }
  return std::nullopt;
}

SwitchLevel servo_read(bool pressed, SwitchFault fault) noexcept {
  switch (fault) {
    case SwitchFault::StuckOpen:
    case SwitchFault::WireBreak:
      return SwitchLevel::Low;
    case SwitchFault::StuckClosed:
      return SwitchLevel::High;
    case SwitchFault::None:
      break;
  }
  return pressed ? SwitchLevel::High : SwitchLevel::Low;
}

std::string_view to_string(LockState state) noexcept {
  switch (state) {
    case LockState::Open: return "Open";
    case LockState::ClosedSafe: return "ClosedSafe";
    case LockState::EngagedBlocking: return "EngagedBlocking";
  }
  return "Unknown";
}

LockOutcome lock_transition(LockState current, SourcePosition braid, bool attempt_close) noexcept {
  const bool home = braid == SourcePosition::Retracted;
  if (!home) return {LockState::EngagedBlocking, attempt_close};
  if (attempt_close) return {LockState::ClosedSafe, false};
  // Braid is home: a blocking lock releases, otherwise nothing changes.
  return {current == LockState::EngagedBlocking ? LockState::Open : current, false};
}

GammaSensorConfig parse_sensor_config(std::string_view yaml_text) {
  GammaSensorConfig cfg;
  YAML::Node root;
  try {
    root = YAML::Load(std::string(yaml_text));
  } catch (const YAML::Exception& e) {
    throw DomainError(fmt::format("sensor config: {}", e.what()));
  }
  if (root.IsNull()) return cfg;
  if (!root.IsMap()) throw DomainError("sensor config: expected a mapping");
  const auto node = root["sensor"] ? root["sensor"] : root;
  auto read = [&](const char* key, double& field) {
    if (const auto v = node[key]) {
      try {
        field = v.as<double>();
      } catch (const YAML::Exception&) {
        throw DomainError(fmt::format("sensor config: {} is not a number (line {})", key,
                                      v.Mark().line + 1));
      }
    }
  };
  read("threshold_uA", cfg.threshold_uA);
  read("responsivity_uA_per_mSvh", cfg.responsivity_uA_per_mSvh);
  read("lead_thickness_mm", cfg.lead_thickness_mm);
  read("mu_source_per_mm", cfg.mu_source_per_mm);
  read("mu_du_per_mm", cfg.mu_du_per_mm);
  read("sense_distance_m", cfg.sense_distance_m);
  read("du_background_mSvh", cfg.du_background_mSvh);
  cfg.validate();
  return cfg;
}

GammaSensorConfig load_sensor_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DomainError(fmt::format("cannot open sensor config {}", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_sensor_config(buf.str());
}

}  // namespace srcwatch
