#pragma once

// NMEA-0183 sentence handling for the GPS module output: framing and XOR
// checksum, GGA/RMC interpretation into fixed-point fixes, and a seeded fix
// simulator that emits sentences the parser accepts.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace srcwatch {

inline constexpr std::size_t kMaxNmeaLength = 82;  // including "$" and CRLF
inline constexpr std::int32_t kMaxLatE7 = 900'000'000;
inline constexpr std::int32_t kMaxLonE7 = 1'800'000'000;

enum class FixQuality : std::uint8_t { NoFix = 0, Gps = 1, Dgps = 2 };

struct GeoFix {
  std::int32_t lat_e7 = 0;  // north positive
  std::int32_t lon_e7 = 0;  // east positive
  FixQuality quality = FixQuality::NoFix;
  std::uint8_t num_sats = 0;
  std::uint16_t hdop_x10 = 0;
  double utc_s_of_day = 0.0;

  /// NoFix sentences still carry coordinate fields; they must not be used.
  bool usable() const noexcept { return quality != FixQuality::NoFix; }

  bool operator==(const GeoFix&) const = default;
};

struct NmeaSentence {
  std::string talker;               // e.g. "GP"
  std::string type;                 // e.g. "GGA"
  std::vector<std::string> fields;  // after the address field
  std::uint8_t checksum = 0;
};

struct RmcFix {
  double utc_s_of_day = 0.0;
  bool valid = false;
  std::int32_t lat_e7 = 0;
  std::int32_t lon_e7 = 0;
  std::string date_ddmmyy;
};

enum class NmeaErrorKind {
  BadFraming,
  BadChecksum,
  Oversize,
  WrongSentenceType,
  MalformedField,
};

class NmeaError : public std::runtime_error {
 public:
  NmeaError(NmeaErrorKind kind, const std::string& what, std::string field = {})
      : std::runtime_error(what), kind_(kind), field_(std::move(field)) {}

  static NmeaError bad_checksum(std::uint8_t expected, std::uint8_t found);

  NmeaErrorKind kind() const noexcept { return kind_; }
  /// Name of the offending field for MalformedField.
  const std::string& field() const noexcept { return field_; }
  /// Computed checksum, for BadChecksum.
  std::uint8_t expected() const noexcept { return expected_; }
  /// Checksum found in the trailer, for BadChecksum.
  std::uint8_t found() const noexcept { return found_; }

 private:
  NmeaErrorKind kind_;
  std::string field_;
  std::uint8_t expected_ = 0;
  std::uint8_t found_ = 0;
};

std::string_view to_string(NmeaErrorKind kind) noexcept;
std::string_view to_string(FixQuality quality) noexcept;

/// XOR of every byte; `payload` excludes '$' and '*'.
std::uint8_t nmea_checksum(std::string_view payload) noexcept;

/// Accepts "$<address>,<fields>*HH" with an optional "\r\n" or "\n".
NmeaSentence parse_sentence(std::string_view line);

/// GGA only; throws WrongSentenceType otherwise.
GeoFix extract_fix(const NmeaSentence& sentence);

/// RMC only; throws WrongSentenceType otherwise.
RmcFix extract_rmc(const NmeaSentence& sentence);

/// Builds "$<talker><type>,<fields>*HH\r\n".
std::string emit_sentence(std::string_view talker, std::string_view type,
                          const std::vector<std::string>& fields);

/// GGA line for `fix`; coordinates use six decimal minutes, which represent
/// every 1e-7 degree value exactly.
std::string emit_gga(const GeoFix& fix, double altitude_m = 0.0);

/// Degrees to 1e-7 fixed point, rounding half away from zero.
std::int32_t degrees_to_e7(double degrees) noexcept;
double e7_to_degrees(std::int32_t value) noexcept;

struct SimulatedFix {
  GeoFix fix;
  std::string line;
};

/// Adds isotropic Gaussian horizontal noise of `sigma_m` metres around the
/// true position using a local flat-earth approximation (valid for
/// sigma well below 1 km). Deterministic in `seed`.
SimulatedFix simulate_fix(std::int32_t true_lat_e7, std::int32_t true_lon_e7,
                          double sigma_m, std::uint64_t seed,
                          double utc_s_of_day = 0.0);

}  // namespace srcwatch
