#include "srcwatch/nmea.hpp"

#include "srcwatch/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace srcwatch {
namespace {

constexpr double kEarthRadiusM = 6'371'008.8;

bool is_hex(char c) {
  return (c >= '0' && c <= '9') || (c >= 'A' && c <= 'F') || (c >= 'a' && c <= 'f');
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return c - 'a' + 10;
}

bool all_digits(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::int64_t digits_value(std::string_view s) {
  std::int64_t v = 0;
  for (char c : s) v = v * 10 + (c - '0');
  return v;
}

[[noreturn]] void malformed(const std::string& field, const std::string& why) {
  throw NmeaError(NmeaErrorKind::MalformedField, fmt::format("{}: {}", field, why), field);
}

struct Decimal {
  std::int64_t mantissa = 0;  // value * 10^scale_digits
  int scale_digits = 0;
};

// Non-negative decimal "123" or "123.456" with at most `max_frac` fractional digits.
Decimal parse_decimal(std::string_view text, const std::string& field, int max_frac) {
  const auto dot = text.find('.');
  const auto int_part = text.substr(0, dot);
  const auto frac_part = dot == std::string_view::npos ? std::string_view{} : text.substr(dot + 1);
  if (int_part.empty() || !all_digits(int_part) || !all_digits(frac_part)) {
    malformed(field, fmt::format("'{}' is not a decimal number", text));
  }
  if (int_part.size() > 9) malformed(field, "too many integer digits");
  if (static_cast<int>(frac_part.size()) > max_frac) {
    malformed(field, fmt::format("more than {} fractional digits", max_frac));
  }
  Decimal d;
  d.mantissa = digits_value(int_part);
  for (char c : frac_part) d.mantissa = d.mantissa * 10 + (c - '0');
  d.scale_digits = static_cast<int>(frac_part.size());
  return d;
}

std::int64_t pow10(int n) {
  std::int64_t v = 1;
  while (n-- > 0) v *= 10;
  return v;
}

// Rounds num/den half away from zero; num >= 0, den > 0.
std::int64_t div_round_half_up(std::int64_t num, std::int64_t den) {
  return (2 * num + den) / (2 * den);
}

// "ddmm.mmmm" (lat, 2 degree digits) or "dddmm.mmmm" (lon, 3 degree digits).
std::int32_t parse_coordinate(std::string_view text, std::string_view hemisphere,
                              int degree_digits, const std::string& field,
                              std::int32_t limit_e7) {
  const auto dot = text.find('.');
  const auto whole = text.substr(0, dot);
  if (whole.size() != static_cast<std::size_t>(degree_digits + 2) || !all_digits(whole)) {
    malformed(field, fmt::format("'{}' is not {}mm.mmmm", text, std::string(degree_digits, 'd')));
  }
  const auto degrees = digits_value(whole.substr(0, degree_digits));
  const auto minutes = parse_decimal(text.substr(degree_digits), field, 8);
  if (minutes.mantissa >= 60 * pow10(minutes.scale_digits)) {
    malformed(field, "minutes must be below 60");
  }
  const auto frac_e7 = div_round_half_up(minutes.mantissa * 10'000'000,
                                         60 * pow10(minutes.scale_digits));
  const auto magnitude = degrees * 10'000'000 + frac_e7;
  if (magnitude > limit_e7) malformed(field, "coordinate out of range");

  int sign = 0;
  if (hemisphere == "N" || hemisphere == "E") sign = 1;
  if (hemisphere == "S" || hemisphere == "W") sign = -1;
  const bool lat = degree_digits == 2;
  if (sign == 0 || (lat && (hemisphere == "E" || hemisphere == "W")) ||
      (!lat && (hemisphere == "N" || hemisphere == "S"))) {
    malformed(field + "_hemisphere", fmt::format("unexpected hemisphere '{}'", hemisphere));
  }
  return static_cast<std::int32_t>(sign * magnitude);
}

double parse_utc(std::string_view text, const std::string& field) {
  if (text.size() < 6 || !all_digits(text.substr(0, 6))) {
    malformed(field, fmt::format("'{}' is not hhmmss[.ss]", text));
  }
  const auto hh = digits_value(text.substr(0, 2));
  const auto mm = digits_value(text.substr(2, 2));
  const auto sec = parse_decimal(text.substr(4), field, 6);
  if (hh > 23 || mm > 59 || sec.mantissa >= 61 * pow10(sec.scale_digits)) {
    malformed(field, "time of day out of range");
  }
  return static_cast<double>(hh * 3600 + mm * 60) +
         static_cast<double>(sec.mantissa) / static_cast<double>(pow10(sec.scale_digits));
}

void require_type(const NmeaSentence& s, std::string_view type) {
  if (s.type != type) {
    throw NmeaError(NmeaErrorKind::WrongSentenceType,
                    fmt::format("expected {} sentence, got {}", type, s.type));
  }
}

void require_fields(const NmeaSentence& s, std::size_t n) {
  if (s.fields.size() < n) {
    malformed("field_count", fmt::format("{} needs {} fields, got {}", s.type, n, s.fields.size()));
  }
}

std::string format_coordinate(std::int32_t value_e7, int degree_digits) {
  const std::int64_t magnitude = std::abs(static_cast<std::int64_t>(value_e7));
  const auto degrees = magnitude / 10'000'000;
  // 1e-7 degree == 6e-6 minute, so six decimals are exact.
  const auto micro_minutes = (magnitude % 10'000'000) * 6;
  return fmt::format("{:0{}d}{:02d}.{:06d}", degrees, degree_digits,
                     micro_minutes / 1'000'000, micro_minutes % 1'000'000);
}

std::string format_utc(double utc_s_of_day) {
  auto centis = static_cast<std::int64_t>(std::llround(utc_s_of_day * 100.0));
  centis = ((centis % 8'640'000) + 8'640'000) % 8'640'000;
  const auto secs = centis / 100;
  return fmt::format("{:02d}{:02d}{:02d}.{:02d}", secs / 3600, (secs / 60) % 60, secs % 60,
                     centis % 100);
}

}  // namespace

NmeaError NmeaError::bad_checksum(std::uint8_t expected, std::uint8_t found) {
  NmeaError e(NmeaErrorKind::BadChecksum,
              fmt::format("checksum mismatch: computed {:02X}, found {:02X}", expected, found));
  e.expected_ = expected;
  e.found_ = found;
  return e;
}

std::string_view to_string(NmeaErrorKind kind) noexcept {
  switch (kind) {
    case NmeaErrorKind::BadFraming: return "BadFraming";
    case NmeaErrorKind::BadChecksum: return "BadChecksum";
    case NmeaErrorKind::Oversize: return "Oversize";
    case NmeaErrorKind::WrongSentenceType: return "WrongSentenceType";
    case NmeaErrorKind::MalformedField: return "MalformedField";
  }
  return "Unknown";
}

std::string_view to_string(FixQuality quality) noexcept {
  switch (quality) {
    case FixQuality::NoFix: return "NoFix";
    case FixQuality::Gps: return "Gps";
    case FixQuality::Dgps: return "Dgps";
  }
  return "Unknown";
}

std::uint8_t nmea_checksum(std::string_view payload) noexcept {
  std::uint8_t sum = 0;
  for (const char c : payload) sum ^= static_cast<std::uint8_t>(c);
  return sum;
}

NmeaSentence parse_sentence(std::string_view line) {
  if (line.ends_with("\r\n")) {
    line.remove_suffix(2);
  } else if (line.ends_with('\n')) {
    line.remove_suffix(1);
  }
  if (line.size() + 2 > kMaxNmeaLength) {
    throw NmeaError(NmeaErrorKind::Oversize,
                    fmt::format("sentence is {} chars, limit {}", line.size() + 2, kMaxNmeaLength));
  }
  if (line.empty() || line.front() != '$') {
    throw NmeaError(NmeaErrorKind::BadFraming, "sentence must start with '$'");
  }
  if (line.size() < 4 || line[line.size() - 3] != '*') {
    throw NmeaError(NmeaErrorKind::BadFraming, "missing '*HH' checksum trailer");
  }
  const char hi = line[line.size() - 2];
  const char lo = line[line.size() - 1];
  if (!is_hex(hi) || !is_hex(lo)) {
    throw NmeaError(NmeaErrorKind::BadFraming, "checksum trailer is not two hex digits");
  }
  const auto payload = line.substr(1, line.size() - 4);
  for (const char c : payload) {
    const auto u = static_cast<unsigned char>(c);
    if (u < 0x20 || u > 0x7E || c == '$' || c == '*') {
      throw NmeaError(NmeaErrorKind::BadFraming,
                      fmt::format("illegal byte {:#04x} in payload", static_cast<unsigned>(u)));
    }
  }
  const auto found = static_cast<std::uint8_t>((hex_value(hi) << 4) | hex_value(lo));
  const auto expected = nmea_checksum(payload);
  if (found != expected) throw NmeaError::bad_checksum(expected, found);

  NmeaSentence s;
  s.checksum = found;
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto comma = payload.find(',', start);
    parts.emplace_back(payload.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  const auto& address = parts.front();
  const bool address_ok =
      address.size() == 5 && std::all_of(address.begin(), address.end(), [](char c) {
        return (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
      });
  if (!address_ok) {
    throw NmeaError(NmeaErrorKind::BadFraming,
                    fmt::format("address field '{}' is not talker+type", address));
  }
  s.talker = address.substr(0, 2);
  s.type = address.substr(2);
  s.fields.assign(std::make_move_iterator(parts.begin() + 1), std::make_move_iterator(parts.end()));
  return s;
}

GeoFix extract_fix(const NmeaSentence& s) {
  require_type(s, "GGA");
  require_fields(s, 14);
  const auto& f = s.fields;

  GeoFix fix;
  if (f[5].size() != 1 || f[5][0] < '0' || f[5][0] > '2') {
    malformed("quality", fmt::format("unsupported fix quality '{}'", f[5]));
  }
  fix.quality = static_cast<FixQuality>(f[5][0] - '0');
  const bool no_fix = fix.quality == FixQuality::NoFix;

  if (!f[0].empty()) {
    fix.utc_s_of_day = parse_utc(f[0], "utc");
  } else if (!no_fix) {
    malformed("utc", "missing");
  }

  if (!f[1].empty() || !no_fix) fix.lat_e7 = parse_coordinate(f[1], f[2], 2, "lat", kMaxLatE7);
  if (!f[3].empty() || !no_fix) fix.lon_e7 = parse_coordinate(f[3], f[4], 3, "lon", kMaxLonE7);

  if (!f[6].empty()) {
    if (!all_digits(f[6]) || f[6].size() > 2) malformed("num_sats", "not an integer");
    const auto sats = digits_value(f[6]);
    if (sats > 32) malformed("num_sats", "more than 32 satellites");
    fix.num_sats = static_cast<std::uint8_t>(sats);
  }
  if (!f[7].empty()) {
    const auto hdop = parse_decimal(f[7], "hdop", 3);
    const auto x10 = div_round_half_up(hdop.mantissa * 10, pow10(hdop.scale_digits));
    if (x10 > 0xFFFF) malformed("hdop", "out of range");
    fix.hdop_x10 = static_cast<std::uint16_t>(x10);
  }
  return fix;
}

RmcFix extract_rmc(const NmeaSentence& s) {
  require_type(s, "RMC");
  require_fields(s, 9);
  const auto& f = s.fields;
  RmcFix fix;
  if (f[1] != "A" && f[1] != "V") malformed("status", fmt::format("'{}' is not A or V", f[1]));
  fix.valid = f[1] == "A";
  if (!f[0].empty()) fix.utc_s_of_day = parse_utc(f[0], "utc");
  if (!f[2].empty() || fix.valid) fix.lat_e7 = parse_coordinate(f[2], f[3], 2, "lat", kMaxLatE7);
  if (!f[4].empty() || fix.valid) fix.lon_e7 = parse_coordinate(f[4], f[5], 3, "lon", kMaxLonE7);
  if (!f[8].empty() && (f[8].size() != 6 || !all_digits(f[8]))) malformed("date", "not ddmmyy");
  fix.date_ddmmyy = f[8];
  return fix;
}

std::string emit_sentence(std::string_view talker, std::string_view type,
                          const std::vector<std::string>& fields) {
  std::string payload = fmt::format("{}{}", talker, type);
  for (const auto& field : fields) {
    payload.push_back(',');
    payload += field;
  }
  return fmt::format("${}*{:02X}\r\n", payload, nmea_checksum(payload));
}

std::string emit_gga(const GeoFix& fix, double altitude_m) {
  std::vector<std::string> fields{
      format_utc(fix.utc_s_of_day),
      format_coordinate(fix.lat_e7, 2),
      fix.lat_e7 < 0 ? "S" : "N",
      format_coordinate(fix.lon_e7, 3),
      fix.lon_e7 < 0 ? "W" : "E",
      fmt::format("{}", static_cast<int>(fix.quality)),
      fmt::format("{:02d}", fix.num_sats),
      fmt::format("{}.{}", fix.hdop_x10 / 10, fix.hdop_x10 % 10),
      fmt::format("{:.1f}", altitude_m),
      "M",
      "",
      "M",
      "",
      "",
  };
  return emit_sentence("GP", "GGA", fields);
}

std::int32_t degrees_to_e7(double degrees) noexcept {
  return static_cast<std::int32_t>(std::llround(degrees * 1e7));
}

double e7_to_degrees(std::int32_t value) noexcept { return static_cast<double>(value) / 1e7; }

SimulatedFix simulate_fix(std::int32_t true_lat_e7, std::int32_t true_lon_e7, double sigma_m,
                          std::uint64_t seed, double utc_s_of_day) {
  DeterministicRng rng(seed);
  const double north_m = sigma_m * rng.normal();
  const double east_m = sigma_m * rng.normal();

  constexpr double kRadToDeg = 180.0 / std::numbers::pi;
  const double lat = e7_to_degrees(true_lat_e7);
  const double cos_lat = std::max(std::cos(lat / kRadToDeg), 1e-6);
  double noisy_lat = lat + north_m / kEarthRadiusM * kRadToDeg;
  double noisy_lon = e7_to_degrees(true_lon_e7) + east_m / (kEarthRadiusM * cos_lat) * kRadToDeg;
  noisy_lat = std::clamp(noisy_lat, -90.0, 90.0);
  if (noisy_lon > 180.0) noisy_lon -= 360.0;
  if (noisy_lon < -180.0) noisy_lon += 360.0;

  GeoFix fix;
  fix.lat_e7 = std::clamp(degrees_to_e7(noisy_lat), -kMaxLatE7, kMaxLatE7);
  fix.lon_e7 = std::clamp(degrees_to_e7(noisy_lon), -kMaxLonE7, kMaxLonE7);
  fix.quality = FixQuality::Gps;
  fix.num_sats = 8;
  fix.hdop_x10 = 9;
  fix.utc_s_of_day = utc_s_of_day;

  SimulatedFix out;
  out.line = emit_gga(fix);
  out.fix = extract_fix(parse_sentence(out.line));
  return out;
}

}  // namespace srcwatch
