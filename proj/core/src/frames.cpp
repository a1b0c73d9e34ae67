#include "srcwatch/frames.hpp"

#include "srcwatch/crc16.hpp"

#include <fmt/format.h>

namespace srcwatch {
namespace {

class Writer {
 public:
  explicit Writer(std::span<std::uint8_t> out) : out_(out) {}

  void u8(std::uint8_t v) { out_[pos_++] = v; }
  void u16(std::uint16_t v) {
    u8(static_cast<std::uint8_t>(v >> 8));
    u8(static_cast<std::uint8_t>(v));
  }
  void u32(std::uint32_t v) {
    u16(static_cast<std::uint16_t>(v >> 16));
    u16(static_cast<std::uint16_t>(v));
  }
  std::size_t pos() const { return pos_; }

 private:
  std::span<std::uint8_t> out_;
  std::size_t pos_ = 0;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() { return in_[pos_++]; }
  std::uint16_t u16() {
    const auto hi = u8();
    return static_cast<std::uint16_t>((hi << 8) | u8());
  }
  std::uint32_t u32() {
    const std::uint32_t hi = u16();
    return (hi << 16) | u16();
  }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void check_envelope(std::span<const std::uint8_t> bytes, std::size_t expected,
                    const char* what) {
  if (bytes.size() != expected) {
    throw FrameError(FrameErrorKind::BadLength,
                     fmt::format("{}: expected {} bytes, got {}", what, expected,
                                 bytes.size()));
  }
  const auto body = bytes.first(expected - 2);
  const auto found = static_cast<std::uint16_t>((bytes[expected - 2] << 8) |
                                                bytes[expected - 1]);
  const auto computed = crc16_ccitt_false(body);
  if (found != computed) {
    throw FrameError(FrameErrorKind::BadCrc,
                     fmt::format("{}: crc mismatch (computed {:04x}, found {:04x})",
                                 what, computed, found));
  }
  if (bytes[0] != kProtocolVersion) {
    throw FrameError(FrameErrorKind::UnknownVersion,
                     fmt::format("{}: unknown version {:#04x}", what, bytes[0]));
  }
}

template <std::size_t N>
void seal(std::array<std::uint8_t, N>& out) {
  const auto crc = crc16_ccitt_false(std::span<const std::uint8_t>(out).first(N - 2));
  out[N - 2] = static_cast<std::uint8_t>(crc >> 8);
  out[N - 1] = static_cast<std::uint8_t>(crc);
}

}  // namespace

UplinkBytes encode_frame(const UplinkFrame& frame) {
  UplinkBytes out{};
  Writer w(out);
  w.u8(frame.version);
  w.u32(frame.device_id);
  w.u16(frame.seq);
  w.u8(static_cast<std::uint8_t>(frame.msg_type));
  w.u8(frame.flags);
  w.u32(static_cast<std::uint32_t>(frame.lat_e7));
  w.u32(static_cast<std::uint32_t>(frame.lon_e7));
  w.u16(frame.battery_dAh);
  seal(out);
  return out;
}

UplinkFrame decode_frame(std::span<const std::uint8_t> bytes) {
  check_envelope(bytes, kUplinkFrameSize, "uplink frame");
  Reader r(bytes);
  UplinkFrame f;
  f.version = r.u8();
  f.device_id = r.u32();
  f.seq = r.u16();
  const auto type = r.u8();
  if (!is_known_msg_type(type)) {
    throw FrameError(FrameErrorKind::UnknownMsgType,
                     fmt::format("uplink frame: unknown msg_type {:#04x}", type));
  }
  f.msg_type = static_cast<MsgType>(type);
  f.flags = r.u8();
  f.lat_e7 = static_cast<std::int32_t>(r.u32());
  f.lon_e7 = static_cast<std::int32_t>(r.u32());
  f.battery_dAh = r.u16();
  return f;
}

DownlinkBytes encode_command(const DownlinkCommand& command) {
  DownlinkBytes out{};
  Writer w(out);
  w.u8(command.version);
  w.u32(command.device_id);
  w.u8(static_cast<std::uint8_t>(command.cmd));
  w.u32(command.nonce);
  seal(out);
  return out;
}

DownlinkCommand decode_command(std::span<const std::uint8_t> bytes) {
  check_envelope(bytes, kDownlinkFrameSize, "downlink command");
  Reader r(bytes);
  DownlinkCommand c;
  c.version = r.u8();
  c.device_id = r.u32();
  c.cmd = static_cast<CommandKind>(r.u8());
  c.nonce = r.u32();
  return c;
}

bool is_known_msg_type(std::uint8_t raw) noexcept { return raw >= 0x01 && raw <= 0x04; }

bool is_known_command(CommandKind kind) noexcept {
  const auto raw = static_cast<std::uint8_t>(kind);
  return raw >= 0x10 && raw <= 0x13;
}

std::string_view to_string(MsgType type) noexcept {
  switch (type) {
    case MsgType::Heartbeat: return "Heartbeat";
    case MsgType::Alarm: return "Alarm";
    case MsgType::FixReport: return "FixReport";
    case MsgType::Ack: return "Ack";
  }
  return "Unknown";
}

std::string_view to_string(CommandKind kind) noexcept {
  switch (kind) {
    case CommandKind::Wake: return "Wake";
    case CommandKind::Locate: return "Locate";
    case CommandKind::Silence: return "Silence";
    case CommandKind::Ping: return "Ping";
  }
  return "Unknown";
}

std::string_view to_string(FrameErrorKind kind) noexcept {
  switch (kind) {
    case FrameErrorKind::BadLength: return "BadLength";
    case FrameErrorKind::BadCrc: return "BadCrc";
    case FrameErrorKind::UnknownVersion: return "UnknownVersion";
    case FrameErrorKind::UnknownMsgType: return "UnknownMsgType";
  }
  return "Unknown";
}

std::optional<MsgType> msg_type_from_string(std::string_view name) noexcept {
  for (auto t : {MsgType::Heartbeat, MsgType::Alarm, MsgType::FixReport, MsgType::Ack}) {
    if (to_string(t) == name) return t;
  }
  return std::nullopt;
}

std::optional<CommandKind> command_from_string(std::string_view name) noexcept {
  for (auto k : {CommandKind::Wake, CommandKind::Locate, CommandKind::Silence,
                 CommandKind::Ping}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (const auto b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0x0F]);
  }
  return out;
}

std::vector<std::uint8_t> from_hex(std::string_view text) {
  if (text.size() % 2 != 0) throw std::invalid_argument("hex string has odd length");
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw std::invalid_argument(fmt::format("invalid hex digit '{}'", c));
  };
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 2);
  for (std::size_t i = 0; i < text.size(); i += 2) {
    out.push_back(static_cast<std::uint8_t>((nibble(text[i]) << 4) | nibble(text[i + 1])));
  }
  return out;
}

}  // namespace srcwatch
