#pragma once

// Radio message layouts exchanged between a detector and the platform.
// Both layouts are big-endian and fixed length; the trailing CRC is
// CRC-16/CCITT-FALSE over every preceding byte.
//
// Uplink (21 bytes):
//   [0]      version        (0x01)
//   [1..4]   device_id
//   [5..6]   seq
//   [7]      msg_type       0x01 Heartbeat, 0x02 Alarm, 0x03 FixReport, 0x04 Ack
//   [8]      flags          see frame_flags
//   [9..12]  lat_e7         signed, degrees * 1e7
//   [13..16] lon_e7         signed, degrees * 1e7
//   [17..18] battery_dAh    remaining mAh / 100
//   [19..20] crc16
//
// Downlink (12 bytes):
//   [0] version, [1..4] device_id, [5] cmd, [6..9] nonce, [10..11] crc16

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace srcwatch {

inline constexpr std::uint8_t kProtocolVersion = 0x01;
inline constexpr std::size_t kUplinkFrameSize = 21;
inline constexpr std::size_t kDownlinkFrameSize = 12;

enum class MsgType : std::uint8_t {
  Heartbeat = 0x01,
  Alarm = 0x02,
  FixReport = 0x03,
  Ack = 0x04,
};

namespace frame_flags {
inline constexpr std::uint8_t kFirstSwitchLow = 1u << 0;
inline constexpr std::uint8_t kSecondSwitchLow = 1u << 1;
inline constexpr std::uint8_t kLockEngaged = 1u << 2;
inline constexpr std::uint8_t kGammaTriggered = 1u << 3;
// lat/lon carry a usable fix; without it both are zero and meaningless.
inline constexpr std::uint8_t kFixValid = 1u << 4;
}  // namespace frame_flags

struct UplinkFrame {
  std::uint8_t version = kProtocolVersion;
  std::uint32_t device_id = 0;
  std::uint16_t seq = 0;
  MsgType msg_type = MsgType::Heartbeat;
  std::uint8_t flags = 0;
  std::int32_t lat_e7 = 0;
  std::int32_t lon_e7 = 0;
  std::uint16_t battery_dAh = 0;

  bool operator==(const UplinkFrame&) const = default;
};

// Unknown command bytes survive decoding; the device decides what to ignore.
enum class CommandKind : std::uint8_t {
  Wake = 0x10,
  Locate = 0x11,
  Silence = 0x12,
  Ping = 0x13,
};

struct DownlinkCommand {
  std::uint8_t version = kProtocolVersion;
  std::uint32_t device_id = 0;
  CommandKind cmd = CommandKind::Ping;
  std::uint32_t nonce = 0;

  bool operator==(const DownlinkCommand&) const = default;
};

enum class FrameErrorKind { BadLength, BadCrc, UnknownVersion, UnknownMsgType };

class FrameError : public std::runtime_error {
 public:
  FrameError(FrameErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  FrameErrorKind kind() const noexcept { return kind_; }

 private:
  FrameErrorKind kind_;
};

using UplinkBytes = std::array<std::uint8_t, kUplinkFrameSize>;
using DownlinkBytes = std::array<std::uint8_t, kDownlinkFrameSize>;

UplinkBytes encode_frame(const UplinkFrame& frame);
UplinkFrame decode_frame(std::span<const std::uint8_t> bytes);

DownlinkBytes encode_command(const DownlinkCommand& command);
DownlinkCommand decode_command(std::span<const std::uint8_t> bytes);

bool is_known_msg_type(std::uint8_t raw) noexcept;
bool is_known_command(CommandKind kind) noexcept;

std::string_view to_string(MsgType type) noexcept;
std::string_view to_string(CommandKind kind) noexcept;
std::string_view to_string(FrameErrorKind kind) noexcept;
std::optional<MsgType> msg_type_from_string(std::string_view name) noexcept;
std::optional<CommandKind> command_from_string(std::string_view name) noexcept;

/// Lower-case hex, two digits per byte.
std::string to_hex(std::span<const std::uint8_t> bytes);
/// Accepts upper or lower case; throws std::invalid_argument on odd length
/// or a non-hex digit.
std::vector<std::uint8_t> from_hex(std::string_view text);

}  // namespace srcwatch
