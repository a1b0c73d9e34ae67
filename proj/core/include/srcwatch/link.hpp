#pragma once

// Simulated NB-IoT radio layer: a link-budget threshold decode model, cell
// admission, and retry/backoff delivery. Frame codecs live in frames.hpp.

#include <cstdint>
#include <stdexcept>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace srcwatch {

inline constexpr double kNbIotExtraMargin_dB = 20.0;
inline constexpr double kDefaultGprsThreshold_dB = 9.0;  // config default, not a measured value

struct LinkBudget {
  double tx_power_dBm = 23.0;
  double path_loss_dB = 120.0;
  double noise_floor_dBm = -114.0;
};

constexpr double snr(const LinkBudget& b) noexcept {
  return b.tx_power_dBm - b.path_loss_dB - b.noise_floor_dBm;
}

enum class RadioTechKind : std::uint8_t { GprsBaseline, NbIot };

std::string_view to_string(RadioTechKind k) noexcept;

struct RadioTech {
  RadioTechKind kind = RadioTechKind::NbIot;
  double decode_threshold_dB = kDefaultGprsThreshold_dB - kNbIotExtraMargin_dB;

  /// NB-IoT decodes 20 dB below the GPRS baseline threshold.
  static constexpr RadioTech make(RadioTechKind kind,
                                  double gprs_threshold_dB = kDefaultGprsThreshold_dB) noexcept {
    return {kind, kind == RadioTechKind::NbIot ? gprs_threshold_dB - kNbIotExtraMargin_dB
                                               : gprs_threshold_dB};
  }
};

/// Deterministic threshold model; the boundary itself decodes.
constexpr bool decode_ok(const RadioTech& tech, double snr_dB) noexcept {
  return snr_dB >= tech.decode_threshold_dB;
}

struct Channel {
  LinkBudget budget;
  RadioTech tech;
};

struct RetryPolicy {
  int max_attempts = 4;
  std::int64_t base_backoff_ms = 2'000;
  double backoff_factor = 2.0;
  std::int64_t attempt_duration_ms = 1'500;  // radio busy per attempt
  double residual_loss = 0.0;                // loss after a decodable attempt
};

struct DeliveryOutcome {
  bool delivered = false;
  int attempts = 0;
  std::int64_t latency_ms = 0;  // send to arrival; for failures, to the end of the last attempt
  std::vector<std::int64_t> attempt_start_ms;  // offsets from the send time

  bool operator==(const DeliveryOutcome&) const = default;
};

class NotAttachedError : public std::logic_error {
 public:
  explicit NotAttachedError(std::uint32_t device_id);
};

enum class AttachResult { Attached, AlreadyAttached, CellFull };

std::string_view to_string(AttachResult r) noexcept;

inline constexpr std::uint32_t kCellCapacityLow = 50'000;
inline constexpr std::uint32_t kCellCapacityHigh = 100'000;

/// Per-cell admission. Any capacity is accepted so tests can scale it; the
/// NB-IoT range is 50,000 to 100,000 links.
class CellState {
 public:
  explicit CellState(std::uint32_t capacity = kCellCapacityLow) : capacity_(capacity) {}

  AttachResult attach(std::uint32_t device_id);
  bool detach(std::uint32_t device_id);
  bool attached(std::uint32_t device_id) const { return devices_.contains(device_id); }
  std::size_t attached_devices() const noexcept { return devices_.size(); }
  std::uint32_t capacity() const noexcept { return capacity_; }

 private:
  std::uint32_t capacity_;
  std::unordered_set<std::uint32_t> devices_;
};

/// Attempt k (1-based) succeeds when the SNR decodes and a Bernoulli draw
/// survives `residual_loss`. Failed attempt k is followed by a backoff of
/// base * factor^(k-1). Throws NotAttachedError if the device has no cell.
DeliveryOutcome transmit(const CellState& cell, std::uint32_t device_id, const Channel& channel,
                         const RetryPolicy& policy, std::uint64_t rng_seed);

}  // namespace srcwatch
