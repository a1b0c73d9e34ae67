#include "srcwatch/link.hpp"

#include "srcwatch/rng.hpp"

#include <fmt/format.h>

#include <cmath>

namespace srcwatch {

std::string_view to_string(RadioTechKind k) noexcept {
  return k == RadioTechKind::NbIot ? "NbIot" : "GprsBaseline";
}

std::string_view to_string(AttachResult r) noexcept {
  switch (r) {
    case AttachResult::Attached: return "Attached";
    case AttachResult::AlreadyAttached: return "AlreadyAttached";
    case AttachResult::CellFull: return "CellFull";
  }
  return "Unknown";
}

NotAttachedError::NotAttachedError(std::uint32_t device_id)
    : std::logic_error(fmt::format("device {} is not attached to a cell", device_id)) {}

AttachResult CellState::attach(std::uint32_t device_id) {
  if (devices_.contains(device_id)) return AttachResult::AlreadyAttached;
  if (devices_.size() >= capacity_) return AttachResult::CellFull;
  devices_.insert(device_id);
  return AttachResult::Attached;
}

bool CellState::detach(std::uint32_t device_id) { return devices_.erase(device_id) > 0; }

DeliveryOutcome transmit(const CellState& cell, std::uint32_t device_id, const Channel& channel,
                         const RetryPolicy& policy, std::uint64_t rng_seed) {
  if (!cell.attached(device_id)) throw NotAttachedError(device_id);

  DeliveryOutcome out;
  DeterministicRng rng(rng_seed);
  const bool decodable = decode_ok(channel.tech, snr(channel.budget));
  std::int64_t t = 0;
  double backoff = static_cast<double>(policy.base_backoff_ms);
  for (int attempt = 1; attempt <= policy.max_attempts; ++attempt) {
    out.attempts = attempt;
    out.attempt_start_ms.push_back(t);
    t += policy.attempt_duration_ms;
    // The draw happens on every attempt so the stream position depends only
    // on the attempt count.
    const bool survived = !rng.bernoulli(policy.residual_loss);
    if (decodable && survived) {
      out.delivered = true;
      out.latency_ms = t;
      return out;
    }
    if (attempt < policy.max_attempts) {
      t += static_cast<std::int64_t>(std::llround(backoff));
      backoff *= policy.backoff_factor;
    }
  }
  out.latency_ms = t;
  return out;
}

}  // namespace srcwatch
