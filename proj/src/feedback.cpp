#include "chewsense/feedback.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace chewsense::feedback {

namespace {
constexpr std::array<double, 5> kEdges = {0.0, 0.3, 0.6, 0.8, 1.0};
}

std::string_view to_string(FeedbackLevel l) {
  switch (l) {
    case FeedbackLevel::NoPulse: return "NoPulse";
    case FeedbackLevel::SinglePulse: return "SinglePulse";
    case FeedbackLevel::DoublePulse: return "DoublePulse";
    case FeedbackLevel::IntenseDouble: return "IntenseDouble";
  }
  return "NoPulse";
}

FeedbackLevel parse_level(std::string_view s) {
  for (auto l : {FeedbackLevel::NoPulse, FeedbackLevel::SinglePulse, FeedbackLevel::DoublePulse,
                 FeedbackLevel::IntenseDouble}) {
    if (to_string(l) == s) return l;
  }
  throw FormatError("unknown feedback level '" + std::string(s) + "'");
}

PulsePattern pattern(FeedbackLevel level, double period) {
  switch (level) {
    case FeedbackLevel::NoPulse: return {0, period, Intensity::Normal};
    case FeedbackLevel::SinglePulse: return {1, period, Intensity::Normal};
    case FeedbackLevel::DoublePulse: return {2, period, Intensity::Normal};
    case FeedbackLevel::IntenseDouble: return {2, period, Intensity::High};
  }
  return {};
}

double normalize_rate(double rate, const RateNormalizer& normalizer) {
  if (!(normalizer.r_ref > 0.0)) throw ParameterError("feedback: r_ref must be > 0");
  if (!(rate >= 0.0)) throw ParameterError("feedback: rate must be >= 0");
  return std::clamp(rate / (2.0 * normalizer.r_ref), 0.0, 1.0);
}

LevelDecision map_level(double norm) {
  LevelDecision d;
  if (!(norm >= 0.0 && norm <= 1.0)) {
    d.clamped = true;
    norm = std::isnan(norm) ? 0.0 : std::clamp(norm, 0.0, 1.0);
  }
  if (norm < kEdges[1]) d.level = FeedbackLevel::NoPulse;
  else if (norm < kEdges[2]) d.level = FeedbackLevel::SinglePulse;
  else if (norm < kEdges[3]) d.level = FeedbackLevel::DoublePulse;
  else d.level = FeedbackLevel::IntenseDouble;
  return d;
}

std::vector<Pulse> pulse_schedule(FeedbackLevel level, double window, double period) {
  if (!(window > 0.0)) throw ParameterError("pulse_schedule: window must be > 0");
  if (!(period > 0.0)) throw ParameterError("pulse_schedule: period must be > 0");
  const PulsePattern p = pattern(level, period);
  std::vector<Pulse> out;
  if (p.pulses_per_burst == 0) return out;
  for (int k = 0; static_cast<double>(k) * period < window - 1e-12; ++k) {
    out.push_back({static_cast<double>(k) * period, p.pulses_per_burst, p.intensity});
  }
  return out;
}

std::optional<FeedbackLevel> LevelTracker::update(double norm) {
  const FeedbackLevel raw = map_level(norm).level;
  if (!current_) {
    current_ = raw;
    return current_;
  }
  if (raw == *current_) return std::nullopt;
  if (dead_band_ > 0.0) {
    const auto idx = static_cast<std::size_t>(*current_);
    const double lo = kEdges[idx] - dead_band_;
    const double hi = kEdges[idx + 1] + dead_band_;
    if (norm >= lo && norm < hi) return std::nullopt;
  }
  current_ = raw;
  return current_;
}

}  // namespace chewsense::feedback
