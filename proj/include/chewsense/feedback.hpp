#pragma once

#include "chewsense/common.hpp"

#include <optional>
#include <string_view>
#include <vector>

namespace chewsense::feedback {

enum class FeedbackLevel { NoPulse, SinglePulse, DoublePulse, IntenseDouble };

std::string_view to_string(FeedbackLevel l);
FeedbackLevel parse_level(std::string_view s);

enum class Intensity { Normal, High };

struct PulsePattern {
  int pulses_per_burst = 0;
  double period = 2.0;
  Intensity intensity = Intensity::Normal;
};

PulsePattern pattern(FeedbackLevel level, double period = 2.0);

/// Per-participant reference rate (mean control-phase chew rate).
struct RateNormalizer {
  double r_ref = 1.5;
};

/// clamp(rate / (2 * r_ref), 0, 1). Throws ParameterError if r_ref <= 0.
double normalize_rate(double rate, const RateNormalizer& normalizer);

struct LevelDecision {
  FeedbackLevel level = FeedbackLevel::NoPulse;
  bool clamped = false;  // input was outside [0,1]
};

/// Bands [0,0.3) [0.3,0.6) [0.6,0.8) [0.8,1].
LevelDecision map_level(double norm);

struct Pulse {
  double offset = 0.0;
  int count = 0;
  Intensity intensity = Intensity::Normal;
};

/// One entry per period start within [0, window).
std::vector<Pulse> pulse_schedule(FeedbackLevel level, double window, double period = 2.0);

/// Level tracking with an optional dead band around the band edges: the
/// current level is kept until the normalized rate moves more than
/// `dead_band` past one of its edges.
class LevelTracker {
 public:
  explicit LevelTracker(double dead_band = 0.0) : dead_band_(dead_band) {}

  /// Returns the new level when it changed (or on the first update).
  std::optional<FeedbackLevel> update(double norm);
  std::optional<FeedbackLevel> current() const { return current_; }

 private:
  double dead_band_;
  std::optional<FeedbackLevel> current_;
};

}  // namespace chewsense::feedback
