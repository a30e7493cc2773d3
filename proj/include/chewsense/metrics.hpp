#pragma once

#include "chewsense/common.hpp"

#include <limits>
#include <span>
#include <vector>

namespace chewsense::metrics {

struct Sequence {
  double onset = 0.0;        // original clock
  double termination = 0.0;  // original clock
  std::size_t first = 0;     // index of first event
  std::size_t count = 0;
};

/// Event timeline with long pauses capped at the gap threshold.
struct CorrectedTimeline {
  std::vector<ChewEvent> events;  // original times
  std::vector<double> corr_on;
  std::vector<double> corr_off;
  std::vector<Sequence> sequences;
  double gap_threshold = 2.0;

  std::size_t size() const { return events.size(); }
};

/// Gaps longer than G are capped to G and start a new sequence. Event
/// durations are preserved; corrected time starts at the first onset.
/// Throws DataError if events are unordered or overlapping.
CorrectedTimeline correct_and_segment(std::span<const ChewEvent> events, double gap_threshold = 2.0);

struct SessionMetrics {
  std::size_t event_count = 0;     // L
  std::size_t sequence_count = 0;
  double cr_overall = 0.0;         // L / (corr_off_last - corr_on_first), chews/s
  double mean_chew_period = 0.0;   // (corr_off_last - corr_on_first) / L, s
  double chew_dur = 0.0;
  double chew_gap = 0.0;           // mean corrected gap over L-1 gaps
  double seq_dur = 0.0;
  double seq_gap = 0.0;            // mean gap between consecutive sequences
  double chews_per_sequence = 0.0;
  bool chew_gap_defined = false;
  bool seq_gap_defined = false;
};

SessionMetrics session_metrics(const CorrectedTimeline& timeline);

}  // namespace chewsense::metrics
