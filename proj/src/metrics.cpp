#include "chewsense/metrics.hpp"

#include <algorithm>
#include <string>

namespace chewsense::metrics {

CorrectedTimeline correct_and_segment(std::span<const ChewEvent> events, double gap_threshold) {
  if (!(gap_threshold >= 0.0)) throw ParameterError("gap threshold must be >= 0");
  CorrectedTimeline tl;
  tl.gap_threshold = gap_threshold;
  tl.events.assign(events.begin(), events.end());
  if (events.empty()) return tl;

  for (std::size_t i = 0; i < events.size(); ++i) {
    if (!(events[i].termination >= events[i].onset)) {
      throw DataError("event " + std::to_string(i) + " terminates before its onset");
    }
    if (i > 0 && events[i].onset < events[i - 1].termination) {
      throw DataError("events " + std::to_string(i - 1) + " and " + std::to_string(i) +
                      " overlap or are out of order");
    }
  }

  tl.corr_on.push_back(events[0].onset);
  tl.corr_off.push_back(events[0].termination);
  tl.sequences.push_back({events[0].onset, events[0].termination, 0, 1});
  // Corrected time is original time minus the pause time removed so far.
  double removed = 0.0;
  for (std::size_t i = 1; i < events.size(); ++i) {
    const double gap = events[i].onset - events[i - 1].termination;
    if (gap > gap_threshold) removed += gap - gap_threshold;
    tl.corr_on.push_back(events[i].onset - removed);
    tl.corr_off.push_back(events[i].termination - removed);
    if (gap > gap_threshold) {
      tl.sequences.push_back({events[i].onset, events[i].termination, i, 1});
    } else {
      tl.sequences.back().termination = events[i].termination;
      ++tl.sequences.back().count;
    }
  }
  return tl;
}

SessionMetrics session_metrics(const CorrectedTimeline& tl) {
  SessionMetrics m;
  const std::size_t n = tl.size();
  if (n == 0) throw DataError("session metrics: no events");
  m.event_count = n;
  m.sequence_count = tl.sequences.size();

  const double span = tl.corr_off.back() - tl.corr_on.front();
  if (!(span > 0.0)) throw DataError("session metrics: zero timeline span");
  const double L = static_cast<double>(n);
  m.cr_overall = L / span;
  m.mean_chew_period = span / L;

  double dur = 0.0;
  for (const auto& e : tl.events) dur += e.duration();
  m.chew_dur = dur / L;

  if (n > 1) {
    double gaps = 0.0;
    for (std::size_t i = 1; i < n; ++i) gaps += tl.corr_on[i] - tl.corr_off[i - 1];
    m.chew_gap = gaps / (L - 1.0);
    m.chew_gap_defined = true;
  }

  const double ns = static_cast<double>(tl.sequences.size());
  double sd = 0.0;
  for (const auto& s : tl.sequences) sd += s.termination - s.onset;
  m.seq_dur = sd / ns;
  if (tl.sequences.size() > 1) {
    double sg = 0.0;
    for (std::size_t k = 1; k < tl.sequences.size(); ++k) {
      sg += tl.sequences[k].onset - tl.sequences[k - 1].termination;
    }
    m.seq_gap = sg / (ns - 1.0);
    m.seq_gap_defined = true;
  }
  m.chews_per_sequence = L / ns;
  return m;
}

}  // namespace chewsense::metrics
