#include "chewsense/events.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace chewsense::events {

BaselineStats baseline_stats(const VectorXd& samples, Interval source) {
  if (samples.size() == 0) throw DataError("baseline: empty segment");
  BaselineStats s;
  s.mu0 = samples.mean();
  s.delta0 = std::sqrt((samples.array() - s.mu0).square().mean());
  s.source = source;
  return s;
}

BaselineStats baseline_stats(const signal::ProcessedSignal& sig, const Interval& span) {
  return baseline_stats(sig.slice(span), span);
}

double compute_threshold(const BaselineStats& stats, double j) {
  if (!(j > 0.0)) throw ParameterError("threshold: j must be > 0");
  return stats.mu0 + j * stats.delta0;
}

std::vector<BurstInterval> detect_bursts(const signal::ProcessedSignal& sig, double thr,
                                         Channel channel, const DetectConfig& config) {
  if (thr < 0.0) throw ParameterError("detect_bursts: thr must be >= 0");
  const double rate = sig.effective_rate;
  std::vector<BurstInterval> runs;
  const auto& x = sig.samples;
  Eigen::Index i = 0;
  while (i < x.size()) {
    if (x[i] > thr) {
      Eigen::Index j = i;
      while (j < x.size() && x[j] > thr) ++j;
      runs.push_back({static_cast<double>(i) / rate, static_cast<double>(j) / rate, channel});
      i = j;
    } else {
      ++i;
    }
  }

  std::vector<BurstInterval> merged;
  for (const auto& r : runs) {
    if (!merged.empty() && r.onset - merged.back().termination < config.merge_gap) {
      merged.back().termination = r.termination;
    } else {
      merged.push_back(r);
    }
  }
  std::erase_if(merged, [&](const BurstInterval& b) {
    return b.duration() < config.min_duration - 1e-12;
  });
  return merged;
}

std::vector<ClickMatch> align_clicks(std::span<const double> clicks,
                                     std::span<const BurstInterval> bursts, double proximity) {
  struct Candidate {
    double distance;
    std::size_t click;
    std::size_t burst;
  };
  std::vector<Candidate> cands;
  for (std::size_t c = 0; c < clicks.size(); ++c) {
    for (std::size_t b = 0; b < bursts.size(); ++b) {
      const double t = clicks[c];
      double d = 0.0;
      if (t < bursts[b].onset) d = bursts[b].onset - t;
      else if (t > bursts[b].termination) d = t - bursts[b].termination;
      if (d <= proximity) cands.push_back({d, c, b});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(a.distance, a.click, a.burst) < std::tie(b.distance, b.click, b.burst);
  });

  std::vector<ClickMatch> out(clicks.size());
  for (std::size_t c = 0; c < clicks.size(); ++c) out[c].click = clicks[c];
  std::vector<bool> used(bursts.size(), false);
  for (const auto& cand : cands) {
    if (out[cand.click].burst || used[cand.burst]) continue;
    out[cand.click].burst = cand.burst;
    used[cand.burst] = true;
  }
  return out;
}

MatchStats match_intervals(std::span<const Interval> detected, std::span<const Interval> truth,
                           double min_iou) {
  struct Pair {
    double iou;
    std::size_t d, t;
  };
  std::vector<Pair> pairs;
  // Both lists are sorted by onset; only nearby intervals can overlap.
  std::size_t start = 0;
  for (std::size_t d = 0; d < detected.size(); ++d) {
    while (start < truth.size() && truth[start].termination <= detected[d].onset) ++start;
    for (std::size_t t = start; t < truth.size() && truth[t].onset < detected[d].termination; ++t) {
      const double v = detected[d].iou(truth[t]);
      if (v >= min_iou) pairs.push_back({v, d, t});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    return std::tie(b.iou, a.d, a.t) < std::tie(a.iou, b.d, b.t);
  });
  std::vector<bool> dused(detected.size()), tused(truth.size());
  MatchStats s;
  s.detected = detected.size();
  s.truth = truth.size();
  for (const auto& p : pairs) {
    if (dused[p.d] || tused[p.t]) continue;
    dused[p.d] = tused[p.t] = true;
    ++s.matched;
  }
  return s;
}

std::vector<Interval> spans(std::span<const BurstInterval> bursts) {
  std::vector<Interval> out;
  out.reserve(bursts.size());
  for (const auto& b : bursts) out.push_back(b.span());
  return out;
}

}  // namespace chewsense::events
