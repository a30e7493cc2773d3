#pragma once

#include "chewsense/signal.hpp"

#include <optional>
#include <span>
#include <vector>

namespace chewsense::events {

/// Mean and standard deviation of a quiet baseline segment.
struct BaselineStats {
  double mu0 = 0.0;
  double delta0 = 0.0;
  Interval source;
};

BaselineStats baseline_stats(const VectorXd& samples, Interval source = {});
BaselineStats baseline_stats(const signal::ProcessedSignal& sig, const Interval& span);

/// thr = mu0 + j * delta0.
double compute_threshold(const BaselineStats& stats, double j = 5.0);

struct BurstInterval {
  double onset = 0.0;
  double termination = 0.0;
  Channel channel = Channel::Masseter;

  Interval span() const { return {onset, termination}; }
  double duration() const { return termination - onset; }
};

struct DetectConfig {
  double min_duration = 0.05;
  double merge_gap = 0.05;
};

/// Maximal runs of samples strictly above `thr`. Runs separated by less than
/// `merge_gap` are merged first; merged runs shorter than `min_duration` are
/// dropped. Sample i covers [i/rate, (i+1)/rate).
std::vector<BurstInterval> detect_bursts(const signal::ProcessedSignal& sig, double thr,
                                         Channel channel = Channel::Masseter,
                                         const DetectConfig& config = {});

struct ClickMatch {
  double click = 0.0;
  std::optional<std::size_t> burst;  // index into the burst list
};

/// Greedy nearest-first pairing of self-report clicks to bursts. Distance is
/// zero when the burst contains the click, otherwise the gap to its nearer
/// edge; pairs farther than `proximity` are never formed.
std::vector<ClickMatch> align_clicks(std::span<const double> clicks,
                                     std::span<const BurstInterval> bursts,
                                     double proximity = 0.5);

struct MatchStats {
  std::size_t matched = 0;
  std::size_t detected = 0;
  std::size_t truth = 0;

  double precision() const { return detected ? double(matched) / double(detected) : 0.0; }
  double recall() const { return truth ? double(matched) / double(truth) : 0.0; }
};

/// One-to-one greedy matching by descending IoU, keeping pairs with IoU >= min_iou.
MatchStats match_intervals(std::span<const Interval> detected, std::span<const Interval> truth,
                           double min_iou = 0.5);

std::vector<Interval> spans(std::span<const BurstInterval> bursts);

}  // namespace chewsense::events
