#pragma once

#include "chewsense/events.hpp"
#include "chewsense/signal.hpp"

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace chewsense::features {

inline constexpr int kFeatureCount = 18;

/// Column order of a per-channel FeatureVector.
enum class Feature {
  MAV, IEMG, VAR, RMS, SD, WL, PeakAmp, MYOP, WAMP, ZC, SSC,
  MNF, MNP, MDF, MPF, T50, CycleDuration, CyclesPerSequence
};

const std::array<std::string_view, kFeatureCount>& feature_names();

using FeatureVector = Eigen::Matrix<double, kFeatureCount, 1>;

inline double get(const FeatureVector& v, Feature f) { return v[static_cast<int>(f)]; }

struct WindowSpec {
  double length = 0.5;
  double hop = 0.25;
  bool taper = true;
  /// Amplitude threshold for MYOP/WAMP/ZC/SSC. When unset, matrix building
  /// derives it per channel from the baseline (mu0 + j*delta0).
  std::optional<double> amplitude_threshold;

  static WindowSpec chew() { return {0.5, 0.25, true, std::nullopt}; }
  static WindowSpec swallow() { return {1.625, 0.8125, true, std::nullopt}; }

  void validate() const;
};

/// Symmetric Hamming window, w[k] = 0.54 - 0.46 cos(2 pi k / (n-1)); n = 1 gives [1].
VectorXd hamming_window(Eigen::Index n);

/// One-sided periodogram of the mean-removed (optionally Hamming-tapered)
/// segment over bins 1..floor(N/2): P_j = |X_j|^2 / N, f_j = j * rate / N.
struct Spectrum {
  VectorXd freq;
  VectorXd power;
};

Spectrum periodogram(const VectorXd& segment, double rate, bool taper = true);

/// Window-level view of the threshold bursts overlapping a window.
struct CycleInfo {
  double cycle_duration = 0.0;
  double cycles_per_sequence = 0.0;
};

/// Picks the burst with the largest overlap with `window`; bursts whose
/// separation is at most `sequence_gap` seconds form one sequence.
CycleInfo cycle_info(std::span<const events::BurstInterval> bursts, const Interval& window,
                     double sequence_gap = 2.0);

/// All 18 features of one channel's segment. Time-domain features use the
/// raw segment, spectral ones the tapered periodogram.
FeatureVector extract_features(const VectorXd& segment, const WindowSpec& spec,
                               double effective_rate, const CycleInfo& cycle = {});

enum class Task { Chew, Swallow };

inline Label positive_label(Task t) { return t == Task::Chew ? Label::C : Label::S; }
inline AnnotationKind positive_kind(Task t) {
  return t == Task::Chew ? AnnotationKind::Chew : AnnotationKind::Swallow;
}

struct FeatureMatrix {
  std::vector<std::string> names;
  MatrixXd values;
  std::vector<Label> labels;
  std::vector<std::string> participants;
  std::vector<Interval> windows;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }

  std::map<Label, std::size_t> label_counts() const;
  std::vector<std::string> participant_ids() const;
  FeatureMatrix select(std::span<const std::size_t> rows) const;
  void append(const FeatureMatrix& other);
};

struct MatrixOptions {
  double threshold_j = 5.0;
  events::DetectConfig detect;
  double sequence_gap = 2.0;
};

/// Slide windows over both processed channels; a row is positive when at
/// least half of its window overlaps annotations of the task's kind.
FeatureMatrix build_feature_matrix(const signal::ProcessedRecording& rec, const WindowSpec& spec,
                                   Task task, const MatrixOptions& options = {});

/// Number of windows that fit in `duration` seconds.
std::size_t window_count(double duration, const WindowSpec& spec);

}  // namespace chewsense::features
