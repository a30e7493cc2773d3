#pragma once

#include "chewsense/events.hpp"
#include "chewsense/features.hpp"
#include "chewsense/learn.hpp"
#include "chewsense/signal.hpp"

#include <array>
#include <deque>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace chewsense::realtime {

/// Streaming pipeline parameters. Classification runs on the last `segment`
/// seconds of the decimated envelope every `hop_samples` decimated samples.
struct RtConfig {
  signal::PreprocessConfig preprocess;
  double segment = 0.5;
  int hop_samples = 1;
  int vote_window = 8;
  double rate_window = 5.0;    // n of the live rate
  double rate_interval = 1.0;  // live-rate reporting period, sample clock

  double effective_rate() const { return preprocess.filter.sample_rate / preprocess.decimation; }
  Eigen::Index segment_samples() const;
  double hop() const { return hop_samples / effective_rate(); }
  void validate() const;
};

struct CalibrationProfile {
  double reference_amplitude = 1.0;
  events::BaselineStats baseline;
  std::string source;
};

/// Linear-interpolated percentile, q in [0, 100].
double percentile(VectorXd values, double q);

/// Reference amplitude = 95th percentile of the envelope over the activity
/// segments; baseline statistics from the quiet segment (may be empty).
/// Throws DataError("no contractions detected") when the activity does not
/// rise above the baseline.
CalibrationProfile calibrate(std::span<const VectorXd> activity, const VectorXd& quiet,
                             std::string source = {});

/// Calibrate from a recording's masseter envelope: quiet = the baseline
/// annotation, activity = chew annotations within `activity_window` seconds
/// of the first chew.
CalibrationProfile calibrate_from_recording(const RawRecording& rec, const RtConfig& config,
                                            double activity_window = 10.0);

inline constexpr int kRtFeatureCount = 7;
using RtFeatureVector = Eigen::Matrix<double, kRtFeatureCount, 1>;

const std::array<std::string_view, kRtFeatureCount>& rt_feature_names();

/// mean, sd, max, RMS, IEMG, MNF, MNP of the segment scaled by
/// 1/reference_amplitude. Throws ParameterError without a profile.
RtFeatureVector rt_features(const VectorXd& segment, const std::optional<CalibrationProfile>& profile,
                            double rate);

/// Majority over the last min(t, window) raw predictions; ties are negative.
class VoteFilter {
 public:
  explicit VoteFilter(int window = 8);
  bool push(bool raw);
  void reset();

 private:
  int window_;
  std::deque<bool> history_;
  int positives_ = 0;
};

std::vector<bool> vote_filter(const std::vector<bool>& raw, int window = 8);

/// Runs of positive frames become events. Frame k spans
/// [first_start + k*hop, first_start + k*hop + frame_span).
std::vector<ChewEvent> assemble_events(const std::vector<bool>& smoothed, double hop,
                                       double first_start = 0.0, double frame_span = 0.5);

/// Events with onset >= now - n and termination <= now, divided by n.
double live_rate(std::span<const ChewEvent> log, double now, double n = 5.0);

struct RateSample {
  double t = 0.0;
  double rate = 0.0;
};

struct StepOutput {
  std::vector<ChewEvent> events;  // closed during this step
  std::vector<RateSample> rates;
};

/// Single-session streaming detector over raw masseter samples. Frames are
/// anchored at the centre of their segment and span one hop.
class ChewDetector {
 public:
  ChewDetector(std::shared_ptr<const learn::LinearModel> model, CalibrationProfile profile,
               RtConfig config = {});

  StepOutput push(std::span<const double> raw);

  const std::vector<ChewEvent>& log() const { return log_; }
  /// Sample clock: end of the newest raw sample, in seconds.
  double now() const;
  std::size_t frames() const { return frames_; }
  const RtConfig& config() const { return config_; }

 private:
  void on_envelope_sample(double v, StepOutput& out);

  std::shared_ptr<const learn::LinearModel> model_;
  std::optional<CalibrationProfile> profile_;
  RtConfig config_;
  signal::SosFilter filter_;
  Eigen::Index seg_len_;

  long long raw_count_ = 0;
  double block_sum_ = 0.0;
  int block_fill_ = 0;
  long long env_count_ = 0;
  std::deque<double> buffer_;
  int since_last_frame_ = 0;
  std::size_t frames_ = 0;

  VoteFilter votes_;
  std::optional<double> open_onset_;
  double last_positive_end_ = 0.0;
  std::vector<ChewEvent> log_;
  long long next_rate_tick_ = 1;
};

/// Offline training set for the streaming model: one row per segment position
/// (every `stride` decimated samples), labelled C when the segment centre
/// lies inside a chew annotation.
features::FeatureMatrix training_matrix(const RawRecording& rec, const CalibrationProfile& profile,
                                        const RtConfig& config, int stride = 2);

/// Run the detector over a whole recording (masseter channel) in fixed chunks.
struct StreamRun {
  std::vector<ChewEvent> events;
  std::vector<double> emitted_at;  // sample-clock time each event was closed
  std::vector<RateSample> rates;
};

StreamRun run_stream(const RawRecording& rec, std::shared_ptr<const learn::LinearModel> model,
                     const CalibrationProfile& profile, const RtConfig& config = {},
                     Eigen::Index chunk = 128);

}  // namespace chewsense::realtime
