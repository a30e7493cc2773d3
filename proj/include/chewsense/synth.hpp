#pragma once

#include "chewsense/signal.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace chewsense::synth {

struct ArtifactSpec {
  AnnotationKind kind = AnnotationKind::Speech;  // Speech or Motion
  Interval span;
};

/// Parameters of one synthetic eating session. The recording starts with
/// `baseline_lead` seconds of quiet (annotated `baseline`), followed by
/// `duration` seconds of eating.
struct SessionPlan {
  double duration = 60.0;
  double chew_rate = 1.5;
  double chew_duration_mean = 0.42;
  std::optional<int> swallow_every_n_chews;
  double snr_db = 20.0;
  std::vector<ArtifactSpec> artifact_schedule;
  std::uint64_t seed = 1;

  double baseline_lead = 5.0;
  double sample_rate = 1024.0;
  double noise_sigma = 0.01;     // white-noise sd before band limiting
  double gain = 1.0;             // overall electrode gain
  double bleed = 0.15;           // masseter -> submental cross-talk
  double mouthful_pause = 1.0;   // extra quiet after each swallow
  std::string participant_id = "P00";

  void validate() const;
};

/// Zero-mean Gaussian noise band-limited by the 20-500 Hz pipeline filter.
VectorXd gen_baseline_noise(double duration, double sample_rate, double sigma,
                            std::uint64_t seed);

/// Raised-cosine envelope of `n` samples: 0 at both ends, 1 mid-way.
VectorXd burst_envelope(Eigen::Index n);

/// Band-limited (60-300 Hz) noise carrier under a raised-cosine envelope,
/// scaled so that the peak absolute value equals `amplitude`.
VectorXd gen_chew_burst(double duration, double amplitude, double sample_rate,
                        std::uint64_t seed);

/// sd of the band-limited baseline for unit white-noise sigma.
double baseline_noise_gain(double sample_rate);

RawRecording gen_session(const SessionPlan& plan);

}  // namespace chewsense::synth
