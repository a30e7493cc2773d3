#pragma once

#include "chewsense/common.hpp"

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

namespace chewsense {

enum class AnnotationKind { Chew, Swallow, Speech, Motion, Baseline };

std::string_view to_string(AnnotationKind k);
AnnotationKind parse_annotation_kind(std::string_view s);

struct Annotation {
  AnnotationKind kind = AnnotationKind::Chew;
  Interval span;
};

/// Two-channel EMG recording (masseter, submental) at a fixed sample rate,
/// with ground-truth annotations sorted by onset.
struct RawRecording {
  double sample_rate = 1024.0;
  std::array<VectorXd, 2> channels;
  std::vector<Annotation> annotations;
  std::string participant_id;

  const VectorXd& channel(Channel c) const { return channels[static_cast<std::size_t>(c)]; }
  VectorXd& channel(Channel c) { return channels[static_cast<std::size_t>(c)]; }

  Eigen::Index size() const { return channels[0].size(); }
  double duration() const { return static_cast<double>(size()) / sample_rate; }

  std::vector<Interval> intervals(AnnotationKind kind) const;

  /// Throws DataError when an invariant does not hold.
  void validate() const;
};

bool operator==(const RawRecording& a, const RawRecording& b);

namespace signal {

struct FilterSpec {
  double low_cut = 20.0;
  double high_cut = 500.0;
  int order = 5;
  double sample_rate = 1024.0;

  void validate() const;
};

/// One second-order section, a0 normalized to 1.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;
};

/// Cascade of second-order sections realizing a digital band-pass.
struct Cascade {
  FilterSpec spec;
  std::vector<Biquad> sections;

  /// Complex frequency response at `freq_hz`.
  std::complex<double> response(double freq_hz) const;
  double magnitude_db(double freq_hz) const { return 20.0 * std::log10(std::abs(response(freq_hz))); }
  std::vector<std::complex<double>> poles() const;
};

/// Butterworth band-pass of analog prototype order `spec.order`, mapped by the
/// pre-warped bilinear transform. The digital filter has order 2*spec.order
/// and spec.order sections; unit gain at the geometric band centre.
Cascade design_bandpass(const FilterSpec& spec);

/// Streaming transposed direct-form II realization of a cascade.
class SosFilter {
 public:
  explicit SosFilter(const Cascade& cascade);

  double step(double x);
  void reset();

 private:
  std::vector<Biquad> sections_;
  std::vector<std::array<double, 2>> state_;
};

/// Single causal pass. Throws DataError naming the first non-finite sample.
VectorXd apply_filter(const Cascade& cascade, const VectorXd& samples);

template <typename Scalar>
void require_finite(const Vector<Scalar>& x) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) {
      throw DataError("non-finite sample at index " + std::to_string(i));
    }
  }
}

/// Full-wave rectification.
template <typename Scalar>
Vector<Scalar> rectify(const Vector<Scalar>& x) {
  require_finite(x);
  return x.cwiseAbs();
}

/// Min-max scaling into [0,1]; a constant input maps to all zeros.
template <typename Scalar>
Vector<Scalar> normalize(const Vector<Scalar>& x) {
  if (x.size() == 0) throw DataError("normalize: empty input");
  require_finite(x);
  const Scalar lo = x.minCoeff();
  const Scalar range = x.maxCoeff() - lo;
  if (range <= Scalar(0)) return Vector<Scalar>::Zero(x.size());
  return ((x.array() - lo) / range).cwiseMin(Scalar(1)).cwiseMax(Scalar(0)).matrix();
}

enum class DownsampleMode { BlockMean, Stride };

/// Reduce the rate by `factor`. Output length is ceil(N / factor); in
/// block-mean mode a trailing partial block averages what it has.
template <typename Scalar>
Vector<Scalar> downsample(const Vector<Scalar>& x, int factor,
                          DownsampleMode mode = DownsampleMode::BlockMean) {
  if (factor <= 0) throw ParameterError("downsample: factor must be >= 1");
  const Eigen::Index n = x.size();
  const Eigen::Index m = (n + factor - 1) / factor;
  Vector<Scalar> out(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const Eigen::Index begin = k * factor;
    if (mode == DownsampleMode::Stride) {
      out[k] = x[begin];
    } else {
      const Eigen::Index len = std::min<Eigen::Index>(factor, n - begin);
      out[k] = x.segment(begin, len).mean();
    }
  }
  return out;
}

struct PreprocessConfig {
  FilterSpec filter;
  int decimation = 10;
  DownsampleMode mode = DownsampleMode::BlockMean;
};

struct ProcessedSignal {
  VectorXd samples;
  double effective_rate = 0.0;
  FilterSpec filter;
  int decimation = 1;
  DownsampleMode mode = DownsampleMode::BlockMean;

  double duration() const { return static_cast<double>(samples.size()) / effective_rate; }
  Eigen::Index index_at(double t) const;
  /// Samples covering [span.onset, span.termination).
  VectorXd slice(const Interval& span) const;
};

/// filter -> rectify -> normalize -> downsample.
ProcessedSignal preprocess(const VectorXd& raw, const PreprocessConfig& config);

/// filter -> rectify -> downsample, without min-max scaling (the streaming
/// path scales by a calibration reference instead).
ProcessedSignal envelope(const VectorXd& raw, const PreprocessConfig& config);

struct ProcessedRecording {
  std::array<ProcessedSignal, 2> channels;
  std::vector<Annotation> annotations;
  std::string participant_id;

  const ProcessedSignal& channel(Channel c) const { return channels[static_cast<std::size_t>(c)]; }
  double duration() const { return channels[0].duration(); }
  std::vector<Interval> intervals(AnnotationKind kind) const;
};

ProcessedRecording preprocess(const RawRecording& rec, const PreprocessConfig& config);

}  // namespace signal
}  // namespace chewsense
