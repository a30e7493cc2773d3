#include "chewsense/signal.hpp"

#include <algorithm>
#include <numbers>

namespace chewsense {

std::string_view to_string(AnnotationKind k) {
  switch (k) {
    case AnnotationKind::Chew: return "chew";
    case AnnotationKind::Swallow: return "swallow";
    case AnnotationKind::Speech: return "speech";
    case AnnotationKind::Motion: return "motion";
    case AnnotationKind::Baseline: return "baseline";
  }
  return "chew";
}

AnnotationKind parse_annotation_kind(std::string_view s) {
  for (auto k : {AnnotationKind::Chew, AnnotationKind::Swallow, AnnotationKind::Speech,
                 AnnotationKind::Motion, AnnotationKind::Baseline}) {
    if (to_string(k) == s) return k;
  }
  throw FormatError("unknown annotation kind '" + std::string(s) + "'");
}

namespace {

std::vector<Interval> select(const std::vector<Annotation>& anns, AnnotationKind kind) {
  std::vector<Interval> out;
  for (const auto& a : anns) {
    if (a.kind == kind) out.push_back(a.span);
  }
  return out;
}

}  // namespace

std::vector<Interval> RawRecording::intervals(AnnotationKind kind) const {
  return select(annotations, kind);
}

void RawRecording::validate() const {
  if (!(sample_rate > 0.0)) throw DataError("recording: sample_rate must be > 0");
  if (channels[0].size() != channels[1].size()) {
    throw DataError("recording: channels differ in length");
  }
  const double dur = duration();
  double prev_onset = 0.0;
  for (const auto& a : annotations) {
    if (a.span.onset < 0.0 || a.span.termination < a.span.onset) {
      throw DataError("recording: malformed annotation interval");
    }
    if (a.span.termination > dur + 1e-9) {
      throw DataError("recording: annotation beyond recording duration");
    }
    if (a.span.onset < prev_onset) throw DataError("recording: annotations not sorted by onset");
    prev_onset = a.span.onset;
  }
}

bool operator==(const RawRecording& a, const RawRecording& b) {
  if (a.sample_rate != b.sample_rate || a.participant_id != b.participant_id) return false;
  for (std::size_t c = 0; c < 2; ++c) {
    if (a.channels[c].size() != b.channels[c].size()) return false;
    if (a.channels[c] != b.channels[c]) return false;
  }
  if (a.annotations.size() != b.annotations.size()) return false;
  for (std::size_t i = 0; i < a.annotations.size(); ++i) {
    const auto& x = a.annotations[i];
    const auto& y = b.annotations[i];
    if (x.kind != y.kind || x.span.onset != y.span.onset ||
        x.span.termination != y.span.termination) {
      return false;
    }
  }
  return true;
}

namespace signal {

using cplx = std::complex<double>;

void FilterSpec::validate() const {
  if (!(sample_rate > 0.0)) throw ParameterError("filter: sample_rate must be > 0");
  if (order < 1) throw ParameterError("filter: order must be >= 1");
  const double nyquist = sample_rate / 2.0;
  if (!(low_cut > 0.0)) throw ParameterError("filter: low_cut must be > 0");
  if (high_cut >= nyquist) {
    throw ParameterError("filter: high_cut " + std::to_string(high_cut) +
                         " Hz must be below Nyquist (" + std::to_string(nyquist) + " Hz)");
  }
  if (!(low_cut < high_cut)) throw ParameterError("filter: low_cut must be < high_cut");
}

cplx Cascade::response(double freq_hz) const {
  const double w = 2.0 * std::numbers::pi * freq_hz / spec.sample_rate;
  const cplx zi = std::polar(1.0, -w);
  const cplx zi2 = zi * zi;
  cplx h = 1.0;
  for (const auto& s : sections) {
    h *= (s.b0 + s.b1 * zi + s.b2 * zi2) / (1.0 + s.a1 * zi + s.a2 * zi2);
  }
  return h;
}

std::vector<cplx> Cascade::poles() const {
  std::vector<cplx> out;
  for (const auto& s : sections) {
    const cplx disc = std::sqrt(cplx(s.a1 * s.a1 - 4.0 * s.a2, 0.0));
    out.push_back((-s.a1 + disc) / 2.0);
    out.push_back((-s.a1 - disc) / 2.0);
  }
  return out;
}

Cascade design_bandpass(const FilterSpec& spec) {
  spec.validate();
  const double fs = spec.sample_rate;
  const int n = spec.order;
  const double pi = std::numbers::pi;

  // Pre-warped analog band edges.
  const double w1 = 2.0 * fs * std::tan(pi * spec.low_cut / fs);
  const double w2 = 2.0 * fs * std::tan(pi * spec.high_cut / fs);
  const double bw = w2 - w1;
  const double w0sq = w1 * w2;

  std::vector<cplx> complex_poles;
  std::vector<double> real_poles;
  for (int k = 0; k < n; ++k) {
    const cplx p = std::polar(1.0, pi * (2.0 * k + n + 1.0) / (2.0 * n));
    const cplx half = p * bw / 2.0;
    const cplx root = std::sqrt(half * half - w0sq);
    for (const cplx s : {half + root, half - root}) {
      const cplx z = (2.0 * fs + s) / (2.0 * fs - s);
      if (std::abs(z.imag()) < 1e-12) {
        real_poles.push_back(z.real());
      } else if (z.imag() > 0.0) {
        complex_poles.push_back(z);
      }
    }
  }
  std::sort(real_poles.begin(), real_poles.end());

  Cascade c;
  c.spec = spec;
  // Each section carries one zero at z = 1 and one at z = -1.
  for (const cplx& z : complex_poles) {
    c.sections.push_back({1.0, 0.0, -1.0, -2.0 * z.real(), std::norm(z)});
  }
  for (std::size_t i = 0; i + 1 < real_poles.size(); i += 2) {
    const double z1 = real_poles[i], z2 = real_poles[i + 1];
    c.sections.push_back({1.0, 0.0, -1.0, -(z1 + z2), z1 * z2});
  }

  const double f0 = fs / pi * std::atan(std::sqrt(w0sq) / (2.0 * fs));
  const double gain = std::abs(c.response(f0));
  const double per_section = std::pow(gain, -1.0 / static_cast<double>(c.sections.size()));
  for (auto& s : c.sections) {
    s.b0 *= per_section;
    s.b1 *= per_section;
    s.b2 *= per_section;
  }
  return c;
}

SosFilter::SosFilter(const Cascade& cascade)
    : sections_(cascade.sections), state_(cascade.sections.size(), {0.0, 0.0}) {}

double SosFilter::step(double x) {
  double v = x;
  for (std::size_t i = 0; i < sections_.size(); ++i) {
    const auto& s = sections_[i];
    auto& st = state_[i];
    const double y = s.b0 * v + st[0];
    st[0] = s.b1 * v - s.a1 * y + st[1];
    st[1] = s.b2 * v - s.a2 * y;
    v = y;
  }
  return v;
}

void SosFilter::reset() {
  for (auto& st : state_) st = {0.0, 0.0};
}

VectorXd apply_filter(const Cascade& cascade, const VectorXd& samples) {
  require_finite(samples);
  SosFilter f(cascade);
  VectorXd out(samples.size());
  for (Eigen::Index i = 0; i < samples.size(); ++i) out[i] = f.step(samples[i]);
  return out;
}

Eigen::Index ProcessedSignal::index_at(double t) const {
  const auto i = static_cast<Eigen::Index>(std::llround(t * effective_rate));
  return std::clamp<Eigen::Index>(i, 0, samples.size());
}

VectorXd ProcessedSignal::slice(const Interval& span) const {
  const Eigen::Index b = index_at(span.onset);
  const Eigen::Index e = std::max(b, index_at(span.termination));
  return samples.segment(b, e - b);
}

ProcessedSignal envelope(const VectorXd& raw, const PreprocessConfig& config) {
  const Cascade c = design_bandpass(config.filter);
  ProcessedSignal out;
  out.samples = downsample(rectify(apply_filter(c, raw)), config.decimation, config.mode);
  out.effective_rate = config.filter.sample_rate / config.decimation;
  out.filter = config.filter;
  out.decimation = config.decimation;
  out.mode = config.mode;
  return out;
}

ProcessedSignal preprocess(const VectorXd& raw, const PreprocessConfig& config) {
  const Cascade c = design_bandpass(config.filter);
  ProcessedSignal out;
  out.samples =
      downsample(normalize(rectify(apply_filter(c, raw))), config.decimation, config.mode);
  out.effective_rate = config.filter.sample_rate / config.decimation;
  out.filter = config.filter;
  out.decimation = config.decimation;
  out.mode = config.mode;
  return out;
}

std::vector<Interval> ProcessedRecording::intervals(AnnotationKind kind) const {
  return select(annotations, kind);
}

ProcessedRecording preprocess(const RawRecording& rec, const PreprocessConfig& config) {
  rec.validate();
  PreprocessConfig cfg = config;
  cfg.filter.sample_rate = rec.sample_rate;
  ProcessedRecording out;
  out.channels[0] = preprocess(rec.channels[0], cfg);
  out.channels[1] = preprocess(rec.channels[1], cfg);
  out.annotations = rec.annotations;
  out.participant_id = rec.participant_id;
  return out;
}

}  // namespace signal
}  // namespace chewsense
