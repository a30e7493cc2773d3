#include "chewsense/realtime.hpp"

#include <algorithm>
#include <cmath>

namespace chewsense::realtime {

Eigen::Index RtConfig::segment_samples() const {
  return std::max<Eigen::Index>(2, static_cast<Eigen::Index>(std::llround(segment * effective_rate())));
}

void RtConfig::validate() const {
  preprocess.filter.validate();
  if (preprocess.decimation < 1) throw ParameterError("realtime: decimation must be >= 1");
  if (!(segment > 0.0)) throw ParameterError("realtime: segment must be > 0");
  if (hop_samples < 1) throw ParameterError("realtime: hop_samples must be >= 1");
  if (vote_window < 1) throw ParameterError("realtime: vote window must be >= 1");
  if (!(rate_window > 0.0)) throw ParameterError("realtime: rate window must be > 0");
  if (!(rate_interval > 0.0)) throw ParameterError("realtime: rate interval must be > 0");
}

double percentile(VectorXd values, double q) {
  if (values.size() == 0) throw DataError("percentile: empty input");
  std::sort(values.data(), values.data() + values.size());
  const double pos = std::clamp(q, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<Eigen::Index>(std::floor(pos));
  const auto hi = std::min<Eigen::Index>(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

CalibrationProfile calibrate(std::span<const VectorXd> activity, const VectorXd& quiet,
                             std::string source) {
  Eigen::Index total = 0;
  for (const auto& seg : activity) total += seg.size();
  if (total == 0) throw DataError("calibration: no contractions detected (no activity samples)");
  VectorXd all(total);
  Eigen::Index pos = 0;
  for (const auto& seg : activity) {
    signal::require_finite(seg);
    all.segment(pos, seg.size()) = seg.cwiseAbs();
    pos += seg.size();
  }

  CalibrationProfile p;
  p.source = std::move(source);
  p.reference_amplitude = percentile(all, 95.0);
  double floor = 0.0;
  if (quiet.size() > 0) {
    p.baseline = events::baseline_stats(quiet);
    floor = events::compute_threshold(p.baseline);
  }
  if (!(p.reference_amplitude > 0.0) || !(p.reference_amplitude > floor)) {
    throw DataError("calibration: no contractions detected");
  }
  return p;
}

CalibrationProfile calibrate_from_recording(const RawRecording& rec, const RtConfig& config,
                                            double activity_window) {
  signal::PreprocessConfig pc = config.preprocess;
  pc.filter.sample_rate = rec.sample_rate;
  const auto env = signal::envelope(rec.channel(Channel::Masseter), pc);

  VectorXd quiet;
  const auto baseline = rec.intervals(AnnotationKind::Baseline);
  if (!baseline.empty()) quiet = env.slice(baseline.front());

  std::vector<VectorXd> activity;
  const auto chews = rec.intervals(AnnotationKind::Chew);
  if (!chews.empty()) {
    const double limit = chews.front().onset + activity_window;
    for (const auto& c : chews) {
      if (c.termination > limit) break;
      activity.push_back(env.slice(c));
    }
  }
  return calibrate(activity, quiet,
                   rec.participant_id + ":first " + std::to_string(activity.size()) + " chews");
}

const std::array<std::string_view, kRtFeatureCount>& rt_feature_names() {
  static const std::array<std::string_view, kRtFeatureCount> names = {"mean", "sd",  "max", "rms",
                                                                      "iemg", "mnf", "mnp"};
  return names;
}

RtFeatureVector rt_features(const VectorXd& segment, const std::optional<CalibrationProfile>& profile,
                            double rate) {
  if (!profile) throw ParameterError("rt_features: missing calibration profile");
  const VectorXd scaled = segment / profile->reference_amplitude;
  features::WindowSpec spec;
  spec.length = static_cast<double>(segment.size()) / rate;
  spec.hop = spec.length;
  spec.amplitude_threshold = 0.0;
  const auto f = features::extract_features(scaled, spec, rate);
  using features::Feature;
  RtFeatureVector v;
  v << get(f, Feature::MAV), get(f, Feature::SD), get(f, Feature::PeakAmp), get(f, Feature::RMS),
      get(f, Feature::IEMG), get(f, Feature::MNF), get(f, Feature::MNP);
  return v;
}

VoteFilter::VoteFilter(int window) : window_(window) {
  if (window < 1) throw ParameterError("vote filter: window must be >= 1");
}

bool VoteFilter::push(bool raw) {
  history_.push_back(raw);
  positives_ += raw;
  if (static_cast<int>(history_.size()) > window_) {
    positives_ -= history_.front();
    history_.pop_front();
  }
  return 2 * positives_ > static_cast<int>(history_.size());
}

void VoteFilter::reset() {
  history_.clear();
  positives_ = 0;
}

std::vector<bool> vote_filter(const std::vector<bool>& raw, int window) {
  VoteFilter f(window);
  std::vector<bool> out;
  out.reserve(raw.size());
  for (bool r : raw) out.push_back(f.push(r));
  return out;
}

std::vector<ChewEvent> assemble_events(const std::vector<bool>& smoothed, double hop, double first_start,
                                       double frame_span) {
  if (!(hop > 0.0)) throw ParameterError("assemble_events: hop must be > 0");
  std::vector<ChewEvent> out;
  std::size_t k = 0;
  while (k < smoothed.size()) {
    if (!smoothed[k]) {
      ++k;
      continue;
    }
    std::size_t j = k;
    while (j + 1 < smoothed.size() && smoothed[j + 1]) ++j;
    out.push_back({first_start + static_cast<double>(k) * hop,
                   first_start + static_cast<double>(j) * hop + frame_span});
    k = j + 1;
  }
  return out;
}

double live_rate(std::span<const ChewEvent> log, double now, double n) {
  if (!(n > 0.0)) throw ParameterError("live_rate: n must be > 0");
  std::size_t count = 0;
  for (const auto& e : log) {
    if (e.onset >= now - n && e.termination <= now) ++count;
  }
  return static_cast<double>(count) / n;
}

ChewDetector::ChewDetector(std::shared_ptr<const learn::LinearModel> model, CalibrationProfile profile,
                           RtConfig config)
    : model_(std::move(model)),
      profile_(std::move(profile)),
      config_(std::move(config)),
      filter_(signal::design_bandpass(config_.preprocess.filter)),
      seg_len_(config_.segment_samples()),
      votes_(config_.vote_window) {
  config_.validate();
  if (!model_) throw ParameterError("detector: no model");
  if (model_->weights.size() != kRtFeatureCount) {
    throw DataError("detector: model has " + std::to_string(model_->weights.size()) +
                    " features, streaming path needs " + std::to_string(kRtFeatureCount));
  }
  if (!(profile_->reference_amplitude > 0.0)) {
    throw ParameterError("detector: reference amplitude must be > 0");
  }
}

double ChewDetector::now() const {
  return static_cast<double>(raw_count_) / config_.preprocess.filter.sample_rate;
}

StepOutput ChewDetector::push(std::span<const double> raw) {
  StepOutput out;
  const double fs = config_.preprocess.filter.sample_rate;
  for (double x : raw) {
    if (!std::isfinite(x)) {
      throw DataError("detector: non-finite sample at index " + std::to_string(raw_count_));
    }
    block_sum_ += std::abs(filter_.step(x));
    ++block_fill_;
    ++raw_count_;
    if (block_fill_ == config_.preprocess.decimation) {
      on_envelope_sample(block_sum_ / block_fill_, out);
      block_sum_ = 0.0;
      block_fill_ = 0;
    }
    while (raw_count_ >= std::llround(static_cast<double>(next_rate_tick_) * config_.rate_interval * fs)) {
      const double t = static_cast<double>(next_rate_tick_) * config_.rate_interval;
      out.rates.push_back({t, live_rate(log_, t, config_.rate_window)});
      ++next_rate_tick_;
    }
  }
  return out;
}

void ChewDetector::on_envelope_sample(double v, StepOutput& out) {
  buffer_.push_back(v);
  if (static_cast<Eigen::Index>(buffer_.size()) > seg_len_) buffer_.pop_front();
  ++env_count_;
  ++since_last_frame_;
  if (static_cast<Eigen::Index>(buffer_.size()) < seg_len_) return;
  if (frames_ > 0 && since_last_frame_ < config_.hop_samples) return;
  since_last_frame_ = 0;
  ++frames_;

  const double rate = config_.effective_rate();
  VectorXd seg(seg_len_);
  std::copy(buffer_.begin(), buffer_.end(), seg.data());
  const bool raw_positive = learn::predict(*model_, rt_features(seg, profile_, rate)).label != Label::NA;
  const bool smoothed = votes_.push(raw_positive);

  const double centre = (static_cast<double>(env_count_) - static_cast<double>(seg_len_) / 2.0) / rate;
  const double half = config_.hop() / 2.0;
  if (smoothed) {
    if (!open_onset_) open_onset_ = centre - half;
    last_positive_end_ = centre + half;
  } else if (open_onset_) {
    const ChewEvent e{*open_onset_, last_positive_end_};
    log_.push_back(e);
    out.events.push_back(e);
    open_onset_.reset();
  }
}

features::FeatureMatrix training_matrix(const RawRecording& rec, const CalibrationProfile& profile,
                                        const RtConfig& config, int stride) {
  if (stride < 1) throw ParameterError("training_matrix: stride must be >= 1");
  signal::PreprocessConfig pc = config.preprocess;
  pc.filter.sample_rate = rec.sample_rate;
  const auto env = signal::envelope(rec.channel(Channel::Masseter), pc);
  const double rate = env.effective_rate;
  RtConfig cfg = config;
  cfg.preprocess = pc;
  const Eigen::Index len = cfg.segment_samples();
  const auto chews = rec.intervals(AnnotationKind::Chew);

  features::FeatureMatrix m;
  for (auto n : rt_feature_names()) m.names.emplace_back(n);
  std::vector<RtFeatureVector> rows;
  const std::optional<CalibrationProfile> prof = profile;
  for (Eigen::Index e = len; e <= env.samples.size(); e += stride) {
    const double centre = (static_cast<double>(e) - static_cast<double>(len) / 2.0) / rate;
    bool inside = false;
    for (const auto& c : chews) {
      if (c.onset > centre) break;
      if (centre < c.termination) {
        inside = true;
        break;
      }
    }
    rows.push_back(rt_features(env.samples.segment(e - len, len), prof, rate));
    m.labels.push_back(inside ? Label::C : Label::NA);
    m.participants.push_back(rec.participant_id);
    m.windows.push_back({static_cast<double>(e - len) / rate, static_cast<double>(e) / rate});
  }
  m.values.resize(static_cast<Eigen::Index>(rows.size()), kRtFeatureCount);
  for (std::size_t i = 0; i < rows.size(); ++i) m.values.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return m;
}

StreamRun run_stream(const RawRecording& rec, std::shared_ptr<const learn::LinearModel> model,
                     const CalibrationProfile& profile, const RtConfig& config, Eigen::Index chunk) {
  RtConfig cfg = config;
  cfg.preprocess.filter.sample_rate = rec.sample_rate;
  ChewDetector det(std::move(model), profile, cfg);
  StreamRun run;
  const auto& x = rec.channel(Channel::Masseter);
  for (Eigen::Index i = 0; i < x.size(); i += chunk) {
    const Eigen::Index len = std::min(chunk, x.size() - i);
    // Feed one sample at a time within the chunk so emission times are exact.
    for (Eigen::Index k = 0; k < len; ++k) {
      auto out = det.push(std::span<const double>(x.data() + i + k, 1));
      for (const auto& e : out.events) {
        run.events.push_back(e);
        run.emitted_at.push_back(det.now());
      }
      run.rates.insert(run.rates.end(), out.rates.begin(), out.rates.end());
    }
  }
  return run;
}

}  // namespace chewsense::realtime
