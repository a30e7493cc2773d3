#include "chewsense/features.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <set>

namespace chewsense::features {

const std::array<std::string_view, kFeatureCount>& feature_names() {
  static const std::array<std::string_view, kFeatureCount> names = {
      "MAV", "IEMG", "VAR", "RMS", "SD", "WL", "PeakAmp", "MYOP", "WAMP", "ZC", "SSC",
      "MNF", "MNP", "MDF", "MPF", "T50", "CycleDuration", "CyclesPerSequence"};
  return names;
}

void WindowSpec::validate() const {
  if (!(length > 0.0)) throw ParameterError("window: length must be > 0");
  if (!(hop > 0.0) || hop > length) throw ParameterError("window: hop must be in (0, length]");
  if (amplitude_threshold && *amplitude_threshold < 0.0) {
    throw ParameterError("window: amplitude threshold must be >= 0");
  }
}

VectorXd hamming_window(Eigen::Index n) {
  if (n < 1) throw ParameterError("hamming_window: n must be >= 1");
  if (n == 1) return VectorXd::Ones(1);
  VectorXd w(n);
  const double denom = static_cast<double>(n - 1);
  for (Eigen::Index k = 0; k < n; ++k) {
    w[k] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / denom);
  }
  // Enforce exact symmetry against rounding in cos.
  for (Eigen::Index k = 0; k < n / 2; ++k) w[n - 1 - k] = w[k];
  return w;
}

Spectrum periodogram(const VectorXd& segment, double rate, bool taper) {
  const Eigen::Index n = segment.size();
  const Eigen::Index m = n / 2;
  Spectrum s;
  s.freq.resize(m);
  s.power.resize(m);
  if (m == 0) return s;

  VectorXd x = segment.array() - segment.mean();
  if (taper) x = x.cwiseProduct(hamming_window(n));

  Eigen::FFT<double> fft;
  std::vector<double> in(x.data(), x.data() + n);
  std::vector<std::complex<double>> out;
  fft.fwd(out, in);
  for (Eigen::Index j = 1; j <= m; ++j) {
    s.freq[j - 1] = static_cast<double>(j) * rate / static_cast<double>(n);
    s.power[j - 1] = std::norm(out[static_cast<std::size_t>(j)]) / static_cast<double>(n);
  }
  return s;
}

CycleInfo cycle_info(std::span<const events::BurstInterval> bursts, const Interval& window,
                     double sequence_gap) {
  CycleInfo info;
  std::size_t best = bursts.size();
  double best_overlap = 0.0;
  for (std::size_t i = 0; i < bursts.size(); ++i) {
    const double ov = window.overlap(bursts[i].span());
    if (ov > best_overlap) {
      best_overlap = ov;
      best = i;
    }
  }
  if (best == bursts.size()) return info;
  std::size_t first = best, last = best;
  while (first > 0 && bursts[first].onset - bursts[first - 1].termination <= sequence_gap) --first;
  while (last + 1 < bursts.size() && bursts[last + 1].onset - bursts[last].termination <= sequence_gap) {
    ++last;
  }
  info.cycle_duration = bursts[best].duration();
  info.cycles_per_sequence = static_cast<double>(last - first + 1);
  return info;
}

FeatureVector extract_features(const VectorXd& x, const WindowSpec& spec, double rate,
                               const CycleInfo& cycle) {
  const Eigen::Index n = x.size();
  if (n == 0) throw DataError("extract_features: empty segment");
  if (!(rate / 2.0 >= 1.0)) throw ParameterError("extract_features: effective Nyquist below 1 Hz");
  signal::require_finite(x);
  const double thr = spec.amplitude_threshold.value_or(0.0);
  const double nd = static_cast<double>(n);
  const double pairs = n > 1 ? nd - 1.0 : 1.0;

  FeatureVector f = FeatureVector::Zero();
  auto set = [&f](Feature k, double v) { f[static_cast<int>(k)] = v; };

  const auto ax = x.cwiseAbs();
  const double mean = x.mean();
  const double var = n > 1 ? (x.array() - mean).square().sum() / (nd - 1.0) : 0.0;
  set(Feature::MAV, ax.mean());
  set(Feature::IEMG, ax.sum());
  set(Feature::VAR, var);
  set(Feature::RMS, std::sqrt(x.squaredNorm() / nd));
  set(Feature::SD, std::sqrt(var));
  set(Feature::PeakAmp, ax.maxCoeff());
  set(Feature::MYOP, static_cast<double>((ax.array() >= thr).count()) / nd);

  double wl = 0.0, wamp = 0.0, zc = 0.0, ssc = 0.0;
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const double d = std::abs(x[i] - x[i + 1]);
    wl += d;
    if (d >= thr) {
      wamp += 1.0;
      if (x[i] * x[i + 1] <= 0.0) zc += 1.0;
    }
  }
  for (Eigen::Index i = 1; i + 1 < n; ++i) {
    if ((x[i] - x[i - 1]) * (x[i] - x[i + 1]) >= thr * thr) ssc += 1.0;
  }
  set(Feature::WL, wl);
  set(Feature::WAMP, n > 1 ? wamp / pairs : 0.0);
  set(Feature::ZC, n > 1 ? zc / pairs : 0.0);
  set(Feature::SSC, n > 1 ? ssc / pairs : 0.0);

  const Spectrum sp = periodogram(x, rate, spec.taper);
  if (sp.power.size() > 0) {
    const double total = sp.power.sum();
    set(Feature::MNP, sp.power.mean());
    if (total > 0.0) {
      set(Feature::MNF, sp.freq.dot(sp.power) / total);
      double cum = 0.0;
      Eigen::Index k = 0;
      for (; k < sp.power.size(); ++k) {
        cum += sp.power[k];
        if (cum >= 0.5 * total) break;
      }
      k = std::min<Eigen::Index>(k, sp.power.size() - 1);
      set(Feature::MDF, sp.freq[k]);
      set(Feature::MPF, sp.power[k]);
    }
  }

  const double total_abs = ax.sum();
  double t50 = 0.5;
  if (total_abs > 0.0 && n > 1) {
    double cum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      cum += ax[i];
      if (cum >= 0.5 * total_abs) {
        t50 = static_cast<double>(i) / (nd - 1.0);
        break;
      }
    }
  }
  set(Feature::T50, t50);
  set(Feature::CycleDuration, cycle.cycle_duration);
  set(Feature::CyclesPerSequence, cycle.cycles_per_sequence);
  return f;
}

std::map<Label, std::size_t> FeatureMatrix::label_counts() const {
  std::map<Label, std::size_t> counts;
  for (Label l : labels) ++counts[l];
  return counts;
}

std::vector<std::string> FeatureMatrix::participant_ids() const {
  std::vector<std::string> ids;
  for (const auto& p : participants) {
    if (std::find(ids.begin(), ids.end(), p) == ids.end()) ids.push_back(p);
  }
  return ids;
}

FeatureMatrix FeatureMatrix::select(std::span<const std::size_t> rows) const {
  FeatureMatrix out;
  out.names = names;
  out.values.resize(static_cast<Eigen::Index>(rows.size()), values.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.values.row(static_cast<Eigen::Index>(i)) = values.row(static_cast<Eigen::Index>(rows[i]));
    out.labels.push_back(labels[rows[i]]);
    out.participants.push_back(participants[rows[i]]);
    out.windows.push_back(windows[rows[i]]);
  }
  return out;
}

void FeatureMatrix::append(const FeatureMatrix& other) {
  if (values.rows() == 0 && names.empty()) {
    *this = other;
    return;
  }
  if (other.names != names) throw DataError("feature matrix: column mismatch on append");
  MatrixXd merged(values.rows() + other.values.rows(), values.cols());
  merged << values, other.values;
  values = std::move(merged);
  labels.insert(labels.end(), other.labels.begin(), other.labels.end());
  participants.insert(participants.end(), other.participants.begin(), other.participants.end());
  windows.insert(windows.end(), other.windows.begin(), other.windows.end());
}

std::size_t window_count(double duration, const WindowSpec& spec) {
  if (duration < spec.length - 1e-9) return 0;
  return static_cast<std::size_t>(std::floor((duration - spec.length) / spec.hop + 1e-9)) + 1;
}

namespace {

std::vector<Interval> merged(std::vector<Interval> iv) {
  std::sort(iv.begin(), iv.end(), [](const Interval& a, const Interval& b) { return a.onset < b.onset; });
  std::vector<Interval> out;
  for (const auto& i : iv) {
    if (!out.empty() && i.onset <= out.back().termination) {
      out.back().termination = std::max(out.back().termination, i.termination);
    } else {
      out.push_back(i);
    }
  }
  return out;
}

/// Largest overlap of `w` with any single annotation.
double best_overlap(const std::vector<Interval>& sorted, const Interval& w) {
  double best = 0.0;
  for (const auto& i : sorted) {
    if (i.onset >= w.termination) break;
    best = std::max(best, w.overlap(i));
  }
  return best;
}

struct ChannelContext {
  double threshold = 0.0;
  std::vector<events::BurstInterval> bursts;
};

ChannelContext channel_context(const signal::ProcessedRecording& rec, Channel ch,
                               const WindowSpec& spec, const MatrixOptions& opt) {
  const auto& sig = rec.channel(ch);
  ChannelContext ctx;
  events::BaselineStats stats;
  const auto baseline = rec.intervals(AnnotationKind::Baseline);
  if (!baseline.empty()) {
    stats = events::baseline_stats(sig, baseline.front());
  } else {
    stats = events::baseline_stats(sig.samples, {0.0, sig.duration()});
  }
  const double burst_thr = events::compute_threshold(stats, opt.threshold_j);
  ctx.threshold = spec.amplitude_threshold.value_or(burst_thr);
  ctx.bursts = events::detect_bursts(sig, burst_thr, ch, opt.detect);
  return ctx;
}

}  // namespace

FeatureMatrix build_feature_matrix(const signal::ProcessedRecording& rec, const WindowSpec& spec,
                                   Task task, const MatrixOptions& options) {
  spec.validate();
  const auto& m = rec.channel(Channel::Masseter);
  const double rate = m.effective_rate;
  const double duration = rec.duration();
  const std::size_t count = window_count(duration, spec);
  if (count == 0) throw DataError("build_feature_matrix: recording shorter than one window");

  const std::array<ChannelContext, 2> ctx = {
      channel_context(rec, Channel::Masseter, spec, options),
      channel_context(rec, Channel::Submental, spec, options)};
  const auto positives = merged(rec.intervals(positive_kind(task)));
  const auto len = static_cast<Eigen::Index>(std::llround(spec.length * rate));

  FeatureMatrix out;
  for (Channel ch : {Channel::Masseter, Channel::Submental}) {
    for (auto name : feature_names()) {
      out.names.push_back(std::string(to_string(ch)) + "." + std::string(name));
    }
  }
  out.values.resize(static_cast<Eigen::Index>(count), 2 * kFeatureCount);

  std::size_t rows = 0;
  for (std::size_t k = 0; k < count; ++k) {
    const Interval w{static_cast<double>(k) * spec.hop, static_cast<double>(k) * spec.hop + spec.length};
    const auto start = static_cast<Eigen::Index>(std::llround(w.onset * rate));
    if (start + len > m.samples.size()) break;
    for (std::size_t c = 0; c < 2; ++c) {
      WindowSpec ws = spec;
      ws.amplitude_threshold = ctx[c].threshold;
      const VectorXd seg = rec.channels[c].samples.segment(start, len);
      const CycleInfo ci = cycle_info(ctx[c].bursts, w, options.sequence_gap);
      out.values.block<1, kFeatureCount>(static_cast<Eigen::Index>(rows),
                                         static_cast<Eigen::Index>(c) * kFeatureCount) =
          extract_features(seg, ws, rate, ci).transpose();
    }
    out.labels.push_back(best_overlap(positives, w) >= 0.5 * spec.length - 1e-9 ? positive_label(task)
                                                                               : Label::NA);
    out.participants.push_back(rec.participant_id);
    out.windows.push_back(w);
    ++rows;
  }
  out.values.conservativeResize(static_cast<Eigen::Index>(rows), Eigen::NoChange);
  return out;
}

}  // namespace chewsense::features
