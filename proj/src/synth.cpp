#include "chewsense/synth.hpp"

#include "chewsense/random.hpp"

#include <algorithm>
#include <cmath>

namespace chewsense::synth {

namespace {

constexpr double kJitter = 0.10;
constexpr double kSwallowMargin = 0.3;
constexpr double kArtifactLevel = 0.35;

signal::FilterSpec band(double lo, double hi, double fs, int order = 4) {
  return {lo, std::min(hi, 0.45 * fs), order, fs};
}

// White noise through a band-pass, with a warm-up so the output starts in
// steady state.
VectorXd filtered_noise(Eigen::Index n, const signal::FilterSpec& spec, double sigma, Rng& rng) {
  const auto warmup = static_cast<Eigen::Index>(0.5 * spec.sample_rate);
  signal::SosFilter filt(signal::design_bandpass(spec));
  for (Eigen::Index i = 0; i < warmup; ++i) filt.step(sigma * rng.normal());
  VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = filt.step(sigma * rng.normal());
  return out;
}

VectorXd shaped_burst(Eigen::Index n, const signal::FilterSpec& spec, Rng& rng) {
  if (n <= 0) return VectorXd();
  const VectorXd carrier = filtered_noise(n, spec, 1.0, rng);
  return burst_envelope(n).cwiseProduct(carrier);
}

VectorXd scaled_to_rms(VectorXd x, double rms) {
  const double cur = std::sqrt(x.squaredNorm() / std::max<Eigen::Index>(1, x.size()));
  if (cur > 0.0) x *= rms / cur;
  return x;
}

void add_at(VectorXd& target, Eigen::Index start, const VectorXd& burst, double scale) {
  const Eigen::Index len = std::min(burst.size(), target.size() - start);
  if (start < 0 || len <= 0) return;
  target.segment(start, len) += scale * burst.head(len);
}

Eigen::Index to_index(double t, double fs) { return static_cast<Eigen::Index>(std::llround(t * fs)); }

}  // namespace

void SessionPlan::validate() const {
  if (!(duration > 0.0)) throw ParameterError("plan: duration must be > 0");
  if (!(chew_rate >= 0.0)) throw ParameterError("plan: chew_rate must be >= 0");
  if (!(chew_duration_mean > 0.0)) throw ParameterError("plan: chew_duration_mean must be > 0");
  if (!std::isfinite(snr_db)) throw ParameterError("plan: snr_db must be finite");
  if (!(sample_rate > 0.0)) throw ParameterError("plan: sample_rate must be > 0");
  if (baseline_lead < 0.0) throw ParameterError("plan: baseline_lead must be >= 0");
  if (swallow_every_n_chews && *swallow_every_n_chews < 1) {
    throw ParameterError("plan: swallow_every_n_chews must be >= 1");
  }
  const double total = baseline_lead + duration;
  for (const auto& a : artifact_schedule) {
    if (a.kind != AnnotationKind::Speech && a.kind != AnnotationKind::Motion) {
      throw ParameterError("plan: artifacts must be speech or motion");
    }
    if (a.span.onset < 0.0 || a.span.termination <= a.span.onset || a.span.termination > total) {
      throw ParameterError("plan: artifact outside the session");
    }
  }
  if (chew_rate > 0.0) {
    const double ioi = 1.0 / chew_rate;
    const double min_spacing = ioi * (1.0 - 2.0 * kJitter);
    const double max_burst = chew_duration_mean * (1.0 + kJitter);
    if (min_spacing <= max_burst + 0.02) {
      throw ParameterError("infeasible plan: chew bursts would overlap at this rate");
    }
  }
}

double baseline_noise_gain(double sample_rate) {
  const auto cascade = signal::design_bandpass(band(20.0, 500.0, sample_rate, 5));
  signal::SosFilter f(cascade);
  double energy = 0.0;
  for (int i = 0; i < 1 << 14; ++i) {
    const double h = f.step(i == 0 ? 1.0 : 0.0);
    energy += h * h;
  }
  return std::sqrt(energy);
}

VectorXd gen_baseline_noise(double duration, double sample_rate, double sigma,
                            std::uint64_t seed) {
  const Eigen::Index n = to_index(duration, sample_rate);
  if (sigma == 0.0) return VectorXd::Zero(n);
  Rng rng(seed);
  return filtered_noise(n, band(20.0, 500.0, sample_rate, 5), sigma, rng);
}

VectorXd burst_envelope(Eigen::Index n) {
  VectorXd env(n);
  if (n == 1) {
    env[0] = 1.0;
    return env;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    env[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                   static_cast<double>(n - 1)));
  }
  return env;
}

VectorXd gen_chew_burst(double duration, double amplitude, double sample_rate,
                        std::uint64_t seed) {
  if (!(duration > 0.0)) throw ParameterError("chew burst: duration must be > 0");
  const Eigen::Index n = std::max<Eigen::Index>(1, to_index(duration, sample_rate));
  if (amplitude == 0.0) return VectorXd::Zero(n);
  Rng rng(seed);
  VectorXd burst = shaped_burst(n, band(60.0, 300.0, sample_rate), rng);
  const double peak = burst.cwiseAbs().maxCoeff();
  if (peak > 0.0) burst *= std::abs(amplitude) / peak;
  return burst;
}

RawRecording gen_session(const SessionPlan& plan) {
  plan.validate();
  const double fs = plan.sample_rate;
  const double total = plan.baseline_lead + plan.duration;
  const Eigen::Index n = to_index(total, fs);

  Rng root(plan.seed);
  Rng noise_rng = root.fork(1);
  Rng chew_rng = root.fork(2);
  Rng swallow_rng = root.fork(3);
  Rng artifact_rng = root.fork(4);
  Rng timing_rng = root.fork(5);

  RawRecording rec;
  rec.sample_rate = fs;
  rec.participant_id = plan.participant_id;
  auto& mas = rec.channel(Channel::Masseter);
  auto& sub = rec.channel(Channel::Submental);
  const auto base_spec = band(20.0, 500.0, fs, 5);
  if (plan.noise_sigma > 0.0) {
    mas = filtered_noise(n, base_spec, plan.noise_sigma * plan.gain, noise_rng);
    sub = filtered_noise(n, base_spec, plan.noise_sigma * plan.gain, noise_rng);
  } else {
    mas = VectorXd::Zero(n);
    sub = VectorXd::Zero(n);
  }

  const double noise_rms = plan.noise_sigma * baseline_noise_gain(fs);
  const double burst_rms = noise_rms * std::pow(10.0, plan.snr_db / 20.0);

  std::vector<Annotation> anns;
  if (plan.baseline_lead > 0.0) {
    anns.push_back({AnnotationKind::Baseline, {0.0, to_index(plan.baseline_lead, fs) / fs}});
  }

  if (plan.chew_rate > 0.0) {
    const double ioi = 1.0 / plan.chew_rate;
    const auto chew_spec = band(60.0, 300.0, fs);
    const auto swallow_spec = band(30.0, 150.0, fs);
    double origin = plan.baseline_lead;
    int slot = 0;
    int chews = 0;
    for (;;) {
      const double onset = origin + (slot + 0.5) * ioi + timing_rng.uniform(-kJitter, kJitter) * ioi;
      const double dur = plan.chew_duration_mean * timing_rng.uniform(1.0 - kJitter, 1.0 + kJitter);
      const Eigen::Index start = to_index(onset, fs);
      const Eigen::Index len = std::max<Eigen::Index>(1, to_index(dur, fs));
      const double off = static_cast<double>(start + len) / fs;
      if (off > total) break;

      const bool swallow_due =
          plan.swallow_every_n_chews && (chews + 1) % *plan.swallow_every_n_chews == 0;
      double sw_on = 0.0, sw_off = 0.0;
      Eigen::Index sw_start = 0, sw_len = 0;
      if (swallow_due) {
        sw_on = off + kSwallowMargin;
        sw_start = to_index(sw_on, fs);
        sw_len = to_index(swallow_rng.uniform(0.8, 1.2), fs);
        sw_off = static_cast<double>(sw_start + sw_len) / fs;
        if (sw_off > total) break;
      }

      const VectorXd burst = scaled_to_rms(shaped_burst(len, chew_spec, chew_rng), burst_rms);
      add_at(mas, start, burst, plan.gain);
      add_at(sub, start, burst, plan.gain * plan.bleed);
      anns.push_back({AnnotationKind::Chew, {static_cast<double>(start) / fs, off}});
      ++chews;
      ++slot;

      if (swallow_due) {
        const VectorXd sw = scaled_to_rms(shaped_burst(sw_len, swallow_spec, swallow_rng), burst_rms);
        add_at(sub, sw_start, sw, plan.gain);
        add_at(mas, sw_start, sw, plan.gain * plan.bleed);
        anns.push_back({AnnotationKind::Swallow, {static_cast<double>(sw_start) / fs, sw_off}});
        origin = sw_off + kSwallowMargin + plan.mouthful_pause;
        slot = 0;
      }
    }
  }

  // Artifacts: a few overlapping low-level bursts of irregular length on both channels.
  const auto artifact_spec = band(20.0, 200.0, fs);
  for (const auto& a : plan.artifact_schedule) {
    const double level = kArtifactLevel * burst_rms * plan.gain;
    for (Channel ch : {Channel::Masseter, Channel::Submental}) {
      double t = a.span.onset;
      while (t < a.span.termination) {
        const double len_s = std::min(artifact_rng.uniform(0.3, 0.8), a.span.termination - t);
        const Eigen::Index len = to_index(len_s, fs);
        if (len < 2) break;
        const VectorXd b = scaled_to_rms(shaped_burst(len, artifact_spec, artifact_rng), level);
        add_at(rec.channel(ch), to_index(t, fs), b, artifact_rng.uniform(0.5, 1.0));
        t += len_s * artifact_rng.uniform(0.4, 0.9);
      }
    }
    anns.push_back({a.kind, a.span});
  }

  std::stable_sort(anns.begin(), anns.end(), [](const Annotation& x, const Annotation& y) {
    return x.span.onset < y.span.onset;
  });
  rec.annotations = std::move(anns);
  rec.validate();
  return rec;
}

}  // namespace chewsense::synth
