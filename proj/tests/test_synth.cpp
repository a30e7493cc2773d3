#include "chewsense/io.hpp"
#include "chewsense/signal.hpp"
#include "chewsense/synth.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace chewsense;

TEST_SUITE("synth") {

TEST_CASE("baseline noise is deterministic and matches the filtered noise level") {
  const VectorXd a = synth::gen_baseline_noise(5.0, 1024.0, 0.01, 3);
  const VectorXd b = synth::gen_baseline_noise(5.0, 1024.0, 0.01, 3);
  CHECK(a == b);
  CHECK(a != synth::gen_baseline_noise(5.0, 1024.0, 0.01, 4));
  const double sd = std::sqrt((a.array() - a.mean()).square().sum() / (a.size() - 1.0));
  const double want = 0.01 * synth::baseline_noise_gain(1024.0);
  CHECK(sd == doctest::Approx(want).epsilon(0.15));
  CHECK(synth::gen_baseline_noise(5.0, 1024.0, 0.0, 3).isZero());
}

TEST_CASE("chew bursts have a raised-cosine envelope and the requested peak") {
  const VectorXd env = synth::burst_envelope(431);
  CHECK(env[0] == doctest::Approx(0.0));
  CHECK(env[430] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(env[215] == doctest::Approx(1.0).epsilon(1e-4));

  const VectorXd b = synth::gen_chew_burst(0.42, 0.8, 1024.0, 11);
  CHECK(b.size() == 430);
  CHECK(b.cwiseAbs().maxCoeff() == doctest::Approx(0.8).epsilon(0.1));
  CHECK(synth::gen_chew_burst(0.42, 0.0, 1024.0, 11).isZero());
  const VectorXd c = synth::gen_chew_burst(0.42, 0.8, 1024.0, 12);
  CHECK(c != b);
  CHECK(c.size() == b.size());
}

TEST_CASE("a 60 s session at 1.5 chews/s has 90 +/- 2 chews") {
  synth::SessionPlan plan;
  plan.seed = 21;
  const auto rec = synth::gen_session(plan);
  const auto chews = rec.intervals(AnnotationKind::Chew);
  CHECK(chews.size() >= 88);
  CHECK(chews.size() <= 92);
  CHECK(rec.duration() == doctest::Approx(plan.baseline_lead + plan.duration));
  for (std::size_t i = 1; i < chews.size(); ++i) CHECK(chews[i].onset > chews[i - 1].termination);
}

TEST_CASE("swallows follow every n-th chew") {
  synth::SessionPlan plan;
  plan.swallow_every_n_chews = 10;
  plan.mouthful_pause = 0.0;
  plan.duration = 75.0;
  const auto rec = synth::gen_session(plan);
  const auto chews = rec.intervals(AnnotationKind::Chew).size();
  CHECK(rec.intervals(AnnotationKind::Swallow).size() == chews / 10);
  for (const auto& s : rec.intervals(AnnotationKind::Swallow)) {
    CHECK(s.duration() >= 0.8 - 1e-3);
    CHECK(s.duration() <= 1.2 + 1e-3);
  }
}

TEST_CASE("zero rate gives a baseline-only recording") {
  synth::SessionPlan plan;
  plan.chew_rate = 0.0;
  plan.duration = 10.0;
  const auto rec = synth::gen_session(plan);
  CHECK(rec.intervals(AnnotationKind::Chew).empty());
  CHECK(rec.intervals(AnnotationKind::Baseline).size() == 1);
}

TEST_CASE("overlapping bursts are an infeasible plan") {
  synth::SessionPlan plan;
  plan.chew_rate = 4.0;
  CHECK_THROWS_WITH_AS(synth::gen_session(plan), doctest::Contains("infeasible"), ParameterError);
  plan.chew_rate = -1.0;
  CHECK_THROWS_AS(synth::gen_session(plan), ParameterError);
}

TEST_CASE("bursts stand well above the baseline at 15 dB") {
  synth::SessionPlan plan;
  plan.snr_db = 15.0;
  plan.seed = 5;
  const auto rec = synth::gen_session(plan);
  const VectorXd x = rec.channel(Channel::Masseter).cwiseAbs();
  const auto fs = rec.sample_rate;
  auto mean_over = [&](const Interval& iv) {
    const auto a = static_cast<Eigen::Index>(iv.onset * fs), b = static_cast<Eigen::Index>(iv.termination * fs);
    return x.segment(a, b - a).mean();
  };
  const double base = mean_over({1.0, 4.5});
  for (const auto& c : rec.intervals(AnnotationKind::Chew)) CHECK(mean_over(c) > 3.0 * base);
}

TEST_CASE("artifacts are annotated and rendered on both channels") {
  synth::SessionPlan plan;
  plan.duration = 20.0;
  plan.artifact_schedule.push_back({AnnotationKind::Speech, {10.0, 12.0}});
  const auto rec = synth::gen_session(plan);
  CHECK(rec.intervals(AnnotationKind::Speech).size() == 1);
  synth::SessionPlan bad = plan;
  bad.artifact_schedule = {{AnnotationKind::Motion, {24.0, 30.0}}};
  CHECK_THROWS_AS(synth::gen_session(bad), ParameterError);
}

TEST_CASE("regeneration is byte-identical through the recording format") {
  synth::SessionPlan plan;
  plan.duration = 8.0;
  plan.seed = 77;
  std::ostringstream d1, a1, d2, a2;
  io::write_recording(synth::gen_session(plan), d1, a1);
  io::write_recording(synth::gen_session(plan), d2, a2);
  CHECK(d1.str() == d2.str());
  CHECK(a1.str() == a2.str());
}

}  // TEST_SUITE
