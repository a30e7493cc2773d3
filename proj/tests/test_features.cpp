#include "oracles.hpp"

#include "chewsense/features.hpp"
#include "chewsense/random.hpp"
#include "chewsense/synth.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace chewsense;
using namespace chewsense::features;

namespace {

VectorXd tone(double f, double rate, Eigen::Index n) {
  VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) x[i] = std::sin(2.0 * std::numbers::pi * f * static_cast<double>(i) / rate);
  return x;
}

WindowSpec with_threshold(double thr) {
  WindowSpec s;
  s.amplitude_threshold = thr;
  return s;
}

}  // namespace

TEST_SUITE("features") {

TEST_CASE("hamming window") {
  const VectorXd w = hamming_window(5);
  CHECK(w[0] == doctest::Approx(0.08));
  CHECK(w[2] == doctest::Approx(1.0));
  CHECK(w[4] == doctest::Approx(0.08));
  CHECK(hamming_window(1)[0] == 1.0);
  CHECK_THROWS_AS(hamming_window(0), ParameterError);
  for (Eigen::Index n : {2, 7, 64, 513}) {
    const VectorXd h = hamming_window(n);
    CHECK(h.maxCoeff() <= 1.0);
    for (Eigen::Index k = 0; k < n; ++k) CHECK(std::abs(h[k] - h[n - 1 - k]) <= 1e-12);
  }
}

TEST_CASE("direct time-domain formulas") {
  VectorXd x(4);
  x << 1, -1, 1, -1;
  const auto f = extract_features(x, with_threshold(0.0), 100.0);
  CHECK(get(f, Feature::MAV) == 1.0);
  CHECK(get(f, Feature::IEMG) == 4.0);
  CHECK(get(f, Feature::WL) == 6.0);

  const auto c = extract_features(VectorXd::Constant(50, 0.5), with_threshold(0.0), 100.0);
  CHECK(get(c, Feature::RMS) == doctest::Approx(0.5));
  CHECK(get(c, Feature::SD) == 0.0);
  CHECK(get(c, Feature::WL) == 0.0);
  CHECK(get(c, Feature::ZC) == 0.0);
  CHECK(get(c, Feature::T50) == doctest::Approx(0.5).epsilon(1.0 / 49.0));
}

TEST_CASE("pure tone spectral features") {
  const VectorXd x = tone(80.0, 1024.0, 1024);
  const auto f = extract_features(x, with_threshold(0.0), 1024.0);
  CHECK(std::abs(get(f, Feature::MNF) - 80.0) <= 2.0);
  CHECK(std::abs(get(f, Feature::MDF) - 80.0) <= 2.0);
  const auto sp = periodogram(x, 1024.0, true);
  CHECK(get(f, Feature::MNP) == sp.power.mean());
}

TEST_CASE("zero crossings of a 10 Hz sine") {
  const auto f = extract_features(tone(10.0, 1024.0, 1024), with_threshold(0.0), 1024.0);
  CHECK(get(f, Feature::ZC) == doctest::Approx(20.0 / 1023.0));
}

TEST_CASE("MYOP at the threshold extremes") {
  Rng rng(2);
  VectorXd x(64);
  for (auto& v : x) v = 0.1 + rng.uniform();
  CHECK(get(extract_features(x, with_threshold(5.0), 100.0), Feature::MYOP) == 0.0);
  CHECK(get(extract_features(x, with_threshold(0.0), 100.0), Feature::MYOP) == 1.0);
}

TEST_CASE("features agree with the loop-based oracle") {
  Rng rng(17);
  for (int trial = 0; trial < 25; ++trial) {
    const Eigen::Index n = 20 + static_cast<Eigen::Index>(rng.index(600));
    VectorXd x(n);
    for (auto& v : x) v = rng.normal() * rng.uniform(0.1, 3.0);
    const double thr = rng.uniform(0.0, 1.0);
    const bool taper = trial % 3 != 0;
    WindowSpec spec = with_threshold(thr);
    spec.taper = taper;
    const CycleInfo cycle{rng.uniform(), static_cast<double>(rng.index(5))};
    const auto got = extract_features(x, spec, 102.4, cycle);
    const auto want = oracle::naive_features(std::vector<double>(x.data(), x.data() + n), thr, 102.4, taper,
                                             {cycle.cycle_duration, cycle.cycles_per_sequence});
    for (int k = 0; k < kFeatureCount; ++k) {
      INFO(feature_names()[static_cast<std::size_t>(k)]);
      CHECK(oracle::rel_err(got[k], want[static_cast<std::size_t>(k)]) <= 1e-9);
    }
  }
}

TEST_CASE("scale relations") {
  Rng rng(8);
  VectorXd x(200);
  for (auto& v : x) v = rng.normal();
  const double a = 3.5, thr = 0.3;
  const auto f = extract_features(x, with_threshold(thr), 102.4);
  const auto g = extract_features(VectorXd(a * x), with_threshold(a * thr), 102.4);
  for (auto k : {Feature::MAV, Feature::IEMG, Feature::RMS, Feature::SD, Feature::WL, Feature::PeakAmp}) {
    CHECK(get(g, k) == doctest::Approx(a * get(f, k)));
  }
  CHECK(get(g, Feature::VAR) == doctest::Approx(a * a * get(f, Feature::VAR)));
  for (auto k : {Feature::ZC, Feature::SSC, Feature::MYOP, Feature::T50, Feature::WAMP}) CHECK(get(g, k) == get(f, k));
}

TEST_CASE("median frequency bisects the discrete spectrum") {
  Rng rng(3);
  VectorXd x(101);
  for (auto& v : x) v = rng.normal();
  const auto sp = periodogram(x, 102.4, true);
  const auto f = extract_features(x, with_threshold(0.0), 102.4);
  const double total = sp.power.sum();
  Eigen::Index k = 0;
  while (sp.freq[k] != get(f, Feature::MDF)) ++k;
  CHECK(sp.power.head(k + 1).sum() >= 0.5 * total);
  CHECK(sp.power.head(k).sum() < 0.5 * total);
  CHECK(get(f, Feature::MPF) == sp.power[k]);
  CHECK(get(f, Feature::MNF) >= 0.0);
  CHECK(get(f, Feature::MNF) <= 51.2);
}

TEST_CASE("errors") {
  CHECK_THROWS_AS(extract_features(VectorXd(), with_threshold(0.0), 100.0), DataError);
  CHECK_THROWS_AS(extract_features(VectorXd::Ones(4), with_threshold(0.0), 1.5), ParameterError);
  WindowSpec bad{0.5, 0.75, true, std::nullopt};
  CHECK_THROWS_AS(bad.validate(), ParameterError);
}

TEST_CASE("cycle info takes the burst with the largest overlap") {
  std::vector<events::BurstInterval> bursts = {{1.0, 1.4}, {1.9, 2.3}, {2.8, 3.1}, {6.0, 6.5}};
  const auto c = cycle_info(bursts, {2.0, 2.5}, 2.0);
  CHECK(c.cycle_duration == doctest::Approx(0.4));
  CHECK(c.cycles_per_sequence == 3.0);
  const auto none = cycle_info(bursts, {4.0, 4.5}, 2.0);
  CHECK(none.cycle_duration == 0.0);
  CHECK(none.cycles_per_sequence == 0.0);
  const auto o = oracle::naive_cycle(bursts, 6.1, 6.6, 2.0);
  const auto l = cycle_info(bursts, {6.1, 6.6}, 2.0);
  CHECK(l.cycle_duration == o.duration);
  CHECK(l.cycles_per_sequence == o.count);
}

TEST_CASE("window counts and labels") {
  CHECK(window_count(10.0, WindowSpec::chew()) == 39);
  CHECK(window_count(0.4, WindowSpec::chew()) == 0);

  synth::SessionPlan plan;
  plan.duration = 5.0;
  plan.chew_rate = 0.0;
  auto rec = synth::gen_session(plan);
  rec.annotations.clear();
  const auto m = build_feature_matrix(signal::preprocess(rec, {}), WindowSpec::chew(), Task::Chew);
  CHECK(m.rows() == static_cast<Eigen::Index>(window_count(rec.duration(), WindowSpec::chew())));
  CHECK(m.cols() == 2 * kFeatureCount);
  for (auto l : m.labels) CHECK(l == Label::NA);
  CHECK(m.names[0] == "masseter.MAV");
  CHECK(m.names[kFeatureCount] == "submental.MAV");
}

TEST_CASE("fraction of chew rows tracks annotation coverage") {
  synth::SessionPlan plan;
  plan.seed = 6;
  const auto rec = synth::gen_session(plan);
  const auto m = build_feature_matrix(signal::preprocess(rec, {}), WindowSpec::chew(), Task::Chew);
  double covered = 0.0;
  for (const auto& c : rec.intervals(AnnotationKind::Chew)) covered += c.duration();
  const double coverage = covered / rec.duration();
  const double frac = static_cast<double>(m.label_counts()[Label::C]) / static_cast<double>(m.rows());
  CHECK(std::abs(frac - coverage) <= 0.1 * coverage);
}

TEST_CASE("recordings shorter than a window are rejected") {
  synth::SessionPlan plan;
  plan.duration = 0.1;
  plan.baseline_lead = 0.2;
  plan.chew_rate = 0.0;
  const auto rec = synth::gen_session(plan);
  CHECK_THROWS_AS(build_feature_matrix(signal::preprocess(rec, {}), WindowSpec::chew(), Task::Chew), DataError);
}

}  // TEST_SUITE
