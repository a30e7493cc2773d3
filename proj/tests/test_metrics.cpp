#include "chewsense/events.hpp"
#include "chewsense/metrics.hpp"
#include "chewsense/synth.hpp"

#include <doctest.h>

#include <limits>

using namespace chewsense;
using namespace chewsense::metrics;

TEST_SUITE("metrics") {

TEST_CASE("three evenly spaced events") {
  const std::vector<ChewEvent> ev = {{0.0, 0.4}, {1.0, 1.4}, {2.0, 2.5}};
  const auto m = session_metrics(correct_and_segment(ev, 2.0));
  CHECK(m.event_count == 3);
  CHECK(m.sequence_count == 1);
  CHECK(m.cr_overall == doctest::Approx(1.2));
  CHECK(m.mean_chew_period == doctest::Approx(2.5 / 3.0));
  CHECK(m.chew_dur == doctest::Approx(1.3 / 3.0));
  CHECK(m.chew_gap == doctest::Approx(0.6));
  CHECK(m.chews_per_sequence == 3.0);
  CHECK(!m.seq_gap_defined);
}

TEST_CASE("half-second chews one second apart") {
  const std::vector<ChewEvent> ev = {{0.0, 0.5}, {1.0, 1.5}, {2.0, 2.5}};
  const auto m = session_metrics(correct_and_segment(ev, 2.0));
  CHECK(m.chew_dur == doctest::Approx(0.5));
  CHECK(m.chew_gap == doctest::Approx(0.5));
  CHECK(m.cr_overall == doctest::Approx(1.2));
}

TEST_CASE("a control-like synthetic session gives control-like magnitudes") {
  synth::SessionPlan plan;
  plan.chew_rate = 1.6;
  plan.chew_duration_mean = 0.42;
  plan.seed = 21;
  const auto rec = synth::gen_session(plan);
  const auto pr = signal::preprocess(rec, {});
  const auto& m = pr.channel(Channel::Masseter);
  const auto stats = events::baseline_stats(m, rec.intervals(AnnotationKind::Baseline).front());
  std::vector<ChewEvent> ev;
  for (const auto& b : events::detect_bursts(m, events::compute_threshold(stats))) ev.push_back({b.onset, b.termination});
  const auto s = session_metrics(correct_and_segment(ev));
  CHECK(s.cr_overall == doctest::Approx(1.6).epsilon(0.1));
  CHECK(s.chew_dur == doctest::Approx(0.42).epsilon(0.15));
}

TEST_CASE("a long pause is capped and splits the sequence") {
  // Gaps of 0.3, 3.0 and 0.4 s.
  const std::vector<ChewEvent> ev = {{0.0, 0.5}, {0.8, 1.3}, {4.3, 4.8}, {5.2, 5.7}};
  const auto t = correct_and_segment(ev, 2.0);
  REQUIRE(t.sequences.size() == 2);
  CHECK(t.sequences[0].count == 2);
  CHECK(t.sequences[1].count == 2);
  CHECK(t.corr_on[2] == doctest::Approx(3.3));
  CHECK(t.corr_off[3] == doctest::Approx(4.7));
  const auto m = session_metrics(t);
  CHECK(m.chew_gap == doctest::Approx((0.3 + 2.0 + 0.4) / 3.0));
  CHECK(m.cr_overall == doctest::Approx(4.0 / 4.7));
  CHECK(m.seq_gap == doctest::Approx(3.0));
  CHECK(m.seq_dur == doctest::Approx(1.35));
}

TEST_CASE("single event") {
  const std::vector<ChewEvent> ev = {{1.0, 1.5}};
  const auto m = session_metrics(correct_and_segment(ev));
  CHECK(m.event_count == 1);
  CHECK(m.cr_overall == doctest::Approx(2.0));
  CHECK(!m.chew_gap_defined);
  CHECK(m.sequence_count == 1);
}

TEST_CASE("infinite threshold leaves the timeline untouched") {
  const std::vector<ChewEvent> ev = {{1.0, 1.5}, {9.0, 9.4}, {30.0, 30.2}};
  const auto t = correct_and_segment(ev, std::numeric_limits<double>::infinity());
  CHECK(t.sequences.size() == 1);
  for (std::size_t i = 0; i < ev.size(); ++i) {
    CHECK(t.corr_on[i] == ev[i].onset);
    CHECK(t.corr_off[i] == ev[i].termination);
  }
}

TEST_CASE("metrics are invariant to translation") {
  std::vector<ChewEvent> ev = {{0.0, 0.4}, {0.9, 1.3}, {5.0, 5.5}, {5.9, 6.2}, {6.5, 6.9}};
  const auto a = session_metrics(correct_and_segment(ev));
  for (auto& e : ev) e.onset += 100.0, e.termination += 100.0;
  const auto b = session_metrics(correct_and_segment(ev));
  CHECK(a.cr_overall == doctest::Approx(b.cr_overall));
  CHECK(a.chew_gap == doctest::Approx(b.chew_gap));
  CHECK(a.seq_gap == doctest::Approx(b.seq_gap));
  CHECK(a.chews_per_sequence * static_cast<double>(a.sequence_count) ==
        doctest::Approx(static_cast<double>(a.event_count)));
}

TEST_CASE("invalid input") {
  CHECK_THROWS_AS(correct_and_segment(std::vector<ChewEvent>{{2.0, 2.5}, {1.0, 1.5}}), DataError);
  CHECK_THROWS_AS(correct_and_segment(std::vector<ChewEvent>{{1.0, 2.0}, {1.5, 2.5}}), DataError);
}

}  // TEST_SUITE
