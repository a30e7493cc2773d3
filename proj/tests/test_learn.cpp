#include "oracles.hpp"

#include "chewsense/learn.hpp"
#include "chewsense/random.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace chewsense;
using namespace chewsense::learn;

namespace {

/// Two Gaussian blobs per participant; `gap` controls separability.
features::FeatureMatrix blobs(std::size_t per_class, double gap, std::uint64_t seed, int participants = 1,
                              double noise = 1.0, std::size_t dims = 2) {
  Rng rng(seed);
  features::FeatureMatrix m;
  for (std::size_t d = 0; d < dims; ++d) m.names.push_back("f" + std::to_string(d));
  const std::size_t rows = 2 * per_class * static_cast<std::size_t>(participants);
  m.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dims));
  std::size_t r = 0;
  for (int p = 0; p < participants; ++p) {
    for (std::size_t i = 0; i < 2 * per_class; ++i, ++r) {
      const bool pos = i % 2 == 0;
      for (std::size_t d = 0; d < dims; ++d) {
        m.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(d)) =
            rng.normal() * noise + (pos ? gap : -gap) * (d == 0 ? 1.0 : 0.5);
      }
      m.labels.push_back(pos ? Label::C : Label::NA);
      m.participants.push_back("P" + std::to_string(p));
      m.windows.push_back({0.0, 0.0});
    }
  }
  return m;
}

}  // namespace

TEST_SUITE("learn") {

TEST_CASE("balanced class weights") {
  auto w = compute_class_weights({{Label::NA, 900}, {Label::C, 100}});
  CHECK(w[Label::NA] == doctest::Approx(0.5556).epsilon(1e-3));
  CHECK(w[Label::C] == doctest::Approx(5.0));
  w = compute_class_weights({{Label::NA, 100}, {Label::C, 100}});
  CHECK(w[Label::NA] == 1.0);
  w = compute_class_weights({{Label::NA, 500}, {Label::C, 100}, {Label::S, 400}});
  CHECK(w[Label::NA] == doctest::Approx(0.667).epsilon(1e-3));
  CHECK(w[Label::C] == doctest::Approx(3.333).epsilon(1e-3));
  CHECK(w[Label::S] == doctest::Approx(0.833).epsilon(1e-3));
  CHECK_THROWS_AS(compute_class_weights({{Label::NA, 5}, {Label::C, 0}}), DataError);
}

TEST_CASE("test-set balancing") {
  std::vector<Label> labels(500, Label::NA);
  labels.insert(labels.end(), 100, Label::C);
  const auto idx = balance_test_set(labels, 3);
  std::size_t c = 0, na = 0;
  for (auto i : idx) (labels[i] == Label::C ? c : na)++;
  CHECK(c == 100);
  CHECK(na == 100);
  CHECK(idx == balance_test_set(labels, 3));
  CHECK(idx != balance_test_set(labels, 4));
  CHECK(std::is_sorted(idx.begin(), idx.end()));
  std::vector<Label> even(50, Label::NA);
  even.insert(even.end(), 50, Label::C);
  CHECK(balance_test_set(even, 1).size() == 100);
}

TEST_CASE("separable blobs are fit perfectly and the objective never increases") {
  const auto m = blobs(100, 4.0, 1);
  const auto model = train_linear_svm(m, {});
  const auto pred = predict_all(model, m.values);
  CHECK(pred == m.labels);
  const auto& trace = model.report.objective_trace;
  REQUIRE(trace.size() >= 2);
  for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1] + 1e-12);
  CHECK(model.report.converged);
}

TEST_CASE("analytic gradient matches central differences") {
  Rng rng(31);
  const Eigen::Index n = 60, d = 5;
  MatrixXd x(n, d);
  VectorXd y(n), s(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = rng.normal();
    y[i] = rng.uniform() < 0.4 ? 1.0 : -1.0;
    s[i] = rng.uniform(0.5, 2.0);
  }
  const SquaredHingeObjective obj(x, y, s, 5.0);
  for (int point = 0; point < 10; ++point) {
    VectorXd w(d);
    for (auto& v : w) v = rng.normal() * 0.5;
    const double b = rng.normal() * 0.5;
    VectorXd gw;
    double gb = 0.0;
    obj.gradient(w, b, gw, gb);
    const double h = 1e-6;
    for (Eigen::Index j = 0; j <= d; ++j) {
      VectorXd wp = w, wm = w;
      double bp = b, bm = b;
      if (j < d) {
        wp[j] += h;
        wm[j] -= h;
      } else {
        bp += h;
        bm -= h;
      }
      const double fd = (obj.value(wp, bp) - obj.value(wm, bm)) / (2.0 * h);
      const double an = j < d ? gw[j] : gb;
      CHECK(std::abs(fd - an) <= 1e-5 * std::max(1.0, std::abs(an)));
    }
  }
}

TEST_CASE("strong regularization drives the weights to zero") {
  const auto m = blobs(50, 2.0, 2);
  TrainConfig cfg;
  cfg.C = 1e-8;
  const double tiny = train_linear_svm(m, cfg).weights.norm();
  CHECK(tiny < 1e-4);
  CHECK(tiny < 1e-4 * train_linear_svm(m, {}).weights.norm());
}

TEST_CASE("prediction tie rule and arity") {
  LinearModel model;
  model.weights = VectorXd::Zero(2);
  model.mean = VectorXd::Zero(2);
  model.scale = VectorXd::Ones(2);
  model.feature_names = {"a", "b"};
  const auto p = predict(model, VectorXd::Ones(2));
  CHECK(p.decision == 0.0);
  CHECK(p.label == Label::NA);
  model.bias = 1e-12;
  CHECK(predict(model, VectorXd::Ones(2)).label == Label::C);
  CHECK_THROWS_AS(predict(model, VectorXd::Ones(3)), DataError);
}

TEST_CASE("training input validation") {
  auto m = blobs(10, 2.0, 3);
  auto single = m;
  std::fill(single.labels.begin(), single.labels.end(), Label::NA);
  CHECK_THROWS_AS(train_linear_svm(single, {}), DataError);
  m.values(3, 1) = std::nan("");
  CHECK_THROWS_WITH_AS(train_linear_svm(m, {}), doctest::Contains("f1"), DataError);
}

TEST_CASE("rescaling a column and retraining gives identical labels") {
  const auto m = blobs(80, 1.0, 4, 1, 1.0, 3);
  auto scaled = m;
  scaled.values.col(1) *= 1000.0;
  scaled.values.col(2) *= 0.001;
  const auto a = predict_all(train_linear_svm(m, {}), m.values);
  const auto b = predict_all(train_linear_svm(scaled, {}), scaled.values);
  CHECK(a == b);
}

TEST_CASE("precision, recall and F1") {
  std::vector<Label> truth, pred;
  for (int i = 0; i < 9; ++i) truth.push_back(Label::C), pred.push_back(Label::C);
  truth.push_back(Label::NA), pred.push_back(Label::C);
  truth.push_back(Label::C), pred.push_back(Label::NA);
  auto r = prf_metrics(truth, pred);
  CHECK(r[Label::C].precision == doctest::Approx(0.9));
  CHECK(r[Label::C].recall == doctest::Approx(0.9));
  CHECK(r[Label::C].f1 == doctest::Approx(0.9));
  r = prf_metrics(truth, truth);
  CHECK(r[Label::C].f1 == 1.0);
  std::vector<Label> none(truth.size(), Label::NA);
  r = prf_metrics(truth, none);
  CHECK(r[Label::C].precision == 0.0);
  CHECK(r[Label::C].recall == 0.0);
  CHECK(r[Label::C].f1 == 0.0);
  CHECK_THROWS_AS(prf_metrics(truth, std::vector<Label>(3, Label::NA)), DataError);
}

TEST_CASE("stratified folds partition the rows") {
  const auto m = blobs(31, 1.0, 5);
  const auto folds = stratified_folds(m.labels, 3, 9);
  CHECK(folds.size() == m.labels.size());
  for (int f : folds) {
    CHECK(f >= 0);
    CHECK(f < 3);
  }
  for (int f = 0; f < 3; ++f) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < folds.size(); ++i) c += folds[i] == f && m.labels[i] == Label::C;
    CHECK(c >= 10);
  }
}

TEST_CASE("grid search") {
  const auto m = blobs(60, 0.6, 6, 1, 1.0, 4);
  const std::vector<double> single = {5.0};
  CHECK(grid_search_cv(m, single, {}, 3, 1).best.C == 5.0);

  const std::vector<double> grid = {0.01, 5.0};
  const auto g = grid_search_cv(m, grid, {}, 3, 1);
  // Exhaustive re-evaluation on the same folds.
  double best_f1 = -1.0, best_c = 0.0;
  for (double c : grid) {
    double total = 0.0;
    for (int f = 0; f < 3; ++f) {
      std::vector<std::size_t> tr, va;
      for (std::size_t i = 0; i < g.folds.size(); ++i) (g.folds[i] == f ? va : tr).push_back(i);
      TrainConfig cfg;
      cfg.C = c;
      const auto model = train_linear_svm(m.select(tr), cfg);
      const auto val = m.select(va);
      total += prf_metrics(val.labels, predict_all(model, val.values))[Label::C].f1;
    }
    if (total / 3.0 > best_f1) best_f1 = total / 3.0, best_c = c;
  }
  CHECK(g.best.C == best_c);
  CHECK(g.scores.size() == 2);
  CHECK_THROWS_AS(grid_search_cv(m, grid, {}, 1, 1), ParameterError);
}

TEST_CASE("leave-one-participant-out structure") {
  const auto m = blobs(40, 1.5, 7, 3);
  const auto r = lopo_evaluate(m, {}, 2);
  REQUIRE(r.folds.size() == 3);
  std::set<std::string> ids;
  double sum = 0.0;
  for (const auto& f : r.folds) {
    ids.insert(f.participant);
    sum += f.metrics.at(Label::C).f1;
  }
  CHECK(ids.size() == 3);
  CHECK(r.mean_f1() == doctest::Approx(sum / 3.0));
  auto one = blobs(40, 1.5, 7, 1);
  CHECK_THROWS_AS(lopo_evaluate(one, {}, 2), DataError);
}

TEST_CASE("shuffled labels give chance-level F1") {
  auto m = blobs(150, 1.5, 8, 4);
  Rng rng(99);
  rng.shuffle(m.labels.begin(), m.labels.end());
  const auto r = lopo_evaluate(m, {}, 1);
  CHECK(r.mean_f1() == doctest::Approx(0.5).epsilon(0.2));
}

TEST_CASE("training is deterministic") {
  const auto m = blobs(60, 1.0, 10);
  const auto a = train_linear_svm(m, {});
  const auto b = train_linear_svm(m, {});
  CHECK(a.weights == b.weights);
  CHECK(a.bias == b.bias);
}

}  // TEST_SUITE
