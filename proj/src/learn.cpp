#include "chewsense/learn.hpp"

#include "chewsense/random.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <set>

namespace chewsense::learn {

void TrainConfig::validate() const {
  if (!(C > 0.0)) throw ParameterError("train: C must be > 0");
  if (!(tolerance > 0.0)) throw ParameterError("train: tolerance must be > 0");
  if (max_epochs < 1) throw ParameterError("train: max_epochs must be >= 1");
  if (loss != "squared_hinge") throw ParameterError("train: unsupported loss '" + loss + "'");
}

double LinearModel::decision(const Eigen::Ref<const VectorXd>& row) const {
  return weights.dot(((row - mean).array() / scale.array()).matrix()) + bias;
}

Prediction predict(const LinearModel& model, const Eigen::Ref<const VectorXd>& row) {
  if (row.size() != model.weights.size()) {
    throw DataError("predict: row has " + std::to_string(row.size()) + " features, model expects " +
                    std::to_string(model.weights.size()));
  }
  const double d = model.decision(row);
  return {d > 0.0 ? model.positive : Label::NA, d};
}

std::vector<Label> predict_all(const LinearModel& model, const MatrixXd& rows) {
  std::vector<Label> out;
  out.reserve(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index i = 0; i < rows.rows(); ++i) out.push_back(predict(model, rows.row(i).transpose()).label);
  return out;
}

ClassWeights compute_class_weights(const std::map<Label, std::size_t>& counts) {
  if (counts.empty()) throw DataError("class weights: no classes");
  std::size_t total = 0;
  for (const auto& [label, n] : counts) {
    if (n == 0) throw DataError("class weights: class " + std::string(to_string(label)) + " has no samples");
    total += n;
  }
  ClassWeights w;
  const double k = static_cast<double>(counts.size());
  for (const auto& [label, n] : counts) w[label] = static_cast<double>(total) / (k * static_cast<double>(n));
  return w;
}

std::vector<std::size_t> balance_test_set(std::span<const Label> labels, std::uint64_t seed) {
  std::map<Label, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  if (by_class.empty()) return {};
  std::size_t minority = labels.size();
  for (const auto& [l, idx] : by_class) minority = std::min(minority, idx.size());

  Rng rng(seed);
  std::vector<std::size_t> out;
  for (auto& [l, idx] : by_class) {
    if (idx.size() > minority) rng.shuffle(idx.begin(), idx.end());
    out.insert(out.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(minority));
  }
  std::sort(out.begin(), out.end());
  return out;
}

SquaredHingeObjective::SquaredHingeObjective(MatrixXd x, VectorXd y, VectorXd s, double c)
    : x_(std::move(x)), y_(std::move(y)), s_(std::move(s)), c_(c) {}

double SquaredHingeObjective::value(const VectorXd& w, double b) const {
  const VectorXd margin = ((x_ * w).array() + b).matrix();
  const auto h = (1.0 - y_.array() * margin.array()).max(0.0);
  return 0.5 * w.squaredNorm() + c_ * (s_.array() * h.square()).sum();
}

void SquaredHingeObjective::gradient(const VectorXd& w, double b, VectorXd& grad_w,
                                     double& grad_b) const {
  const VectorXd margin = ((x_ * w).array() + b).matrix();
  const VectorXd coef = (s_.array() * (1.0 - y_.array() * margin.array()).max(0.0) * y_.array()).matrix();
  grad_w = w - 2.0 * c_ * (x_.transpose() * coef);
  grad_b = -2.0 * c_ * coef.sum();
}

double SquaredHingeObjective::lipschitz_bound() const {
  const VectorXd norms = x_.rowwise().squaredNorm();
  return 1.0 + 2.0 * c_ * (s_.array() * (norms.array() + 1.0)).sum();
}

namespace {

Label positive_of(const std::vector<Label>& labels) {
  std::set<Label> present(labels.begin(), labels.end());
  if (present.size() < 2) throw DataError("train: need two classes, found " + std::to_string(present.size()));
  if (present.size() > 2 || !present.contains(Label::NA)) {
    throw DataError("train: labels must be NA plus one positive class");
  }
  present.erase(Label::NA);
  return *present.begin();
}

}  // namespace

LinearModel train_linear_svm(const features::FeatureMatrix& matrix, const TrainConfig& config) {
  config.validate();
  const MatrixXd& x = matrix.values;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (!x.col(j).allFinite()) {
      const std::string name = j < static_cast<Eigen::Index>(matrix.names.size())
                                   ? matrix.names[static_cast<std::size_t>(j)]
                                   : std::to_string(j);
      throw DataError("train: non-finite value in feature column '" + name + "'");
    }
  }
  LinearModel model;
  model.positive = positive_of(matrix.labels);
  model.feature_names = matrix.names;
  model.config = config;

  const auto n = x.rows();
  model.mean = x.colwise().mean().transpose();
  model.scale = ((x.rowwise() - model.mean.transpose()).array().square().colwise().sum() /
                 static_cast<double>(std::max<Eigen::Index>(1, n)))
                    .sqrt()
                    .transpose();
  for (Eigen::Index j = 0; j < model.scale.size(); ++j) {
    if (!(model.scale[j] > 1e-12)) model.scale[j] = 1.0;
  }
  MatrixXd xs = (x.rowwise() - model.mean.transpose()).array().rowwise() / model.scale.transpose().array();

  const ClassWeights cw = config.class_weights ? *config.class_weights
                                               : compute_class_weights(matrix.label_counts());
  VectorXd y(n), s(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Label l = matrix.labels[static_cast<std::size_t>(i)];
    y[i] = l == model.positive ? 1.0 : -1.0;
    const auto it = cw.find(l);
    s[i] = it == cw.end() ? 1.0 : it->second;
  }

  const SquaredHingeObjective obj(std::move(xs), std::move(y), std::move(s), config.C);
  VectorXd w = VectorXd::Zero(obj.dim());
  double b = 0.0;
  double f = obj.value(w, b);
  double step = 1.0 / obj.lipschitz_bound();
  model.report.objective_trace.push_back(f);

  VectorXd gw;
  double gb = 0.0;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    model.report.epochs = epoch;
    obj.gradient(w, b, gw, gb);
    const double gnorm = std::sqrt(gw.squaredNorm() + gb * gb);
    if (gnorm <= config.tolerance) {
      model.report.converged = true;
      break;
    }
    bool accepted = false;
    double f_new = f;
    while (step > 1e-300) {
      const VectorXd w_try = w - step * gw;
      const double b_try = b - step * gb;
      f_new = obj.value(w_try, b_try);
      if (f_new <= f) {
        w = w_try;
        b = b_try;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      model.report.converged = true;
      break;
    }
    const double decrease = f - f_new;
    f = f_new;
    model.report.objective_trace.push_back(f);
    step *= 2.0;
    if (decrease <= config.tolerance * std::max(1.0, std::abs(f))) {
      model.report.converged = true;
      break;
    }
  }
  model.weights = w;
  model.bias = b;
  return model;
}

std::map<Label, ClassMetrics> prf_metrics(std::span<const Label> truth, std::span<const Label> predicted) {
  if (truth.size() != predicted.size()) throw DataError("prf_metrics: length mismatch");
  std::set<Label> classes(truth.begin(), truth.end());
  classes.insert(predicted.begin(), predicted.end());
  std::map<Label, ClassMetrics> out;
  for (Label c : classes) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const bool t = truth[i] == c, p = predicted[i] == c;
      tp += t && p;
      fp += !t && p;
      fn += t && !p;
    }
    ClassMetrics m;
    m.support = tp + fn;
    m.precision = tp + fp ? double(tp) / double(tp + fp) : 0.0;
    m.recall = tp + fn ? double(tp) / double(tp + fn) : 0.0;
    m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    out[c] = m;
  }
  return out;
}

std::vector<int> stratified_folds(std::span<const Label> labels, int k, std::uint64_t seed) {
  if (k < 2) throw ParameterError("folds: k must be >= 2");
  std::map<Label, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  Rng rng(seed);
  std::vector<int> fold(labels.size(), 0);
  int next = 0;
  for (auto& [l, idx] : by_class) {
    rng.shuffle(idx.begin(), idx.end());
    for (std::size_t i : idx) {
      fold[i] = next;
      next = (next + 1) % k;
    }
  }
  return fold;
}

namespace {

bool folds_usable(std::span<const Label> labels, const std::vector<int>& fold, int k) {
  std::set<Label> all(labels.begin(), labels.end());
  for (int f = 0; f < k; ++f) {
    std::set<Label> val, train;
    for (std::size_t i = 0; i < labels.size(); ++i) (fold[i] == f ? val : train).insert(labels[i]);
    if (val != all || train != all) return false;
  }
  return true;
}

}  // namespace

GridSearchResult grid_search_cv(const features::FeatureMatrix& matrix, std::span<const double> c_grid,
                                const TrainConfig& base, int k, std::uint64_t seed) {
  if (c_grid.empty()) throw ParameterError("grid search: empty grid");
  if (k < 2) throw ParameterError("grid search: k must be >= 2");
  GridSearchResult result;
  bool ok = false;
  for (int attempt = 0; attempt < 5 && !ok; ++attempt) {
    result.folds = stratified_folds(matrix.labels, k, seed + static_cast<std::uint64_t>(attempt));
    ok = folds_usable(matrix.labels, result.folds, k);
  }
  if (!ok) throw DataError("grid search: a class is absent from some fold after 5 attempts");

  const Label positive = positive_of(matrix.labels);
  for (double c : c_grid) {
    TrainConfig cfg = base;
    cfg.C = c;
    double total = 0.0;
    for (int f = 0; f < k; ++f) {
      std::vector<std::size_t> tr, va;
      for (std::size_t i = 0; i < matrix.labels.size(); ++i) (result.folds[i] == f ? va : tr).push_back(i);
      const auto model = train_linear_svm(matrix.select(tr), cfg);
      const auto val = matrix.select(va);
      const auto pred = predict_all(model, val.values);
      total += prf_metrics(val.labels, pred)[positive].f1;
    }
    result.scores.push_back({c, total / k});
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < result.scores.size(); ++i) {
    const auto& s = result.scores[i];
    const auto& b = result.scores[best];
    if (s.mean_f1 > b.mean_f1 || (s.mean_f1 == b.mean_f1 && s.C < b.C)) best = i;
  }
  result.best = base;
  result.best.C = result.scores[best].C;
  return result;
}

EvalReport lopo_evaluate(const features::FeatureMatrix& matrix, const TrainConfig& config,
                         std::uint64_t seed) {
  const auto ids = matrix.participant_ids();
  if (ids.size() < 2) throw DataError("lopo: need at least 2 participants");
  EvalReport report;
  report.positive = positive_of(matrix.labels);

  std::vector<std::future<FoldResult>> jobs;
  for (std::size_t f = 0; f < ids.size(); ++f) {
    jobs.push_back(std::async(std::launch::async, [&, f] {
      std::vector<std::size_t> tr, te;
      for (std::size_t i = 0; i < matrix.participants.size(); ++i) {
        (matrix.participants[i] == ids[f] ? te : tr).push_back(i);
      }
      const auto model = train_linear_svm(matrix.select(tr), config);
      const auto test = matrix.select(te);
      std::set<Label> present(test.labels.begin(), test.labels.end());
      if (present.size() < 2) {
        throw DataError("lopo: participant " + ids[f] + " lacks one of the classes");
      }
      const auto keep = balance_test_set(test.labels, seed + f);
      const auto bal = test.select(keep);
      FoldResult r;
      r.participant = ids[f];
      r.test_rows = keep.size();
      r.metrics = prf_metrics(bal.labels, predict_all(model, bal.values));
      return r;
    }));
  }
  for (auto& j : jobs) report.folds.push_back(j.get());

  std::set<Label> classes;
  for (const auto& fr : report.folds) {
    for (const auto& [l, m] : fr.metrics) classes.insert(l);
  }
  const double nf = static_cast<double>(report.folds.size());
  for (Label l : classes) {
    ClassMetrics avg;
    for (const auto& fr : report.folds) {
      const auto it = fr.metrics.find(l);
      if (it == fr.metrics.end()) continue;
      avg.precision += it->second.precision / nf;
      avg.recall += it->second.recall / nf;
      avg.f1 += it->second.f1 / nf;
      avg.support += it->second.support;
    }
    report.average[l] = avg;
  }
  const double mean = report.average[report.positive].f1;
  double ss = 0.0;
  for (const auto& fr : report.folds) {
    const auto it = fr.metrics.find(report.positive);
    const double f1 = it == fr.metrics.end() ? 0.0 : it->second.f1;
    ss += (f1 - mean) * (f1 - mean);
  }
  report.f1_sd = report.folds.size() > 1 ? std::sqrt(ss / (nf - 1.0)) : 0.0;
  return report;
}

}  // namespace chewsense::learn
