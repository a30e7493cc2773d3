#pragma once

#include "chewsense/features.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace chewsense::learn {

using ClassWeights = std::map<Label, double>;

struct TrainConfig {
  double C = 5.0;
  std::string loss = "squared_hinge";
  int max_epochs = 5000;
  double tolerance = 1e-9;
  /// Unset means balanced weights computed from the training labels.
  std::optional<ClassWeights> class_weights;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainReport {
  int epochs = 0;
  bool converged = false;
  std::vector<double> objective_trace;  // objective after each epoch, starting at w = 0
};

/// Linear decision function over standardized features:
/// f(x) = w . ((x - mean) / scale) + b, positive when f(x) > 0.
struct LinearModel {
  VectorXd weights;
  double bias = 0.0;
  std::vector<std::string> feature_names;
  VectorXd mean;
  VectorXd scale;
  Label positive = Label::C;
  TrainConfig config;
  TrainReport report;

  double decision(const Eigen::Ref<const VectorXd>& row) const;
};

struct Prediction {
  Label label = Label::NA;
  double decision = 0.0;
};

/// Throws DataError on an arity mismatch.
Prediction predict(const LinearModel& model, const Eigen::Ref<const VectorXd>& row);
std::vector<Label> predict_all(const LinearModel& model, const MatrixXd& rows);

/// w_c = N / (K * N_c).
ClassWeights compute_class_weights(const std::map<Label, std::size_t>& counts);

/// Indices (ascending) of a subsample where every class is cut down to the
/// minority count, uniformly at random per class.
std::vector<std::size_t> balance_test_set(std::span<const Label> labels, std::uint64_t seed);

/// (1/2)|w|^2 + C * sum_i s_i * max(0, 1 - y_i (w . x_i + b))^2
/// over already-standardized rows, y_i in {-1, +1}.
class SquaredHingeObjective {
 public:
  SquaredHingeObjective(MatrixXd x, VectorXd y, VectorXd sample_weights, double c);

  double value(const VectorXd& w, double b) const;
  void gradient(const VectorXd& w, double b, VectorXd& grad_w, double& grad_b) const;
  /// Upper bound on the gradient's Lipschitz constant.
  double lipschitz_bound() const;

  Eigen::Index dim() const { return x_.cols(); }

 private:
  MatrixXd x_;
  VectorXd y_;
  VectorXd s_;
  double c_;
};

/// Full-batch gradient descent with step halving on objective increase.
LinearModel train_linear_svm(const features::FeatureMatrix& matrix, const TrainConfig& config);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

std::map<Label, ClassMetrics> prf_metrics(std::span<const Label> truth, std::span<const Label> predicted);

/// Fold id (0..k-1) per row; each class is shuffled and dealt round-robin.
std::vector<int> stratified_folds(std::span<const Label> labels, int k, std::uint64_t seed);

struct GridPoint {
  double C = 0.0;
  double mean_f1 = 0.0;
};

struct GridSearchResult {
  TrainConfig best;
  std::vector<GridPoint> scores;  // grid order
  std::vector<int> folds;
};

/// Stratified k-fold mean F1 (positive class) for each C; ties go to the
/// smallest C, then grid order.
GridSearchResult grid_search_cv(const features::FeatureMatrix& matrix, std::span<const double> c_grid,
                                const TrainConfig& base, int k, std::uint64_t seed);

struct FoldResult {
  std::string participant;
  std::map<Label, ClassMetrics> metrics;
  std::size_t test_rows = 0;
};

struct EvalReport {
  Label positive = Label::C;
  std::vector<FoldResult> folds;
  std::map<Label, ClassMetrics> average;
  double f1_sd = 0.0;  // sample sd of positive-class F1 over folds

  double mean_f1() const { return average.at(positive).f1; }
};

/// Leave-one-participant-out: one fold per participant, test fold balanced.
EvalReport lopo_evaluate(const features::FeatureMatrix& matrix, const TrainConfig& config,
                         std::uint64_t seed = 0);

}  // namespace chewsense::learn
