/**
 * @file classifiers.hpp
 * @brief The five binary classifiers: L2-regularized L2-loss SVM, L1 and
 * L2 logistic regression, a CART tree and k-nearest neighbours.
 *
 * Linear models and kNN work on z-scored features (the Standardizer is
 * fitted on training data and stored in the model). Trees split raw
 * feature values. Label::Target is the positive class (+1).
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "malbehave/features.hpp"

namespace malbehave {

struct Standardizer {
  FeatureValues mean{};
  FeatureValues stddev{};  ///< population stddev, 1 for constant slots

  FeatureValues apply(const FeatureValues& x) const;
  bool operator==(const Standardizer&) const = default;
};

Standardizer fit_standardizer(const Dataset& train);

enum class LinearKind { SvmL2L2, LogRegL1, LogRegL2 };

struct LinearModel {
  LinearKind kind = LinearKind::SvmL2L2;
  double cost = 0.01;
  double tol = 1e-6;
  std::uint64_t seed = 0;
  FeatureValues weights{};
  double bias = 0.0;
  Standardizer standardizer;
  std::uint64_t layout_fingerprint = 0;

  /// w . standardize(x) + b
  double decision(const FeatureValues& x) const;
  Label predict(const FeatureValues& x) const {
    return decision(x) >= 0.0 ? Label::Target : Label::NonTarget;
  }
};

struct LinearOptions {
  double cost = 0.01;
  /// Stop once an iteration lowers the objective by less than tol (relative).
  double tol = 1e-6;
  std::uint64_t seed = 0;
  std::size_t max_iter = 1000;
  /// When set, receives the objective value before the first and after
  /// every iteration (Newton step or coordinate sweep).
  std::vector<double>* objective_trace = nullptr;
};

/**
 * Standardized training problem shared by the linear solvers.
 *
 * Objectives, with z_i = w . x_i + b and y_i in {-1, +1}:
 *   SvmL2L2:  1/2 |w|^2 + C sum max(0, 1 - y_i z_i)^2
 *   LogRegL2: 1/2 |w|^2 + C sum log(1 + exp(-y_i z_i))
 *   LogRegL1: |w|_1     + C sum log(1 + exp(-y_i z_i))
 * The bias is never penalized.
 */
class LinearProblem {
 public:
  LinearProblem(const Dataset& train, const Standardizer& standardizer, double cost);

  std::size_t rows() const noexcept { return labels_.size(); }
  double cost() const noexcept { return cost_; }
  /// Row-major standardized design matrix, rows() x kFeatureCount.
  std::span<const double> design() const noexcept { return design_; }
  std::span<const double> labels() const noexcept { return labels_; }

  double objective(LinearKind kind, std::span<const double> w, double b) const;
  /// Gradient of everything except an L1 penalty, as (w_0..w_64, b).
  std::vector<double> smooth_gradient(LinearKind kind, std::span<const double> w, double b) const;

 private:
  std::vector<double> design_;
  std::vector<double> labels_;
  double cost_;
};

LinearModel train_svm(const Dataset& train, const LinearOptions& options = {});

enum class Penalty { L1, L2 };
LinearModel train_logreg(const Dataset& train, Penalty penalty, const LinearOptions& options = {});

struct TreeNode {
  std::int32_t feature = -1;  ///< -1 marks a leaf
  double threshold = 0.0;     ///< left branch takes value <= threshold
  std::int32_t left = -1;
  std::int32_t right = -1;
  Label label = Label::NonTarget;  ///< majority label of the node's training partition
  std::uint32_t samples = 0;

  bool is_leaf() const noexcept { return feature < 0; }
};

struct TreeModel {
  std::vector<TreeNode> nodes;  ///< nodes[0] is the root
  std::size_t min_split = 5;
  std::uint64_t layout_fingerprint = 0;

  Label predict(const FeatureValues& x) const;
  std::size_t depth() const;
};

/// Greedy CART induction with Gini impurity. Split candidates are midpoints
/// of consecutive distinct values; ties go to the lowest feature index, then
/// the lowest threshold. A node becomes a leaf when it holds fewer than
/// min_split samples, is pure, or no split strictly lowers impurity.
TreeModel train_tree(const Dataset& train, std::size_t min_split = 5);

struct KnnModel {
  std::size_t k = 980;
  Standardizer standardizer;
  std::vector<double> points;  ///< row-major standardized training set
  std::vector<Label> labels;
  std::uint64_t layout_fingerprint = 0;

  std::size_t size() const noexcept { return labels.size(); }
  std::span<const double> point(std::size_t i) const {
    return std::span<const double>(points).subspan(i * kFeatureCount, kFeatureCount);
  }

  /// Indices of the k nearest stored points to an already standardized
  /// query, ordered by (squared distance, index).
  std::vector<std::size_t> nearest(const FeatureValues& standardized_query) const;
  Label predict(const FeatureValues& x) const;
};

KnnModel train_knn(const Dataset& train, std::size_t k = 980);

using TrainedModel = std::variant<LinearModel, TreeModel, KnnModel>;

enum class Algorithm { Svm, LogRegL1, LogRegL2, Tree, Knn };

inline constexpr std::array<Algorithm, 5> kAllAlgorithms{
    Algorithm::Svm, Algorithm::LogRegL1, Algorithm::LogRegL2, Algorithm::Tree, Algorithm::Knn};

/// Hyperparameters; defaults are the reference configuration.
struct AlgorithmConfig {
  Algorithm algorithm = Algorithm::Svm;
  double cost = 0.01;
  double tol = 1e-6;
  std::size_t min_split = 5;
  std::size_t k = 980;
};

/// Command-line spelling: svm, logreg-l1, logreg-l2, tree, knn.
std::string_view algorithm_id(Algorithm algorithm);
std::optional<Algorithm> algorithm_from_id(std::string_view id);
/// Row label used in report tables.
std::string_view display_name(Algorithm algorithm);

Algorithm algorithm_of(const TrainedModel& model);
TrainedModel train(const AlgorithmConfig& config, const Dataset& data, std::uint64_t seed);

/// Throws LayoutMismatch if `x` was extracted with another layout and
/// DatasetError if it holds non-finite values.
Label predict(const TrainedModel& model, const FeatureVector& x);

}  // namespace malbehave
