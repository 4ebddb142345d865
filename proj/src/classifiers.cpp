#include "malbehave/classifiers.hpp"

#include <cmath>

#include "malbehave/error.hpp"

namespace malbehave {

std::string_view algorithm_id(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::Svm: return "svm";
    case Algorithm::LogRegL1: return "logreg-l1";
    case Algorithm::LogRegL2: return "logreg-l2";
    case Algorithm::Tree: return "tree";
    case Algorithm::Knn: return "knn";
  }
  return "?";
}

std::optional<Algorithm> algorithm_from_id(std::string_view id) {
  for (Algorithm a : kAllAlgorithms) {
    if (algorithm_id(a) == id) return a;
  }
  return std::nullopt;
}

std::string_view display_name(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::Svm: return "SVM";
    case Algorithm::LogRegL1: return "Logistic Reg. (L1)";
    case Algorithm::LogRegL2: return "Logistic Reg. (L2)";
    case Algorithm::Tree: return "Decision Trees";
    case Algorithm::Knn: return "KNN";
  }
  return "?";
}

Algorithm algorithm_of(const TrainedModel& model) {
  if (const auto* linear = std::get_if<LinearModel>(&model)) {
    switch (linear->kind) {
      case LinearKind::SvmL2L2: return Algorithm::Svm;
      case LinearKind::LogRegL1: return Algorithm::LogRegL1;
      case LinearKind::LogRegL2: return Algorithm::LogRegL2;
    }
  }
  return std::holds_alternative<TreeModel>(model) ? Algorithm::Tree : Algorithm::Knn;
}

TrainedModel train(const AlgorithmConfig& config, const Dataset& data, std::uint64_t seed) {
  LinearOptions linear;
  linear.cost = config.cost;
  linear.tol = config.tol;
  linear.seed = seed;
  switch (config.algorithm) {
    case Algorithm::Svm: return train_svm(data, linear);
    case Algorithm::LogRegL1: return train_logreg(data, Penalty::L1, linear);
    case Algorithm::LogRegL2: return train_logreg(data, Penalty::L2, linear);
    case Algorithm::Tree: return train_tree(data, config.min_split);
    case Algorithm::Knn: return train_knn(data, config.k);
  }
  throw TrainingError("unknown algorithm");
}

Label predict(const TrainedModel& model, const FeatureVector& x) {
  const std::uint64_t expected =
      std::visit([](const auto& m) { return m.layout_fingerprint; }, model);
  if (x.layout_fingerprint != expected) {
    throw LayoutMismatch("sample '" + x.sample_id +
                         "' was extracted with a different feature layout than the model");
  }
  for (double v : x.values) {
    if (!std::isfinite(v)) throw DatasetError("sample '" + x.sample_id + "' has a non-finite value");
  }
  return std::visit([&x](const auto& m) { return m.predict(x.values); }, model);
}

}  // namespace malbehave
