#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "malbehave/classifiers.hpp"

namespace malbehave {

/// Raw error counts with Target as the class of interest.
struct ConfusionCounts {
  std::uint64_t a = 0;  ///< true Target predicted NonTarget
  std::uint64_t b = 0;  ///< true NonTarget predicted Target
  std::uint64_t n_target = 0;
  std::uint64_t n_nontarget = 0;

  bool operator==(const ConfusionCounts&) const = default;
};

struct ClassErrors {
  double fp_pct = 0.0;
  double fn_pct = 0.0;
};

/// Per-class false positive / false negative percentages, each normalized
/// by the true size of the class it is reported for:
///   target:    fp = 100 b / n_target,    fn = 100 a / n_target
///   nontarget: fp = 100 a / n_nontarget, fn = 100 b / n_nontarget
struct ErrorReport {
  ConfusionCounts counts;
  ClassErrors target;
  ClassErrors nontarget;

  /// (a + b) / (n_target + n_nontarget)
  double combined_error() const;
};

ConfusionCounts confusion(std::span<const Label> truth, std::span<const Label> predicted);
ErrorReport error_report(const ConfusionCounts& counts);

/// "fp%/fn%" with two decimals, e.g. "6.84%/4.29%".
std::string format_errors(const ClassErrors& errors);

using Predictor = std::function<Label(const FeatureVector&)>;

/// A named training procedure. `fit` must not modify shared state.
struct Learner {
  std::string id;
  std::string name;
  std::function<Predictor(const Dataset& train, std::uint64_t seed)> fit;
};

Learner make_learner(const AlgorithmConfig& config);
std::vector<AlgorithmConfig> default_algorithms();

struct NamedReport {
  std::string id;
  std::string name;
  ErrorReport report;
};

ErrorReport evaluate(const Predictor& predictor, const Dataset& test);

/// Trains every learner on `train` and scores it on `test`, in learner order.
/// Throws EvaluationError if the datasets share a sample_id or were built
/// with different layouts.
std::vector<NamedReport> run_experiment(const Dataset& train, const Dataset& test,
                                        std::span<const Learner> learners, std::uint64_t seed);
std::vector<NamedReport> run_experiment(const Dataset& train, const Dataset& test,
                                        std::span<const AlgorithmConfig> configs,
                                        std::uint64_t seed);

struct FlipResult {
  std::vector<NamedReport> forward;  ///< train A, test B
  std::vector<NamedReport> flipped;  ///< train B, test A
};

FlipResult flip_experiment(const Dataset& a, const Dataset& b, std::span<const Learner> learners,
                           std::uint64_t seed);
FlipResult flip_experiment(const Dataset& a, const Dataset& b,
                           std::span<const AlgorithmConfig> configs, std::uint64_t seed);

/// Plain-text table: `Algorithm | +/- (Target) | +/- (NonTarget)`.
std::string render_table(std::span<const NamedReport> reports);
/// JSON with raw counts and full-precision percentages.
std::string render_json(std::span<const NamedReport> reports);

}  // namespace malbehave
