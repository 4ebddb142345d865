#include "malbehave/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <memory>
#include <unordered_set>

#include "json.hpp"
#include "malbehave/error.hpp"

namespace malbehave {
namespace {

void check_disjoint(const Dataset& train, const Dataset& test) {
  if (train.layout_fingerprint != test.layout_fingerprint) {
    throw EvaluationError("training and test data use different feature layouts");
  }
  std::unordered_set<std::string_view> ids;
  for (const auto& row : train.rows) ids.insert(row.sample_id);
  for (const auto& row : test.rows) {
    if (ids.contains(row.sample_id)) {
      throw EvaluationError("sample '" + row.sample_id + "' appears in both training and test data");
    }
  }
}

std::vector<Learner> learners_for(std::span<const AlgorithmConfig> configs) {
  std::vector<Learner> out;
  out.reserve(configs.size());
  for (const auto& c : configs) out.push_back(make_learner(c));
  return out;
}

}  // namespace

double ErrorReport::combined_error() const {
  return static_cast<double>(counts.a + counts.b) /
         static_cast<double>(counts.n_target + counts.n_nontarget);
}

ConfusionCounts confusion(std::span<const Label> truth, std::span<const Label> predicted) {
  if (truth.size() != predicted.size()) {
    throw EvaluationError("label sequences differ in length (" + std::to_string(truth.size()) +
                          " vs " + std::to_string(predicted.size()) + ")");
  }
  if (truth.empty()) throw EvaluationError("no labels to compare");
  ConfusionCounts c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == Label::Target) {
      ++c.n_target;
      c.a += predicted[i] == Label::NonTarget ? 1 : 0;
    } else {
      ++c.n_nontarget;
      c.b += predicted[i] == Label::Target ? 1 : 0;
    }
  }
  return c;
}

ErrorReport error_report(const ConfusionCounts& c) {
  if (c.n_target == 0 || c.n_nontarget == 0) {
    throw EvaluationError("error rates need samples of both classes (target=" +
                          std::to_string(c.n_target) + ", nontarget=" +
                          std::to_string(c.n_nontarget) + ")");
  }
  if (c.a > c.n_target || c.b > c.n_nontarget) {
    throw EvaluationError("error counts exceed class sizes");
  }
  const auto a = static_cast<double>(c.a);
  const auto b = static_cast<double>(c.b);
  const auto nt = static_cast<double>(c.n_target);
  const auto nn = static_cast<double>(c.n_nontarget);
  ErrorReport r;
  r.counts = c;
  r.target = {100.0 * b / nt, 100.0 * a / nt};
  r.nontarget = {100.0 * a / nn, 100.0 * b / nn};
  return r;
}

std::string format_errors(const ClassErrors& e) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f%%/%.2f%%", e.fp_pct, e.fn_pct);
  return buf;
}

Learner make_learner(const AlgorithmConfig& config) {
  return Learner{
      std::string(algorithm_id(config.algorithm)),
      std::string(display_name(config.algorithm)),
      [config](const Dataset& train_set, std::uint64_t seed) -> Predictor {
        auto model = std::make_shared<const TrainedModel>(train(config, train_set, seed));
        return [model](const FeatureVector& x) { return predict(*model, x); };
      },
  };
}

std::vector<AlgorithmConfig> default_algorithms() {
  std::vector<AlgorithmConfig> out;
  for (Algorithm a : kAllAlgorithms) out.push_back(AlgorithmConfig{.algorithm = a});
  return out;
}

ErrorReport evaluate(const Predictor& predictor, const Dataset& test) {
  std::vector<Label> truth;
  std::vector<Label> predicted;
  truth.reserve(test.size());
  predicted.reserve(test.size());
  for (const auto& row : test.rows) {
    if (!row.label) throw EvaluationError("test sample '" + row.sample_id + "' has no label");
    truth.push_back(*row.label);
    predicted.push_back(predictor(row));
  }
  return error_report(confusion(truth, predicted));
}

std::vector<NamedReport> run_experiment(const Dataset& train_set, const Dataset& test,
                                        std::span<const Learner> learners, std::uint64_t seed) {
  check_disjoint(train_set, test);
  std::vector<NamedReport> out;
  if (learners.empty()) return out;
  require_trainable(train_set);
  for (const auto& learner : learners) {
    const Predictor predictor = learner.fit(train_set, seed);
    out.push_back({learner.id, learner.name, evaluate(predictor, test)});
  }
  return out;
}

std::vector<NamedReport> run_experiment(const Dataset& train_set, const Dataset& test,
                                        std::span<const AlgorithmConfig> configs,
                                        std::uint64_t seed) {
  const auto learners = learners_for(configs);
  return run_experiment(train_set, test, learners, seed);
}

FlipResult flip_experiment(const Dataset& a, const Dataset& b, std::span<const Learner> learners,
                           std::uint64_t seed) {
  check_disjoint(a, b);
  FlipResult result;
  result.forward = run_experiment(a, b, learners, seed);
  result.flipped = run_experiment(b, a, learners, seed);
  return result;
}

FlipResult flip_experiment(const Dataset& a, const Dataset& b,
                           std::span<const AlgorithmConfig> configs, std::uint64_t seed) {
  const auto learners = learners_for(configs);
  return flip_experiment(a, b, learners, seed);
}

std::string render_table(std::span<const NamedReport> reports) {
  std::size_t width = std::string_view("Algorithm").size();
  for (const auto& r : reports) width = std::max(width, r.name.size());

  auto row = [width](std::string_view name, std::string_view t, std::string_view n) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-*.*s | %-15.*s | %.*s\n", static_cast<int>(width),
                  static_cast<int>(name.size()), name.data(), static_cast<int>(t.size()),
                  t.data(), static_cast<int>(n.size()), n.data());
    return std::string(buf);
  };
  std::string out = row("Algorithm", "+/- (Target)", "+/- (NonTarget)");
  out += std::string(width, '-') + "-+-" + std::string(15, '-') + "-+-" + std::string(15, '-') + "\n";
  for (const auto& r : reports) {
    out += row(r.name, format_errors(r.report.target), format_errors(r.report.nontarget));
  }
  return out;
}

std::string render_json(std::span<const NamedReport> reports) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    const auto& c = r.report.counts;
    nlohmann::ordered_json obj;
    obj["algorithm"] = r.id;
    obj["name"] = r.name;
    obj["counts"] = {{"a", c.a}, {"b", c.b}, {"n_target", c.n_target},
                     {"n_nontarget", c.n_nontarget}};
    obj["target"] = {{"fp_pct", r.report.target.fp_pct}, {"fn_pct", r.report.target.fn_pct}};
    obj["nontarget"] = {{"fp_pct", r.report.nontarget.fp_pct},
                        {"fn_pct", r.report.nontarget.fn_pct}};
    obj["combined_error_pct"] = 100.0 * r.report.combined_error();
    arr.push_back(std::move(obj));
  }
  return arr.dump(2) + "\n";
}

}  // namespace malbehave
