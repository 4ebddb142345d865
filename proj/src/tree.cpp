#include <algorithm>
#include <cmath>
#include <numeric>

#include "malbehave/classifiers.hpp"
#include "malbehave/error.hpp"

namespace malbehave {
namespace {

// Weighted Gini impurity of a partition is n - S with
// S = sum over children of (t^2 + f^2) / n_child, so the best split maximizes S.
// S is kept as an exact fraction so that ties are decided exactly.
struct SplitScore {
  __int128 num = 0;
  __int128 den = 1;

  static SplitScore of(std::int64_t tl, std::int64_t fl, std::int64_t tr, std::int64_t fr) {
    const __int128 nl = tl + fl;
    const __int128 nr = tr + fr;
    return {(static_cast<__int128>(tl) * tl + static_cast<__int128>(fl) * fl) * nr +
                (static_cast<__int128>(tr) * tr + static_cast<__int128>(fr) * fr) * nl,
            nl * nr};
  }

  bool greater_than(const SplitScore& other) const { return num * other.den > other.num * den; }
};

struct Candidate {
  std::size_t feature = 0;
  double threshold = 0.0;
  SplitScore score;
};

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& data, std::size_t min_split) : data_(data), min_split_(min_split) {}

  TreeModel build() {
    TreeModel model;
    model.min_split = min_split_;
    model.layout_fingerprint = data_.layout_fingerprint;
    std::vector<std::size_t> all(data_.size());
    std::iota(all.begin(), all.end(), 0);

    struct Pending {
      std::vector<std::size_t> samples;
      std::int32_t node;
    };
    std::vector<Pending> stack;
    model.nodes.emplace_back();
    stack.push_back({std::move(all), 0});

    // Depth-first, left child before right, so node numbering is stable.
    while (!stack.empty()) {
      Pending job = std::move(stack.back());
      stack.pop_back();
      auto [targets, others] = class_counts(job.samples);
      TreeNode& node = model.nodes[static_cast<std::size_t>(job.node)];
      node.samples = static_cast<std::uint32_t>(job.samples.size());
      node.label = targets > others ? Label::Target : Label::NonTarget;

      if (job.samples.size() < min_split_ || targets == 0 || others == 0) continue;
      auto best = best_split(job.samples, targets, others);
      if (!best) continue;

      std::vector<std::size_t> left;
      std::vector<std::size_t> right;
      for (std::size_t i : job.samples) {
        (data_.rows[i].values[best->feature] <= best->threshold ? left : right).push_back(i);
      }
      const auto left_id = static_cast<std::int32_t>(model.nodes.size());
      model.nodes.emplace_back();
      model.nodes.emplace_back();
      TreeNode& parent = model.nodes[static_cast<std::size_t>(job.node)];
      parent.feature = static_cast<std::int32_t>(best->feature);
      parent.threshold = best->threshold;
      parent.left = left_id;
      parent.right = left_id + 1;
      stack.push_back({std::move(right), left_id + 1});
      stack.push_back({std::move(left), left_id});
    }
    return model;
  }

 private:
  std::pair<std::int64_t, std::int64_t> class_counts(const std::vector<std::size_t>& samples) const {
    std::int64_t t = 0;
    for (std::size_t i : samples) t += data_.rows[i].label == Label::Target ? 1 : 0;
    return {t, static_cast<std::int64_t>(samples.size()) - t};
  }

  std::optional<Candidate> best_split(const std::vector<std::size_t>& samples, std::int64_t targets,
                                      std::int64_t others) const {
    const auto n = static_cast<std::int64_t>(samples.size());
    // Unsplit score: (t^2 + f^2) / n. A split must beat it strictly.
    const SplitScore parent{static_cast<__int128>(targets) * targets +
                                static_cast<__int128>(others) * others,
                            n};
    std::optional<Candidate> best;
    std::vector<std::size_t> order(samples);

    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      auto value = [&](std::size_t i) { return data_.rows[i].values[f]; };
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return value(a) < value(b) || (value(a) == value(b) && a < b);
      });

      std::int64_t tl = 0;
      std::int64_t fl = 0;
      for (std::size_t pos = 0; pos + 1 < order.size(); ++pos) {
        (data_.rows[order[pos]].label == Label::Target ? tl : fl) += 1;
        const double lo = value(order[pos]);
        const double hi = value(order[pos + 1]);
        if (lo == hi) continue;

        const SplitScore score = SplitScore::of(tl, fl, targets - tl, others - fl);
        if (!score.greater_than(parent)) continue;
        if (best && !score.greater_than(best->score)) continue;

        double threshold = lo + (hi - lo) / 2.0;
        if (!(threshold < hi)) threshold = lo;
        best = Candidate{f, threshold, score};
      }
    }
    return best;
  }

  const Dataset& data_;
  std::size_t min_split_;
};

}  // namespace

Label TreeModel::predict(const FeatureValues& x) const {
  if (nodes.empty()) throw ModelFormatError("tree has no nodes");
  std::size_t at = 0;
  while (!nodes[at].is_leaf()) {
    const TreeNode& node = nodes[at];
    at = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)] <= node.threshold
                                      ? node.left
                                      : node.right);
  }
  return nodes[at].label;
}

std::size_t TreeModel::depth() const {
  if (nodes.empty()) return 0;
  std::size_t deepest = 0;
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [at, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    if (!nodes[at].is_leaf()) {
      stack.emplace_back(static_cast<std::size_t>(nodes[at].left), d + 1);
      stack.emplace_back(static_cast<std::size_t>(nodes[at].right), d + 1);
    }
  }
  return deepest;
}

TreeModel train_tree(const Dataset& train, std::size_t min_split) {
  require_trainable(train);
  if (min_split == 0) throw TrainingError("min_split must be positive");
  for (const auto& row : train.rows) {
    for (double v : row.values) {
      if (!std::isfinite(v)) {
        throw TrainingError("sample '" + row.sample_id + "' has a non-finite feature value");
      }
    }
  }
  return TreeBuilder(train, min_split).build();
}

}  // namespace malbehave
