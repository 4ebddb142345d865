#include <algorithm>
#include <cmath>
#include <queue>

#include "malbehave/classifiers.hpp"
#include "malbehave/error.hpp"

namespace malbehave {

// Scans stored points in index order while keeping the k best in a max-heap
// keyed on (distance, index). A point is abandoned as soon as its partial
// squared distance reaches the current k-th best: the remaining terms are
// non-negative, and on an exact tie the later index loses anyway.
std::vector<std::size_t> KnnModel::nearest(const FeatureValues& q) const {
  const std::size_t n = size();
  const std::size_t want = std::min(k, n);
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry> heap;

  for (std::size_t i = 0; i < n; ++i) {
    const double* p = points.data() + i * kFeatureCount;
    const bool full = heap.size() == want;
    const double bound = full ? heap.top().first : 0.0;
    double dist = 0.0;
    bool abandoned = false;
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
      const double d = q[j] - p[j];
      dist += d * d;
      if (full && dist >= bound) {
        abandoned = true;
        break;
      }
    }
    if (abandoned) continue;
    if (!full) {
      heap.emplace(dist, i);
    } else {
      heap.pop();
      heap.emplace(dist, i);
    }
  }

  std::vector<std::size_t> out(heap.size());
  for (auto it = out.rbegin(); it != out.rend(); ++it) {
    *it = heap.top().second;
    heap.pop();
  }
  return out;
}

Label KnnModel::predict(const FeatureValues& x) const {
  const auto neighbours = nearest(standardizer.apply(x));
  std::size_t targets = 0;
  for (std::size_t i : neighbours) targets += labels[i] == Label::Target ? 1 : 0;
  // Vote ties go to NonTarget.
  return 2 * targets > neighbours.size() ? Label::Target : Label::NonTarget;
}

KnnModel train_knn(const Dataset& train, std::size_t k) {
  require_trainable(train);
  if (k == 0) throw TrainingError("k must be positive");
  if (k > train.size()) {
    throw TrainingError("k = " + std::to_string(k) + " exceeds the " +
                        std::to_string(train.size()) + " training samples");
  }
  KnnModel model;
  model.k = k;
  model.layout_fingerprint = train.layout_fingerprint;
  model.standardizer = fit_standardizer(train);
  model.points.reserve(train.size() * kFeatureCount);
  model.labels.reserve(train.size());
  for (const auto& row : train.rows) {
    for (double v : row.values) {
      if (!std::isfinite(v)) {
        throw TrainingError("sample '" + row.sample_id + "' has a non-finite feature value");
      }
    }
    const FeatureValues s = model.standardizer.apply(row.values);
    model.points.insert(model.points.end(), s.begin(), s.end());
    model.labels.push_back(*row.label);
  }
  return model;
}

}  // namespace malbehave
