#include <cmath>

#include "malbehave/classifiers.hpp"
#include "malbehave/error.hpp"

namespace malbehave {

FeatureValues Standardizer::apply(const FeatureValues& x) const {
  FeatureValues out;
  for (std::size_t j = 0; j < kFeatureCount; ++j) out[j] = (x[j] - mean[j]) / stddev[j];
  return out;
}

Standardizer fit_standardizer(const Dataset& train) {
  if (train.empty()) throw DatasetError("cannot fit a standardizer on an empty dataset");
  const auto n = static_cast<double>(train.size());
  Standardizer s;
  for (std::size_t j = 0; j < kFeatureCount; ++j) {
    const double first = train.rows.front().values[j];
    bool constant = true;
    double sum = 0.0;
    for (const auto& row : train.rows) {
      sum += row.values[j];
      constant = constant && row.values[j] == first;
    }
    if (constant) {
      s.mean[j] = first;
      s.stddev[j] = 1.0;
      continue;
    }
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& row : train.rows) {
      const double d = row.values[j] - mean;
      ss += d * d;
    }
    const double sd = std::sqrt(ss / n);
    s.mean[j] = mean;
    s.stddev[j] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

}  // namespace malbehave
