#pragma once

#include <iosfwd>
#include <string>
#include <string_view>

#include "malbehave/classifiers.hpp"

namespace malbehave {

inline constexpr int kModelFormatVersion = 1;

/**
 * Model files are a one-line header followed by a JSON payload:
 *
 *     malbehave-model <format_version> <payload_bytes>\n
 *     {"format_version":..,"kind":..,"hyperparameters":{..},
 *      "layout_fingerprint":"<16 hex>","standardizer":{..}|null,"parameters":{..}}
 *
 * Doubles are written in shortest round-trip form, so load(save(m)) is
 * exact and identical models serialize to identical bytes.
 */
std::string save_model(const TrainedModel& model);
void save_model(std::ostream& out, const TrainedModel& model);

/// Throws ModelFormatError on a bad header, length, version or payload and
/// LayoutMismatch when the stored fingerprint differs from `expected`'s.
TrainedModel load_model(std::string_view bytes, const FeatureLayout& expected = default_layout());
TrainedModel load_model(std::istream& in, const FeatureLayout& expected = default_layout());

}  // namespace malbehave
