#include "malbehave/model_io.hpp"

#include <charconv>
#include <cstdio>
#include <istream>
#include <iterator>
#include <ostream>

#include "json.hpp"
#include "malbehave/error.hpp"

namespace malbehave {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr std::string_view kMagic = "malbehave-model";

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

ordered_json values_json(const FeatureValues& values) {
  ordered_json arr = ordered_json::array();
  for (double v : values) arr.push_back(v);
  return arr;
}

ordered_json standardizer_json(const Standardizer& s) {
  ordered_json obj;
  obj["mean"] = values_json(s.mean);
  obj["stddev"] = values_json(s.stddev);
  return obj;
}

ordered_json payload(const LinearModel& m) {
  ordered_json obj;
  obj["hyperparameters"] = {{"cost", m.cost}, {"tol", m.tol}, {"seed", m.seed}};
  obj["standardizer"] = standardizer_json(m.standardizer);
  obj["parameters"] = {{"weights", values_json(m.weights)}, {"bias", m.bias}};
  return obj;
}

ordered_json payload(const TreeModel& m) {
  ordered_json feature = ordered_json::array(), threshold = ordered_json::array(),
               left = ordered_json::array(), right = ordered_json::array(),
               label = ordered_json::array(), samples = ordered_json::array();
  for (const auto& node : m.nodes) {
    feature.push_back(node.feature);
    threshold.push_back(node.threshold);
    left.push_back(node.left);
    right.push_back(node.right);
    label.push_back(to_string(node.label));
    samples.push_back(node.samples);
  }
  ordered_json obj;
  obj["hyperparameters"] = {{"min_split", m.min_split}};
  obj["standardizer"] = nullptr;
  obj["parameters"] = {{"feature", feature}, {"threshold", threshold}, {"left", left},
                       {"right", right},     {"label", label},         {"samples", samples}};
  return obj;
}

ordered_json payload(const KnnModel& m) {
  ordered_json labels = ordered_json::array();
  ordered_json points = ordered_json::array();
  for (std::size_t i = 0; i < m.size(); ++i) {
    labels.push_back(to_string(m.labels[i]));
    ordered_json row = ordered_json::array();
    for (double v : m.point(i)) row.push_back(v);
    points.push_back(std::move(row));
  }
  ordered_json obj;
  obj["hyperparameters"] = {{"k", m.k}};
  obj["standardizer"] = standardizer_json(m.standardizer);
  obj["parameters"] = {{"labels", labels}, {"points", points}};
  return obj;
}

[[noreturn]] void bad(const std::string& what) { throw ModelFormatError("model file: " + what); }

const json& field(const json& obj, const char* name) {
  if (!obj.is_object()) bad("expected an object holding '" + std::string(name) + "'");
  auto it = obj.find(name);
  if (it == obj.end()) bad(std::string("missing '") + name + "'");
  return *it;
}

double number(const json& v, const char* what) {
  if (!v.is_number()) bad(std::string(what) + " must be a number");
  return v.get<double>();
}

template <typename Int>
Int integer(const json& v, const char* what) {
  if (!v.is_number_integer()) bad(std::string(what) + " must be an integer");
  return v.get<Int>();
}

FeatureValues values_from(const json& v, const char* what) {
  if (!v.is_array() || v.size() != kFeatureCount) {
    bad(std::string(what) + " must hold " + std::to_string(kFeatureCount) + " numbers");
  }
  FeatureValues out;
  for (std::size_t j = 0; j < kFeatureCount; ++j) out[j] = number(v[j], what);
  return out;
}

Standardizer standardizer_from(const json& v) {
  Standardizer s;
  s.mean = values_from(field(v, "mean"), "standardizer.mean");
  s.stddev = values_from(field(v, "stddev"), "standardizer.stddev");
  for (double sd : s.stddev) {
    if (!(sd > 0.0)) bad("standardizer.stddev must be positive");
  }
  return s;
}

Label label_from(const json& v) {
  if (!v.is_string()) bad("labels must be strings");
  auto label = label_from_string(v.get<std::string>());
  if (!label) bad("unknown label '" + v.get<std::string>() + "'");
  return *label;
}

const json& array_of(const json& obj, const char* name, std::size_t size) {
  const json& v = field(obj, name);
  if (!v.is_array() || v.size() != size) bad(std::string("'") + name + "' has the wrong length");
  return v;
}

TreeModel tree_from(const json& hyper, const json& params) {
  TreeModel m;
  m.min_split = integer<std::size_t>(field(hyper, "min_split"), "min_split");
  const json& feature = field(params, "feature");
  if (!feature.is_array() || feature.empty()) bad("tree has no nodes");
  const std::size_t n = feature.size();
  const json& threshold = array_of(params, "threshold", n);
  const json& left = array_of(params, "left", n);
  const json& right = array_of(params, "right", n);
  const json& label = array_of(params, "label", n);
  const json& samples = array_of(params, "samples", n);
  m.nodes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    TreeNode& node = m.nodes[i];
    node.feature = integer<std::int32_t>(feature[i], "feature");
    node.threshold = number(threshold[i], "threshold");
    node.left = integer<std::int32_t>(left[i], "left");
    node.right = integer<std::int32_t>(right[i], "right");
    node.label = label_from(label[i]);
    node.samples = integer<std::uint32_t>(samples[i], "samples");
    if (node.is_leaf()) continue;
    // Children always follow their parent, which rules out cycles.
    const auto self = static_cast<std::int64_t>(i);
    if (node.feature >= static_cast<std::int32_t>(kFeatureCount) || node.left <= self ||
        node.right <= self || node.left >= static_cast<std::int64_t>(n) ||
        node.right >= static_cast<std::int64_t>(n)) {
      bad("tree node " + std::to_string(i) + " is malformed");
    }
  }
  return m;
}

KnnModel knn_from(const json& hyper, const json& params) {
  KnnModel m;
  m.k = integer<std::size_t>(field(hyper, "k"), "k");
  const json& labels = field(params, "labels");
  if (!labels.is_array()) bad("'labels' must be an array");
  const json& points = array_of(params, "points", labels.size());
  m.labels.reserve(labels.size());
  m.points.reserve(labels.size() * kFeatureCount);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    m.labels.push_back(label_from(labels[i]));
    const FeatureValues p = values_from(points[i], "points[i]");
    m.points.insert(m.points.end(), p.begin(), p.end());
  }
  if (m.k == 0 || m.k > m.size()) bad("k is out of range for the stored samples");
  return m;
}

}  // namespace

std::string save_model(const TrainedModel& model) {
  ordered_json body;
  body["format_version"] = kModelFormatVersion;
  body["kind"] = algorithm_id(algorithm_of(model));
  ordered_json rest = std::visit([](const auto& m) { return payload(m); }, model);
  body["hyperparameters"] = rest["hyperparameters"];
  body["layout_fingerprint"] =
      hex64(std::visit([](const auto& m) { return m.layout_fingerprint; }, model));
  body["standardizer"] = rest["standardizer"];
  body["parameters"] = rest["parameters"];

  const std::string text = body.dump() + "\n";
  return std::string(kMagic) + " " + std::to_string(kModelFormatVersion) + " " +
         std::to_string(text.size()) + "\n" + text;
}

void save_model(std::ostream& out, const TrainedModel& model) { out << save_model(model); }

TrainedModel load_model(std::string_view bytes, const FeatureLayout& expected) {
  const auto eol = bytes.find('\n');
  if (eol == std::string_view::npos) bad("missing header line");
  const std::string_view header = bytes.substr(0, eol);
  const std::string_view body = bytes.substr(eol + 1);

  if (header.substr(0, kMagic.size()) != kMagic || header.size() <= kMagic.size() ||
      header[kMagic.size()] != ' ') {
    bad("not a malbehave model");
  }
  std::string_view rest = header.substr(kMagic.size() + 1);
  int version = 0;
  std::size_t length = 0;
  auto r1 = std::from_chars(rest.data(), rest.data() + rest.size(), version);
  if (r1.ec != std::errc{} || r1.ptr == rest.data() + rest.size() || *r1.ptr != ' ') {
    bad("malformed header");
  }
  auto r2 = std::from_chars(r1.ptr + 1, rest.data() + rest.size(), length);
  if (r2.ec != std::errc{} || r2.ptr != rest.data() + rest.size()) bad("malformed header");
  if (version != kModelFormatVersion) {
    bad("format version " + std::to_string(version) + " is not supported (expected " +
        std::to_string(kModelFormatVersion) + ")");
  }
  if (length != body.size()) {
    bad("payload is " + std::to_string(body.size()) + " bytes, header declares " +
        std::to_string(length));
  }

  json doc = json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) bad("payload is not a JSON object");
  if (integer<int>(field(doc, "format_version"), "format_version") != kModelFormatVersion) {
    bad("payload format_version disagrees with header");
  }
  const json& fp = field(doc, "layout_fingerprint");
  if (!fp.is_string()) bad("layout_fingerprint must be a string");
  if (fp.get<std::string>() != expected.fingerprint_hex()) {
    throw LayoutMismatch("model layout fingerprint " + fp.get<std::string>() +
                         " does not match the feature layout " + expected.fingerprint_hex());
  }
  const std::uint64_t fingerprint = expected.fingerprint();

  const json& kind_field = field(doc, "kind");
  if (!kind_field.is_string()) bad("kind must be a string");
  auto algorithm = algorithm_from_id(kind_field.get<std::string>());
  if (!algorithm) bad("unknown model kind '" + kind_field.get<std::string>() + "'");

  const json& hyper = field(doc, "hyperparameters");
  const json& params = field(doc, "parameters");
  const json& standardizer = field(doc, "standardizer");

  switch (*algorithm) {
    case Algorithm::Svm:
    case Algorithm::LogRegL1:
    case Algorithm::LogRegL2: {
      LinearModel m;
      m.kind = *algorithm == Algorithm::Svm        ? LinearKind::SvmL2L2
               : *algorithm == Algorithm::LogRegL1 ? LinearKind::LogRegL1
                                                   : LinearKind::LogRegL2;
      m.cost = number(field(hyper, "cost"), "cost");
      m.tol = number(field(hyper, "tol"), "tol");
      m.seed = integer<std::uint64_t>(field(hyper, "seed"), "seed");
      m.standardizer = standardizer_from(standardizer);
      m.weights = values_from(field(params, "weights"), "weights");
      m.bias = number(field(params, "bias"), "bias");
      m.layout_fingerprint = fingerprint;
      return m;
    }
    case Algorithm::Tree: {
      TreeModel m = tree_from(hyper, params);
      m.layout_fingerprint = fingerprint;
      return m;
    }
    case Algorithm::Knn: {
      KnnModel m = knn_from(hyper, params);
      m.standardizer = standardizer_from(standardizer);
      m.layout_fingerprint = fingerprint;
      return m;
    }
  }
  bad("unreachable model kind");
}

TrainedModel load_model(std::istream& in, const FeatureLayout& expected) {
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return load_model(std::string_view(bytes), expected);
}

}  // namespace malbehave
