#include "malbehave/features.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string_view>

#include "malbehave/error.hpp"

namespace malbehave {
namespace {

constexpr std::array<std::string_view, 14> kFileNames{
    "files_created",  "files_modified",  "files_deleted",     "file_size_q1", "file_size_q2",
    "file_size_q3",   "file_size_q4",    "unique_extensions", "path_appdata", "path_temp",
    "path_system32",  "path_windows",    "path_program_files", "path_startup"};

constexpr std::array<std::string_view, 8> kRegistryNames{
    "keys_created",   "keys_modified",   "keys_deleted",      "regtype_sz",
    "regtype_dword",  "regtype_binary",  "regtype_expand_sz", "regtype_multi_sz"};

constexpr std::array<std::string_view, 24> kNetworkTailNames{
    "flows_tcp",    "flows_udp",    "flows_raw",    "http_post",     "http_get",
    "http_head",    "resp_2xx",     "resp_3xx",     "resp_4xx",      "resp_5xx",
    "req_size_q1",  "req_size_q2",  "req_size_q3",  "req_size_q4",   "reply_size_q1",
    "reply_size_q2", "reply_size_q3", "reply_size_q4", "dns_a",      "dns_mx",
    "dns_ns",       "dns_ptr",      "dns_soa",      "dns_cname"};

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t hash = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string lower_backslashed(std::string_view path) {
  std::string out(path);
  for (char& c : out) {
    c = c == '/' ? '\\' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

bool starts_with_dir(std::string_view path, std::string_view prefix) {
  return path.size() >= prefix.size() && path.substr(0, prefix.size()) == prefix &&
         (path.size() == prefix.size() || path[prefix.size()] == '\\');
}

// Length of `drive:\<root>\<user>\<tail>` if `path` matches it, 0 otherwise.
std::size_t match_user_dir(std::string_view path, std::string_view root, std::string_view tail) {
  if (path.size() < 3 || !std::isalpha(static_cast<unsigned char>(path[0])) || path[1] != ':' ||
      path[2] != '\\') {
    return 0;
  }
  std::string_view rest = path.substr(3);
  if (!starts_with_dir(rest, root) || rest.size() == root.size()) return 0;
  rest = rest.substr(root.size() + 1);
  auto user_end = rest.find('\\');
  if (user_end == 0 || user_end == std::string_view::npos) return 0;
  std::string_view after_user = rest.substr(user_end + 1);
  if (!starts_with_dir(after_user, tail)) return 0;
  return path.size() - after_user.size() + tail.size();
}

std::size_t match_drive_dir(std::string_view path, std::string_view dir) {
  if (path.size() < 3 || !std::isalpha(static_cast<unsigned char>(path[0])) || path[1] != ':' ||
      path[2] != '\\') {
    return 0;
  }
  return starts_with_dir(path.substr(3), dir) ? 3 + dir.size() : 0;
}

// Rewrites concrete Windows locations into %ENV% tokens so that the
// common-path groups can be matched by prefix.
std::string normalize_path(std::string_view raw) {
  std::string path = lower_backslashed(raw);

  struct Rewrite {
    std::size_t length;
    std::string_view token;
  };
  auto rewrite_first = [&path](std::initializer_list<Rewrite> candidates) {
    for (const auto& c : candidates) {
      if (c.length > 0) {
        path = std::string(c.token) + path.substr(c.length);
        return true;
      }
    }
    return false;
  };

  auto env = [&path](std::string_view token) {
    return starts_with_dir(path, token) ? token.size() : std::size_t{0};
  };

  rewrite_first({
      {match_user_dir(path, "users", "appdata\\roaming"), "%appdata%"},
      {match_user_dir(path, "documents and settings", "application data"), "%appdata%"},
      {match_user_dir(path, "users", "appdata\\local\\temp"), "%temp%"},
      {match_user_dir(path, "documents and settings", "local settings\\temp"), "%temp%"},
      {env("%localappdata%\\temp"), "%temp%"},
      {env("%tmp%"), "%temp%"},
      {match_drive_dir(path, "windows"), "%windir%"},
      {env("%systemroot%"), "%windir%"},
      {match_drive_dir(path, "program files (x86)"), "%programfiles%"},
      {match_drive_dir(path, "program files"), "%programfiles%"},
      {env("%programfiles(x86)%"), "%programfiles%"},
      {match_drive_dir(path, "programdata"), "%programdata%"},
  });
  return path;
}

std::string format_value(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else if (c != '\r') {
      cell.push_back(c);
    }
  }
  cells.push_back(std::move(cell));
  return cells;
}

}  // namespace

FeatureLayout::FeatureLayout(const PortList& ports) : ports_(ports) {
  std::set<std::uint16_t> distinct(ports.begin(), ports.end());
  if (distinct.size() != ports.size()) throw DatasetError("monitored port list contains duplicates");

  std::size_t i = 0;
  for (auto n : kFileNames) names_[i++] = std::string(n);
  for (auto n : kRegistryNames) names_[i++] = std::string(n);
  names_[i++] = "unique_dest_ips";
  for (auto p : ports_) names_[i++] = "port_" + std::to_string(p);
  for (auto n : kNetworkTailNames) names_[i++] = std::string(n);

  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t k = 0; k < kFeatureCount; ++k) {
    if (k > 0) h = fnv1a("\n", h);
    h = fnv1a(names_[k], h);
  }
  fingerprint_ = h;
}

FeatureClass FeatureLayout::feature_class(std::size_t index) {
  if (index >= kFeatureCount) throw DatasetError("feature index out of range");
  if (index < slot::kRegistryBegin) return FeatureClass::FileSystem;
  if (index < slot::kNetworkBegin) return FeatureClass::Registry;
  return FeatureClass::Network;
}

std::string FeatureLayout::fingerprint_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fingerprint_));
  return buf;
}

std::optional<std::size_t> FeatureLayout::port_slot(std::int32_t port) const {
  for (std::size_t i = 0; i < ports_.size(); ++i) {
    if (ports_[i] == port) return slot::kPort0 + i;
  }
  return std::nullopt;
}

FeatureLayout FeatureLayout::from_names(std::span<const std::string> names) {
  if (names.size() != kFeatureCount) {
    throw DatasetError("expected " + std::to_string(kFeatureCount) + " feature columns, got " +
                       std::to_string(names.size()));
  }
  PortList ports{};
  for (std::size_t i = 0; i < kPortSlots; ++i) {
    const std::string& name = names[slot::kPort0 + i];
    unsigned value = 0;
    auto [ptr, ec] = std::from_chars(name.data() + std::min<std::size_t>(5, name.size()),
                                     name.data() + name.size(), value);
    if (name.rfind("port_", 0) != 0 || ec != std::errc{} || ptr != name.data() + name.size() ||
        value > 65535) {
      throw DatasetError("column " + std::to_string(slot::kPort0 + i) + " '" + name +
                         "' is not a port column");
    }
    ports[i] = static_cast<std::uint16_t>(value);
  }
  FeatureLayout layout(ports);
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (layout.names_[i] != names[i]) {
      throw DatasetError("column " + std::to_string(i) + " is '" + names[i] + "', expected '" +
                         layout.names_[i] + "'");
    }
  }
  return layout;
}

const FeatureLayout& default_layout() {
  static const FeatureLayout layout;
  return layout;
}

std::size_t Dataset::count(Label label) const {
  return static_cast<std::size_t>(std::count_if(
      rows.begin(), rows.end(), [label](const FeatureVector& r) { return r.label == label; }));
}

std::array<std::uint64_t, 4> quartile_counts(std::span<const std::uint64_t> sizes) {
  std::array<std::uint64_t, 4> bins{};
  if (sizes.empty()) return bins;
  const unsigned __int128 max = *std::max_element(sizes.begin(), sizes.end());
  for (std::uint64_t s : sizes) {
    const unsigned __int128 scaled = static_cast<unsigned __int128>(s) * 4;
    if (scaled <= max) {
      ++bins[0];
    } else if (scaled <= 2 * max) {
      ++bins[1];
    } else if (scaled <= 3 * max) {
      ++bins[2];
    } else {
      ++bins[3];
    }
  }
  return bins;
}

std::array<bool, 6> common_path_groups(std::string_view path) {
  const std::string p = normalize_path(path);
  constexpr std::string_view kStartupTail = "\\microsoft\\windows\\start menu\\programs\\startup";
  return {
      starts_with_dir(p, "%appdata%"),
      starts_with_dir(p, "%temp%"),
      starts_with_dir(p, "%windir%\\system32"),
      starts_with_dir(p, "%windir%"),
      starts_with_dir(p, "%programfiles%"),
      starts_with_dir(p, std::string("%appdata%").append(kStartupTail)) ||
          starts_with_dir(p, std::string("%programdata%").append(kStartupTail)),
  };
}

FeatureVector extract_features(const SampleRun& run, const FeatureLayout& layout) {
  FeatureVector fv;
  fv.sample_id = run.sample_id;
  fv.label = run.label;
  fv.layout_fingerprint = layout.fingerprint();
  auto& v = fv.values;

  std::vector<std::uint64_t> sizes;
  std::set<std::string> extensions;
  for (const auto& ev : run.file_events) {
    switch (ev.action) {
      case FileAction::Created: v[slot::kFilesCreated] += 1; break;
      case FileAction::Modified: v[slot::kFilesModified] += 1; break;
      case FileAction::Deleted: v[slot::kFilesDeleted] += 1; break;
    }
    if (ev.size_bytes && ev.action != FileAction::Deleted) sizes.push_back(*ev.size_bytes);
    if (!ev.extension.empty()) extensions.insert(ev.extension);
    auto groups = common_path_groups(ev.path);
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (groups[g]) v[slot::kPathAppData + g] += 1;
    }
  }
  auto fq = quartile_counts(sizes);
  for (std::size_t q = 0; q < 4; ++q) v[slot::kFileSizeQ1 + q] = static_cast<double>(fq[q]);
  v[slot::kUniqueExtensions] = static_cast<double>(extensions.size());

  for (const auto& ev : run.registry_events) {
    switch (ev.action) {
      case RegistryAction::KeyCreated: v[slot::kKeysCreated] += 1; break;
      case RegistryAction::KeyModified: v[slot::kKeysModified] += 1; break;
      case RegistryAction::KeyDeleted: v[slot::kKeysDeleted] += 1; break;
    }
    if (ev.value_type) v[slot::kRegTypeSz + static_cast<std::size_t>(*ev.value_type)] += 1;
  }

  std::set<std::string_view> ips;
  for (const auto& flow : run.flows) {
    ips.insert(flow.dest_ip);
    if (auto s = layout.port_slot(flow.dest_port)) v[*s] += 1;
    v[slot::kFlowsTcp + static_cast<std::size_t>(flow.protocol)] += 1;
  }
  v[slot::kUniqueDestIps] = static_cast<double>(ips.size());

  std::vector<std::uint64_t> request_sizes;
  std::vector<std::uint64_t> reply_sizes;
  for (const auto& tx : run.http) {
    if (tx.method != HttpMethod::Other) v[slot::kHttpPost + static_cast<std::size_t>(tx.method)] += 1;
    request_sizes.push_back(tx.request_size_bytes);
    if (tx.response_code) {
      int cls = *tx.response_code / 100;
      if (cls >= 2 && cls <= 5) v[slot::kResp2xx + static_cast<std::size_t>(cls - 2)] += 1;
    }
    if (tx.response_size_bytes) reply_sizes.push_back(*tx.response_size_bytes);
  }
  auto rq = quartile_counts(request_sizes);
  auto rp = quartile_counts(reply_sizes);
  for (std::size_t q = 0; q < 4; ++q) {
    v[slot::kRequestSizeQ1 + q] = static_cast<double>(rq[q]);
    v[slot::kReplySizeQ1 + q] = static_cast<double>(rp[q]);
  }

  for (const auto& q : run.dns) {
    if (q.record_type != DnsRecordType::Other) {
      v[slot::kDnsA + static_cast<std::size_t>(q.record_type)] += 1;
    }
  }
  return fv;
}

Dataset build_dataset(const std::vector<SampleRun>& runs, DatasetPurpose purpose,
                      const FeatureLayout& layout) {
  Dataset data;
  data.layout_fingerprint = layout.fingerprint();
  data.rows.reserve(runs.size());
  for (const auto& run : runs) {
    if (!run.label) throw DatasetError("sample '" + run.sample_id + "' has no label");
    data.rows.push_back(extract_features(run, layout));
  }
  if (purpose == DatasetPurpose::Training) require_trainable(data);
  return data;
}

void require_trainable(const Dataset& data) {
  for (const auto& row : data.rows) {
    if (!row.label) throw DatasetError("sample '" + row.sample_id + "' has no label");
  }
  const auto targets = data.count(Label::Target);
  const auto others = data.count(Label::NonTarget);
  if (targets == 0 || others == 0) {
    throw DatasetError("training data needs both classes (target=" + std::to_string(targets) +
                       ", nontarget=" + std::to_string(others) + ")");
  }
}

void write_feature_matrix(std::ostream& out, const Dataset& data, const FeatureLayout& layout) {
  for (const auto& name : layout.names()) out << name << ',';
  out << "sample_id,label\n";
  for (const auto& row : data.rows) {
    if (row.layout_fingerprint != layout.fingerprint()) {
      throw LayoutMismatch("row '" + row.sample_id + "' was extracted with a different layout");
    }
    if (row.sample_id.find_first_of(",\n\r\"") != std::string::npos) {
      throw DatasetError("sample_id '" + row.sample_id + "' cannot be written to CSV");
    }
    for (double v : row.values) out << format_value(v) << ',';
    out << row.sample_id << ',' << (row.label ? to_string(*row.label) : "") << '\n';
  }
}

Dataset read_feature_matrix(std::istream& in, FeatureLayout* layout_out) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "missing header");
  auto header = split_csv_line(line);
  if (header.size() != kFeatureCount + 2 || header[kFeatureCount] != "sample_id" ||
      header[kFeatureCount + 1] != "label") {
    throw ParseError(1, "header must list 65 feature names followed by sample_id,label");
  }
  FeatureLayout layout = [&] {
    try {
      return FeatureLayout::from_names(std::span(header).first(kFeatureCount));
    } catch (const DatasetError& e) {
      throw ParseError(1, e.what());
    }
  }();

  Dataset data;
  data.layout_fingerprint = layout.fingerprint();
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    if (cells.size() != kFeatureCount + 2) {
      throw ParseError(line_no, "expected " + std::to_string(kFeatureCount + 2) + " cells, got " +
                                    std::to_string(cells.size()));
    }
    FeatureVector row;
    row.layout_fingerprint = layout.fingerprint();
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      const std::string& cell = cells[i];
      double value = 0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(value)) {
        throw ParseError(line_no, "column '" + header[i] + "' holds '" + cell + "'");
      }
      row.values[i] = value;
    }
    row.sample_id = cells[kFeatureCount];
    if (row.sample_id.empty()) throw ParseError(line_no, "empty sample_id");
    const std::string& label = cells[kFeatureCount + 1];
    if (!label.empty()) {
      row.label = label_from_string(label);
      if (!row.label) throw ParseError(line_no, "unknown label '" + label + "'");
    }
    data.rows.push_back(std::move(row));
  }
  if (layout_out != nullptr) *layout_out = layout;
  return data;
}

}  // namespace malbehave
