#include "malbehave/artifacts.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "malbehave/error.hpp"

namespace malbehave {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

template <typename E>
struct EnumName {
  E value;
  std::string_view name;
};

constexpr std::array<EnumName<FileAction>, 3> kFileActions{{
    {FileAction::Created, "created"},
    {FileAction::Modified, "modified"},
    {FileAction::Deleted, "deleted"},
}};

constexpr std::array<EnumName<RegistryAction>, 3> kRegistryActions{{
    {RegistryAction::KeyCreated, "key_created"},
    {RegistryAction::KeyModified, "key_modified"},
    {RegistryAction::KeyDeleted, "key_deleted"},
}};

constexpr std::array<EnumName<RegValueType>, 5> kValueTypes{{
    {RegValueType::RegSz, "REG_SZ"},
    {RegValueType::RegDword, "REG_DWORD"},
    {RegValueType::RegBinary, "REG_BINARY"},
    {RegValueType::RegExpandSz, "REG_EXPAND_SZ"},
    {RegValueType::RegMultiSz, "REG_MULTI_SZ"},
}};

constexpr std::array<EnumName<Protocol>, 3> kProtocols{{
    {Protocol::Tcp, "tcp"},
    {Protocol::Udp, "udp"},
    {Protocol::Raw, "raw"},
}};

constexpr std::array<EnumName<HttpMethod>, 4> kMethods{{
    {HttpMethod::Post, "POST"},
    {HttpMethod::Get, "GET"},
    {HttpMethod::Head, "HEAD"},
    {HttpMethod::Other, "OTHER"},
}};

constexpr std::array<EnumName<DnsRecordType>, 7> kRecordTypes{{
    {DnsRecordType::A, "A"},
    {DnsRecordType::Mx, "MX"},
    {DnsRecordType::Ns, "NS"},
    {DnsRecordType::Ptr, "PTR"},
    {DnsRecordType::Soa, "SOA"},
    {DnsRecordType::Cname, "CNAME"},
    {DnsRecordType::Other, "OTHER"},
}};

template <typename E, std::size_t N>
std::string_view name_of(const std::array<EnumName<E>, N>& table, E value) {
  for (const auto& entry : table) {
    if (entry.value == value) return entry.name;
  }
  return "?";
}

// Per-line reader that turns every structural problem into a ParseError.
class LineReader {
 public:
  LineReader(const json& obj, std::size_t line) : obj_(obj), line_(line) {}

  [[noreturn]] void fail(const std::string& reason) const { throw ParseError(line_, reason); }

  const json* find(const char* field) const {
    auto it = obj_.find(field);
    return it == obj_.end() ? nullptr : &*it;
  }

  const json& require(const char* field) const {
    const json* v = find(field);
    if (v == nullptr) fail(std::string("missing field '") + field + "'");
    return *v;
  }

  std::string string_field(const char* field) const {
    const json& v = require(field);
    if (!v.is_string()) fail(std::string("field '") + field + "' must be a string");
    return v.get<std::string>();
  }

  std::uint64_t unsigned_field(const json& v, const char* field) const {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer()) {
      fail(std::string("field '") + field + "' must be non-negative");
    }
    fail(std::string("field '") + field + "' must be an integer");
  }

  std::uint64_t unsigned_field(const char* field) const {
    return unsigned_field(require(field), field);
  }

  std::optional<std::uint64_t> optional_unsigned(const char* field) const {
    const json* v = find(field);
    if (v == nullptr) return std::nullopt;
    return unsigned_field(*v, field);
  }

  std::int32_t int32_field(const json& v, const char* field) const {
    if (!v.is_number_integer()) fail(std::string("field '") + field + "' must be an integer");
    if (v.is_number_unsigned()) {
      auto u = v.get<std::uint64_t>();
      if (u > static_cast<std::uint64_t>(std::numeric_limits<std::int32_t>::max())) {
        fail(std::string("field '") + field + "' out of range");
      }
      return static_cast<std::int32_t>(u);
    }
    auto s = v.get<std::int64_t>();
    if (s < std::numeric_limits<std::int32_t>::min() ||
        s > std::numeric_limits<std::int32_t>::max()) {
      fail(std::string("field '") + field + "' out of range");
    }
    return static_cast<std::int32_t>(s);
  }

  template <typename E, std::size_t N>
  E enum_field(const std::array<EnumName<E>, N>& table, const json& v, const char* field) const {
    if (!v.is_string()) fail(std::string("field '") + field + "' must be a string");
    const auto& text = v.get_ref<const std::string&>();
    for (const auto& entry : table) {
      if (entry.name == text) return entry.value;
    }
    fail(std::string("unknown ") + field + " '" + text + "'");
  }

  template <typename E, std::size_t N>
  E enum_field(const std::array<EnumName<E>, N>& table, const char* field) const {
    return enum_field(table, require(field), field);
  }

  void only_fields(std::initializer_list<const char*> kind_fields) const {
    for (const auto& [key, _] : obj_.items()) {
      if (key == "sample_id" || key == "label" || key == "kind") continue;
      bool known = std::any_of(kind_fields.begin(), kind_fields.end(),
                               [&key](const char* f) { return key == f; });
      if (!known) fail("unknown field '" + key + "'");
    }
  }

 private:
  const json& obj_;
  std::size_t line_;
};

bool is_dotted_quad_syntax(std::string_view ip) {
  int parts = 0;
  std::size_t digits = 0;
  for (char c : ip) {
    if (c == '.') {
      if (digits == 0) return false;
      ++parts;
      digits = 0;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      if (++digits > 3) return false;
    } else {
      return false;
    }
  }
  return parts == 3 && digits > 0;
}

bool octets_in_range(std::string_view ip) {
  if (!is_dotted_quad_syntax(ip)) return false;
  int value = 0;
  for (char c : ip) {
    if (c == '.') {
      value = 0;
      continue;
    }
    value = value * 10 + (c - '0');
    if (value > 255) return false;
  }
  return true;
}

FileEvent read_file(const LineReader& r) {
  r.only_fields({"action", "path", "size_bytes"});
  auto action = r.enum_field(kFileActions, "action");
  return make_file_event(action, r.string_field("path"), r.optional_unsigned("size_bytes"));
}

RegistryEvent read_registry(const LineReader& r) {
  r.only_fields({"action", "key_path", "value_type"});
  RegistryEvent ev;
  ev.action = r.enum_field(kRegistryActions, "action");
  ev.key_path = r.string_field("key_path");
  if (const json* v = r.find("value_type")) ev.value_type = r.enum_field(kValueTypes, *v, "value_type");
  return ev;
}

NetworkFlow read_flow(const LineReader& r) {
  r.only_fields({"protocol", "dest_ip", "dest_port"});
  NetworkFlow flow;
  flow.protocol = r.enum_field(kProtocols, "protocol");
  flow.dest_ip = r.string_field("dest_ip");
  if (flow.dest_ip.find(':') != std::string::npos) r.fail("IPv6 destinations are not supported");
  if (!is_dotted_quad_syntax(flow.dest_ip)) r.fail("dest_ip '" + flow.dest_ip + "' is not a dotted quad");
  flow.dest_port = r.int32_field(r.require("dest_port"), "dest_port");
  return flow;
}

HttpTransaction read_http(const LineReader& r) {
  r.only_fields({"method", "request_size_bytes", "response_code", "response_size_bytes"});
  HttpTransaction tx;
  tx.method = r.enum_field(kMethods, "method");
  tx.request_size_bytes = r.unsigned_field("request_size_bytes");
  if (const json* v = r.find("response_code")) tx.response_code = r.int32_field(*v, "response_code");
  tx.response_size_bytes = r.optional_unsigned("response_size_bytes");
  return tx;
}

DnsQuery read_dns(const LineReader& r) {
  r.only_fields({"record_type", "qname"});
  DnsQuery q;
  q.record_type = r.enum_field(kRecordTypes, "record_type");
  q.qname = r.string_field("qname");
  return q;
}

void violation(std::vector<std::string>& out, const char* list, std::size_t index,
               const char* field, const std::string& what) {
  out.push_back(std::string(list) + "[" + std::to_string(index) + "]." + field + ": " + what);
}

}  // namespace

std::string_view to_string(Label label) {
  return label == Label::Target ? "target" : "nontarget";
}

std::optional<Label> label_from_string(std::string_view text) {
  if (text == "target") return Label::Target;
  if (text == "nontarget") return Label::NonTarget;
  return std::nullopt;
}

std::string extension_of(std::string_view path) {
  auto sep = path.find_last_of("\\/");
  std::string_view name = sep == std::string_view::npos ? path : path.substr(sep + 1);
  auto dot = name.rfind('.');
  if (dot == std::string_view::npos) return {};
  std::string ext(name.substr(dot + 1));
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

FileEvent make_file_event(FileAction action, std::string path,
                          std::optional<std::uint64_t> size_bytes) {
  FileEvent ev;
  ev.action = action;
  ev.extension = extension_of(path);
  ev.path = std::move(path);
  ev.size_bytes = size_bytes;
  return ev;
}

std::vector<SampleRun> parse_artifact_log(std::istream& in) {
  std::vector<SampleRun> runs;
  std::unordered_map<std::string, std::size_t> index_of;
  std::string line;
  std::size_t line_no = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

    json obj = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (obj.is_discarded()) throw ParseError(line_no, "not a valid JSON object");
    if (!obj.is_object()) throw ParseError(line_no, "record must be a JSON object");

    LineReader r(obj, line_no);
    std::string sample_id = r.string_field("sample_id");
    std::optional<Label> label;
    if (const json* v = r.find("label")) {
      if (!v->is_string()) r.fail("field 'label' must be a string");
      label = label_from_string(v->get<std::string>());
      if (!label) r.fail("unknown label '" + v->get<std::string>() + "'");
    }
    std::string kind = r.string_field("kind");

    auto [it, inserted] = index_of.try_emplace(sample_id, runs.size());
    if (inserted) {
      runs.emplace_back();
      runs.back().sample_id = sample_id;
    }
    SampleRun& run = runs[it->second];
    if (label) {
      if (run.label && *run.label != *label) {
        throw ParseError(line_no, "conflicting labels for sample '" + sample_id + "'");
      }
      run.label = label;
    }

    if (kind == "file") {
      run.file_events.push_back(read_file(r));
    } else if (kind == "registry") {
      run.registry_events.push_back(read_registry(r));
    } else if (kind == "flow") {
      run.flows.push_back(read_flow(r));
    } else if (kind == "http") {
      run.http.push_back(read_http(r));
    } else if (kind == "dns") {
      run.dns.push_back(read_dns(r));
    } else if (kind == "sample") {
      r.only_fields({});
    } else {
      r.fail("unknown kind '" + kind + "'");
    }
  }
  return runs;
}

std::vector<SampleRun> parse_artifact_log(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_artifact_log(in);
}

std::vector<std::string> validate_run(const SampleRun& run) {
  std::vector<std::string> out;
  if (run.sample_id.empty()) out.emplace_back("sample_id: empty");

  for (std::size_t i = 0; i < run.file_events.size(); ++i) {
    const auto& ev = run.file_events[i];
    if (ev.path.empty()) violation(out, "file_events", i, "path", "empty");
    if (ev.extension.find('.') != std::string::npos) {
      violation(out, "file_events", i, "extension", "contains a dot");
    }
    bool deleted = ev.action == FileAction::Deleted;
    if (deleted && ev.size_bytes) {
      violation(out, "file_events", i, "size_bytes", "present on a Deleted event");
    } else if (!deleted && !ev.size_bytes) {
      violation(out, "file_events", i, "size_bytes", "missing on a Created/Modified event");
    }
  }

  for (std::size_t i = 0; i < run.registry_events.size(); ++i) {
    const auto& ev = run.registry_events[i];
    if (ev.key_path.empty()) violation(out, "registry_events", i, "key_path", "empty");
    if (ev.action == RegistryAction::KeyDeleted && ev.value_type) {
      violation(out, "registry_events", i, "value_type", "present on a KeyDeleted event");
    }
  }

  for (std::size_t i = 0; i < run.flows.size(); ++i) {
    const auto& flow = run.flows[i];
    if (!octets_in_range(flow.dest_ip)) {
      violation(out, "flows", i, "dest_ip", "'" + flow.dest_ip + "' is not a valid IPv4 address");
    }
    if (flow.dest_port < 0 || flow.dest_port > 65535) {
      violation(out, "flows", i, "dest_port", "outside 0-65535");
    } else if (flow.dest_port == 0 && flow.protocol != Protocol::Raw) {
      violation(out, "flows", i, "dest_port", "port 0 is only valid for RAW flows");
    }
  }

  for (std::size_t i = 0; i < run.http.size(); ++i) {
    const auto& tx = run.http[i];
    if (tx.response_code && (*tx.response_code < 100 || *tx.response_code > 599)) {
      violation(out, "http", i, "response_code", "outside 100-599");
    }
    if (tx.response_code.has_value() != tx.response_size_bytes.has_value()) {
      violation(out, "http", i, "response_size_bytes",
                "must be present exactly when response_code is present");
    }
  }

  for (std::size_t i = 0; i < run.dns.size(); ++i) {
    if (run.dns[i].qname.empty()) violation(out, "dns", i, "qname", "empty");
  }
  return out;
}

void write_artifact_log(std::ostream& out, const std::vector<SampleRun>& runs) {
  for (const auto& run : runs) {
    auto record = [&run](std::string_view kind) {
      ordered_json obj;
      obj["sample_id"] = run.sample_id;
      if (run.label) obj["label"] = to_string(*run.label);
      obj["kind"] = kind;
      return obj;
    };
    auto emit = [&out](const ordered_json& obj) { out << obj.dump() << '\n'; };

    if (run.event_count() == 0) {
      emit(record("sample"));
      continue;
    }
    for (const auto& ev : run.file_events) {
      auto obj = record("file");
      obj["action"] = name_of(kFileActions, ev.action);
      obj["path"] = ev.path;
      if (ev.size_bytes) obj["size_bytes"] = *ev.size_bytes;
      emit(obj);
    }
    for (const auto& ev : run.registry_events) {
      auto obj = record("registry");
      obj["action"] = name_of(kRegistryActions, ev.action);
      obj["key_path"] = ev.key_path;
      if (ev.value_type) obj["value_type"] = name_of(kValueTypes, *ev.value_type);
      emit(obj);
    }
    for (const auto& flow : run.flows) {
      auto obj = record("flow");
      obj["protocol"] = name_of(kProtocols, flow.protocol);
      obj["dest_ip"] = flow.dest_ip;
      obj["dest_port"] = flow.dest_port;
      emit(obj);
    }
    for (const auto& tx : run.http) {
      auto obj = record("http");
      obj["method"] = name_of(kMethods, tx.method);
      obj["request_size_bytes"] = tx.request_size_bytes;
      if (tx.response_code) obj["response_code"] = *tx.response_code;
      if (tx.response_size_bytes) obj["response_size_bytes"] = *tx.response_size_bytes;
      emit(obj);
    }
    for (const auto& q : run.dns) {
      auto obj = record("dns");
      obj["record_type"] = name_of(kRecordTypes, q.record_type);
      obj["qname"] = q.qname;
      emit(obj);
    }
  }
}

std::string to_artifact_log(const std::vector<SampleRun>& runs) {
  std::ostringstream out;
  write_artifact_log(out, runs);
  return out.str();
}

}  // namespace malbehave
