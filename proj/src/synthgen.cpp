#include "malbehave/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>
#include <type_traits>

#include "json.hpp"
#include "malbehave/error.hpp"
#include "malbehave/features.hpp"
#include "malbehave/rng.hpp"

namespace malbehave {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

template <typename Values, typename Categories>
struct MixField {
  std::string_view name;
  Values& values;
  const Categories& categories;
};
template <typename Values, typename Categories>
MixField(std::string_view, Values&, const Categories&) -> MixField<Values, Categories>;

// Visits every tunable field of a profile in file order. The visitor is
// called with (name, double&), (name, Range&, is_size) or a MixField.
template <typename Profile, typename Visitor>
void for_each_field(Profile& p, Visitor&& visit) {
  visit("dormant_fraction", p.dormant_fraction);
  visit("files_created", p.files_created, false);
  visit("files_modified", p.files_modified, false);
  visit("files_deleted", p.files_deleted, false);
  visit(MixField{"path_mix", p.path_mix, kPathGroups});
  visit(MixField{"extension_mix", p.extension_mix, kExtensions});
  visit("file_size", p.file_size, true);
  visit("keys_created", p.keys_created, false);
  visit("keys_modified", p.keys_modified, false);
  visit("keys_deleted", p.keys_deleted, false);
  visit(MixField{"value_type_mix", p.value_type_mix, kValueTypeNames});
  visit("flows", p.flows, false);
  visit("dest_ips", p.dest_ips, false);
  visit(MixField{"protocol_mix", p.protocol_mix, kProtocolNames});
  visit(MixField{"port_mix", p.port_mix, kPortChoices});
  visit("http_requests", p.http_requests, false);
  visit(MixField{"method_mix", p.method_mix, kMethodNames});
  visit(MixField{"response_mix", p.response_mix, kResponseClasses});
  visit("request_size", p.request_size, true);
  visit("response_size", p.response_size, true);
  visit("dns_queries", p.dns_queries, false);
  visit(MixField{"record_mix", p.record_mix, kRecordNames});
}

// Overload-set helper for std::visit-style lambdas.
template <typename... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <typename... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

BehaviorProfile make_zeus_like() {
  BehaviorProfile p;
  p.name = "zeus_like";
  p.dormant_fraction = 0.03;
  p.files_created = {1, 5};
  p.files_modified = {0, 3};
  p.files_deleted = {0, 3};
  //            appdata temp  sys32 windows pfiles startup other
  p.path_mix = {0.60, 0.12, 0.00, 0.00, 0.00, 0.08, 0.20};
  //                 exe   dll   dat   tmp   txt   log   ini   bin   cfg   none
  p.extension_mix = {0.35, 0.00, 0.30, 0.10, 0.00, 0.00, 0.00, 0.15, 0.00, 0.10};
  p.file_size = {8000, 600000};
  p.keys_created = {1, 5};
  p.keys_modified = {0, 4};
  p.keys_deleted = {0, 2};
  //                  sz    dword binary expand multi
  p.value_type_mix = {0.25, 0.15, 0.60, 0.00, 0.00};
  p.flows = {4, 16};
  p.dest_ips = {1, 4};
  p.protocol_mix = {0.90, 0.10, 0.00};
  //            21    22    23    25    53    80    110   123   135   139
  p.port_mix = {0.00, 0.00, 0.00, 0.00, 0.10, 0.36, 0.00, 0.00, 0.00, 0.00,
  //            143   443   445   465   587   993   995   8080  other
                0.00, 0.32, 0.00, 0.00, 0.00, 0.00, 0.00, 0.08, 0.14};
  p.http_requests = {2, 12};
  p.method_mix = {0.60, 0.40, 0.00, 0.00};
  p.response_mix = {0.80, 0.00, 0.10, 0.00, 0.10};
  p.request_size = {200, 30000};
  p.response_size = {100, 300000};
  p.dns_queries = {0, 5};
  //              A     MX    NS    PTR   SOA   CNAME OTHER
  p.record_mix = {0.80, 0.00, 0.05, 0.00, 0.00, 0.15, 0.00};
  return p;
}

BehaviorProfile make_generic() {
  BehaviorProfile p;
  p.name = "generic";
  p.dormant_fraction = 0.04;
  p.files_created = {0, 4};
  p.files_modified = {1, 4};
  p.files_deleted = {0, 3};
  p.path_mix = {0.00, 0.30, 0.20, 0.15, 0.15, 0.00, 0.20};
  p.extension_mix = {0.15, 0.20, 0.00, 0.15, 0.15, 0.15, 0.10, 0.00, 0.10, 0.00};
  p.file_size = {500, 40000};
  p.keys_created = {0, 4};
  p.keys_modified = {2, 7};
  p.keys_deleted = {0, 2};
  p.value_type_mix = {0.45, 0.35, 0.00, 0.12, 0.08};
  p.flows = {2, 14};
  p.dest_ips = {2, 7};
  p.protocol_mix = {0.70, 0.25, 0.05};
  p.port_mix = {0.00, 0.00, 0.00, 0.10, 0.22, 0.22, 0.00, 0.08, 0.06, 0.06,
                0.00, 0.16, 0.10, 0.00, 0.00, 0.00, 0.00, 0.00, 0.00};
  p.http_requests = {0, 8};
  p.method_mix = {0.00, 0.80, 0.10, 0.10};
  p.response_mix = {0.55, 0.15, 0.15, 0.05, 0.10};
  p.request_size = {100, 4000};
  p.response_size = {200, 2000000};
  p.dns_queries = {2, 9};
  p.record_mix = {0.40, 0.15, 0.10, 0.15, 0.10, 0.10, 0.00};
  return p;
}

template <std::size_t N>
std::size_t pick(Rng& rng, const Mix<N>& mix) {
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < N; ++i) {
    if (mix[i] <= 0.0) continue;
    acc += mix[i];
    last = i;
    if (u < acc) return i;
  }
  return last;
}

std::uint64_t draw_count(Rng& rng, const Range& r) {
  const double x = rng.uniform(r.min, r.max);
  return static_cast<std::uint64_t>(std::floor(x + rng.uniform()));
}

std::uint64_t draw_size(Rng& rng, const Range& r) {
  const double lo = std::log(r.min);
  const double hi = std::log(r.max);
  return static_cast<std::uint64_t>(std::llround(std::exp(rng.uniform(lo, hi))));
}

std::string random_word(Rng& rng, int min_len, int max_len) {
  const auto len = rng.between(min_len, max_len);
  std::string s;
  for (std::int64_t i = 0; i < len; ++i) s.push_back(static_cast<char>('a' + rng.below(26)));
  return s;
}

std::string random_path(Rng& rng, std::size_t group, std::string_view ext) {
  const std::string user = "user" + std::to_string(rng.below(8));
  std::string dir;
  switch (group) {
    case 0: dir = "C:\\Users\\" + user + "\\AppData\\Roaming\\" + random_word(rng, 4, 9); break;
    case 1: dir = "C:\\Users\\" + user + "\\AppData\\Local\\Temp"; break;
    case 2: dir = "C:\\Windows\\System32"; break;
    case 3: dir = "C:\\Windows"; break;
    case 4: dir = "C:\\Program Files\\" + random_word(rng, 4, 10); break;
    case 5:
      dir = "C:\\Users\\" + user + "\\AppData\\Roaming\\Microsoft\\Windows\\Start Menu\\Programs\\Startup";
      break;
    default: dir = "C:\\" + random_word(rng, 3, 8); break;
  }
  std::string name = random_word(rng, 3, 10);
  if (ext != "none") name += "." + std::string(ext);
  return dir + "\\" + name;
}

std::string random_ip(Rng& rng) {
  std::string ip;
  for (int octet = 0; octet < 4; ++octet) {
    if (octet > 0) ip.push_back('.');
    ip += std::to_string(rng.between(1, 254));
  }
  return ip;
}

std::int32_t random_unlisted_port(Rng& rng) {
  for (;;) {
    const auto port = static_cast<std::int32_t>(rng.between(1024, 65535));
    if (!default_layout().port_slot(port)) return port;
  }
}

constexpr std::array<std::int32_t, 4> kCodeOffsets{0, 1, 2, 4};

template <std::size_t N>
void check_mix(std::vector<std::string>& out, std::string_view name, const Mix<N>& mix) {
  double sum = 0.0;
  for (double v : mix) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      out.push_back(std::string(name) + ": probabilities must be finite and non-negative");
      return;
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    out.push_back(std::string(name) + ": probabilities sum to " + std::to_string(sum));
  }
}

}  // namespace

const BehaviorProfile& zeus_like_profile() {
  static const BehaviorProfile p = make_zeus_like();
  return p;
}

const BehaviorProfile& generic_profile() {
  static const BehaviorProfile p = make_generic();
  return p;
}

std::vector<std::string> validate_profile(const BehaviorProfile& profile) {
  std::vector<std::string> out;
  for_each_field(profile, Overloaded{
      [&](std::string_view name, const double& v) {
        if (!(v >= 0.0 && v <= 1.0)) out.push_back(std::string(name) + ": outside [0, 1]");
      },
      [&](std::string_view name, const Range& r, bool is_size) {
        if (!std::isfinite(r.min) || !std::isfinite(r.max) || r.min < 0.0 ||
            r.min > r.max) {
          out.push_back(std::string(name) + ": need 0 <= min <= max");
        } else if (is_size && r.min < 1.0) {
          out.push_back(std::string(name) + ": size ranges start at 1 byte");
        }
      },
      [&](auto mix) { check_mix(out, mix.name, mix.values); },
  });
  return out;
}

BehaviorProfile interpolate(const BehaviorProfile& from, const BehaviorProfile& to, double t) {
  BehaviorProfile out = from;
  std::vector<double*> dst;
  std::vector<double> src;
  auto collect_dst = Overloaded{
      [&](std::string_view, double& v) { dst.push_back(&v); },
      [&](std::string_view, Range& r, bool) {
        dst.push_back(&r.min);
        dst.push_back(&r.max);
      },
      [&](auto mix) {
        for (double& v : mix.values) dst.push_back(&v);
      },
  };
  auto collect_src = Overloaded{
      [&](std::string_view, const double& v) { src.push_back(v); },
      [&](std::string_view, const Range& r, bool) {
        src.push_back(r.min);
        src.push_back(r.max);
      },
      [&](auto mix) {
        for (double v : mix.values) src.push_back(v);
      },
  };
  for_each_field(out, collect_dst);
  for_each_field(to, collect_src);
  for (std::size_t i = 0; i < dst.size(); ++i) *dst[i] = (1.0 - t) * *dst[i] + t * src[i];
  out.name = from.name + "~" + to.name;
  return out;
}

BehaviorProfile read_profile(std::istream& in) {
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw DatasetError("profile: not a JSON object");
  BehaviorProfile p;
  auto number = [](const json& v, std::string_view what) {
    if (!v.is_number()) throw DatasetError("profile: " + std::string(what) + " must be a number");
    return v.get<double>();
  };
  auto field = [&doc](std::string_view name) -> const json& {
    auto it = doc.find(std::string(name));
    if (it == doc.end()) throw DatasetError("profile: missing '" + std::string(name) + "'");
    return *it;
  };

  std::size_t known = 1;  // "name"
  if (!field("name").is_string()) throw DatasetError("profile: name must be a string");
  p.name = field("name").get<std::string>();
  for_each_field(p, Overloaded{
      [&](std::string_view name, double& v) {
        v = number(field(name), name);
        ++known;
      },
      [&](std::string_view name, Range& r, bool) {
        const json& v = field(name);
        if (!v.is_array() || v.size() != 2) {
          throw DatasetError("profile: " + std::string(name) + " must be [min, max]");
        }
        r = {number(v[0], name), number(v[1], name)};
        ++known;
      },
      [&](auto mix) {
        const json& v = field(mix.name);
        if (!v.is_object() || v.size() != mix.values.size()) {
          throw DatasetError("profile: " + std::string(mix.name) +
                             " must map every category to a probability");
        }
        for (std::size_t i = 0; i < mix.values.size(); ++i) {
          auto it = v.find(std::string(mix.categories[i]));
          if (it == v.end()) {
            throw DatasetError("profile: " + std::string(mix.name) + " lacks '" +
                               std::string(mix.categories[i]) + "'");
          }
          mix.values[i] = number(*it, mix.name);
        }
        ++known;
      },
  });
  if (doc.size() != known) throw DatasetError("profile: unknown fields present");
  if (auto problems = validate_profile(p); !problems.empty()) {
    throw DatasetError("profile '" + p.name + "': " + problems.front());
  }
  return p;
}

BehaviorProfile read_profile_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open profile '" + path + "'");
  return read_profile(in);
}

std::string write_profile(const BehaviorProfile& profile) {
  ordered_json doc;
  doc["name"] = profile.name;
  for_each_field(profile, Overloaded{
      [&](std::string_view name, const double& v) { doc[std::string(name)] = v; },
      [&](std::string_view name, const Range& r, bool) {
        doc[std::string(name)] = {r.min, r.max};
      },
      [&](auto mix) {
        ordered_json obj;
        for (std::size_t i = 0; i < mix.values.size(); ++i) {
          obj[std::string(mix.categories[i])] = mix.values[i];
        }
        doc[std::string(mix.name)] = obj;
      },
  });
  // One field per line keeps profile diffs readable.
  std::string out = "{\n";
  std::size_t i = 0;
  for (const auto& [key, value] : doc.items()) {
    out += "  " + json(key).dump() + ": " + value.dump() + (++i < doc.size() ? ",\n" : "\n");
  }
  return out + "}\n";
}

SampleRun generate_one(const GenSpec& spec, Label label, std::size_t index) {
  const std::uint64_t class_bit = label == Label::Target ? 0 : 1;
  Rng rng(mix64(spec.seed ^ mix64(2 * static_cast<std::uint64_t>(index) + class_bit)));
  const BehaviorProfile p = label == Label::Target
                                ? spec.target
                                : interpolate(spec.target, spec.nontarget, spec.separation);

  SampleRun run;
  run.sample_id = "s" + std::to_string(spec.seed) + (label == Label::Target ? "-t" : "-n") +
                  std::to_string(index);
  run.label = label;
  const bool dormant = rng.uniform() < p.dormant_fraction;

  auto add_files = [&](FileAction action, const Range& count) {
    for (std::uint64_t i = draw_count(rng, count); i > 0; --i) {
      const auto group = pick(rng, p.path_mix);
      const auto ext = kExtensions[pick(rng, p.extension_mix)];
      std::optional<std::uint64_t> size;
      if (action != FileAction::Deleted) size = draw_size(rng, p.file_size);
      run.file_events.push_back(make_file_event(action, random_path(rng, group, ext), size));
    }
  };
  add_files(FileAction::Created, p.files_created);
  add_files(FileAction::Modified, p.files_modified);
  add_files(FileAction::Deleted, p.files_deleted);
  if (dormant) return run;

  auto add_keys = [&](RegistryAction action, const Range& count) {
    for (std::uint64_t i = draw_count(rng, count); i > 0; --i) {
      RegistryEvent ev;
      ev.action = action;
      ev.key_path = "HKCU\\Software\\Microsoft\\" + random_word(rng, 5, 12);
      if (action != RegistryAction::KeyDeleted) {
        ev.value_type = static_cast<RegValueType>(pick(rng, p.value_type_mix));
      }
      run.registry_events.push_back(std::move(ev));
    }
  };
  add_keys(RegistryAction::KeyCreated, p.keys_created);
  add_keys(RegistryAction::KeyModified, p.keys_modified);
  add_keys(RegistryAction::KeyDeleted, p.keys_deleted);

  const auto n_flows = draw_count(rng, p.flows);
  if (n_flows > 0) {
    const auto pool_size = std::max<std::uint64_t>(1, draw_count(rng, p.dest_ips));
    std::vector<std::string> pool;
    for (std::uint64_t i = 0; i < pool_size; ++i) pool.push_back(random_ip(rng));
    for (std::uint64_t i = 0; i < n_flows; ++i) {
      NetworkFlow flow;
      flow.protocol = static_cast<Protocol>(pick(rng, p.protocol_mix));
      flow.dest_ip = pool[rng.below(pool.size())];
      if (flow.protocol == Protocol::Raw) {
        flow.dest_port = 0;
      } else {
        const auto choice = pick(rng, p.port_mix);
        flow.dest_port = choice < kDefaultPorts.size() ? kDefaultPorts[choice]
                                                       : random_unlisted_port(rng);
      }
      run.flows.push_back(std::move(flow));
    }
  }

  for (std::uint64_t i = draw_count(rng, p.http_requests); i > 0; --i) {
    HttpTransaction tx;
    tx.method = static_cast<HttpMethod>(pick(rng, p.method_mix));
    tx.request_size_bytes = draw_size(rng, p.request_size);
    const auto response = pick(rng, p.response_mix);
    if (response < 4) {
      tx.response_code = static_cast<std::int32_t>(100 * (response + 2)) +
                         kCodeOffsets[rng.below(kCodeOffsets.size())];
      tx.response_size_bytes = draw_size(rng, p.response_size);
    }
    run.http.push_back(tx);
  }

  for (std::uint64_t i = draw_count(rng, p.dns_queries); i > 0; --i) {
    DnsQuery q;
    q.record_type = static_cast<DnsRecordType>(pick(rng, p.record_mix));
    q.qname = random_word(rng, 4, 12) + (rng.below(2) == 0 ? ".com" : ".net");
    run.dns.push_back(std::move(q));
  }
  return run;
}

std::vector<SampleRun> generate(const GenSpec& spec) {
  if (!(spec.separation >= 0.0 && spec.separation <= 1.0)) {
    throw DatasetError("separation must lie in [0, 1]");
  }
  for (const auto* profile : {&spec.target, &spec.nontarget}) {
    if (auto problems = validate_profile(*profile); !problems.empty()) {
      throw DatasetError("profile '" + profile->name + "': " + problems.front());
    }
  }
  std::vector<SampleRun> runs;
  runs.reserve(spec.n_target + spec.n_nontarget);
  for (std::size_t i = 0; i < spec.n_target; ++i) runs.push_back(generate_one(spec, Label::Target, i));
  for (std::size_t i = 0; i < spec.n_nontarget; ++i) {
    runs.push_back(generate_one(spec, Label::NonTarget, i));
  }
  return runs;
}

std::string emit_log(const std::vector<SampleRun>& runs) { return to_artifact_log(runs); }

}  // namespace malbehave
