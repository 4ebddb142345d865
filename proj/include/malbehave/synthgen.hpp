/**
 * @file synthgen.hpp
 * @brief Seeded generator of labeled synthetic sandbox runs.
 *
 * Target samples follow a banking-trojan-like profile (executable dropped
 * under APPDATA, binary configuration blob in the registry, POST beacons to
 * ports 80/443). Non-target samples follow a generic profile pulled toward
 * the target profile as `separation` falls from 1 to 0.
 *
 * Randomness: each sample draws from its own std::mt19937_64 seeded with
 * mix64(seed ^ mix64(2 * index + class_bit)), class_bit 0 for targets and
 * 1 for non-targets, so output does not depend on generation order.
 */
#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "malbehave/artifacts.hpp"

namespace malbehave {

/// Inclusive [min, max]. Count ranges are sampled uniformly and
/// stochastically rounded; size ranges are sampled log-uniformly.
struct Range {
  double min = 0.0;
  double max = 0.0;
  bool operator==(const Range&) const = default;
};

inline constexpr std::array<std::string_view, 7> kPathGroups{
    "appdata", "temp", "system32", "windows", "program_files", "startup", "other"};
inline constexpr std::array<std::string_view, 10> kExtensions{
    "exe", "dll", "dat", "tmp", "txt", "log", "ini", "bin", "cfg", "none"};
inline constexpr std::array<std::string_view, 5> kValueTypeNames{
    "REG_SZ", "REG_DWORD", "REG_BINARY", "REG_EXPAND_SZ", "REG_MULTI_SZ"};
inline constexpr std::array<std::string_view, 3> kProtocolNames{"tcp", "udp", "raw"};
/// The monitored ports plus "other" (a random port outside the list).
inline constexpr std::array<std::string_view, 19> kPortChoices{
    "21",  "22",  "23",  "25",  "53",  "80",  "110", "123", "135", "139",
    "143", "443", "445", "465", "587", "993", "995", "8080", "other"};
inline constexpr std::array<std::string_view, 4> kMethodNames{"POST", "GET", "HEAD", "OTHER"};
inline constexpr std::array<std::string_view, 5> kResponseClasses{"2xx", "3xx", "4xx", "5xx",
                                                                  "none"};
inline constexpr std::array<std::string_view, 7> kRecordNames{"A",   "MX",    "NS",   "PTR",
                                                              "SOA", "CNAME", "OTHER"};

template <std::size_t N>
using Mix = std::array<double, N>;

struct BehaviorProfile {
  std::string name;
  /// Probability that a run shows only file activity (no registry or network).
  double dormant_fraction = 0.0;

  Range files_created, files_modified, files_deleted;
  Mix<kPathGroups.size()> path_mix{};
  Mix<kExtensions.size()> extension_mix{};
  Range file_size;

  Range keys_created, keys_modified, keys_deleted;
  Mix<kValueTypeNames.size()> value_type_mix{};

  Range flows;
  Range dest_ips;  ///< size of the per-run destination pool
  Mix<kProtocolNames.size()> protocol_mix{};
  Mix<kPortChoices.size()> port_mix{};

  Range http_requests;
  Mix<kMethodNames.size()> method_mix{};
  Mix<kResponseClasses.size()> response_mix{};
  Range request_size, response_size;

  Range dns_queries;
  Mix<kRecordNames.size()> record_mix{};

  bool operator==(const BehaviorProfile&) const = default;
};

const BehaviorProfile& zeus_like_profile();
const BehaviorProfile& generic_profile();

/// Violated profile invariants; empty when valid.
std::vector<std::string> validate_profile(const BehaviorProfile& profile);

/// (1 - t) * from + t * to for every range endpoint and mix entry.
BehaviorProfile interpolate(const BehaviorProfile& from, const BehaviorProfile& to, double t);

/// Profile files are JSON objects keyed by the BehaviorProfile field names;
/// ranges are `[min, max]`, mixes are objects keyed by category name.
BehaviorProfile read_profile(std::istream& in);
BehaviorProfile read_profile_file(const std::string& path);
std::string write_profile(const BehaviorProfile& profile);

struct GenSpec {
  std::uint64_t seed = 0;
  std::size_t n_target = 0;
  std::size_t n_nontarget = 0;
  /// 1: non-targets follow the generic profile; 0: they follow the target profile.
  double separation = 1.0;
  BehaviorProfile target = zeus_like_profile();
  BehaviorProfile nontarget = generic_profile();
};

/// Targets first (ids `s<seed>-t<index>`), then non-targets (`s<seed>-n<index>`).
std::vector<SampleRun> generate(const GenSpec& spec);

/// Generates a single run; `generate` is this function mapped over indices.
SampleRun generate_one(const GenSpec& spec, Label label, std::size_t index);

/// Artifact-log bytes for `runs`.
std::string emit_log(const std::vector<SampleRun>& runs);

}  // namespace malbehave
