/**
 * @file artifacts.hpp
 * @brief Sandbox artifact records and the line-delimited artifact log.
 *
 * A SampleRun gathers everything observed while one sample executed:
 * file system events, registry events, network flows, HTTP transactions
 * and DNS queries. Runs are read from (and written to) a log holding one
 * JSON object per line, grouped by `sample_id`.
 */
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace malbehave {

enum class Label { Target, NonTarget };

enum class FileAction { Created, Modified, Deleted };
enum class RegistryAction { KeyCreated, KeyModified, KeyDeleted };
enum class RegValueType { RegSz, RegDword, RegBinary, RegExpandSz, RegMultiSz };
enum class Protocol { Tcp, Udp, Raw };
enum class HttpMethod { Post, Get, Head, Other };
enum class DnsRecordType { A, Mx, Ns, Ptr, Soa, Cname, Other };

struct FileEvent {
  FileAction action = FileAction::Created;
  std::string path;
  /// Lowercased, dot-free; derived from `path` by extension_of().
  std::string extension;
  /// Absent for Deleted events.
  std::optional<std::uint64_t> size_bytes;

  bool operator==(const FileEvent&) const = default;
};

struct RegistryEvent {
  RegistryAction action = RegistryAction::KeyCreated;
  std::string key_path;
  std::optional<RegValueType> value_type;

  bool operator==(const RegistryEvent&) const = default;
};

struct NetworkFlow {
  Protocol protocol = Protocol::Tcp;
  std::string dest_ip;  ///< IPv4 dotted quad
  std::int32_t dest_port = 0;

  bool operator==(const NetworkFlow&) const = default;
};

struct HttpTransaction {
  HttpMethod method = HttpMethod::Get;
  std::uint64_t request_size_bytes = 0;
  std::optional<std::int32_t> response_code;
  std::optional<std::uint64_t> response_size_bytes;

  bool operator==(const HttpTransaction&) const = default;
};

struct DnsQuery {
  DnsRecordType record_type = DnsRecordType::A;
  std::string qname;

  bool operator==(const DnsQuery&) const = default;
};

struct SampleRun {
  std::string sample_id;
  std::optional<Label> label;
  std::vector<FileEvent> file_events;
  std::vector<RegistryEvent> registry_events;
  std::vector<NetworkFlow> flows;
  std::vector<HttpTransaction> http;
  std::vector<DnsQuery> dns;

  std::size_t event_count() const noexcept {
    return file_events.size() + registry_events.size() + flows.size() + http.size() +
           dns.size();
  }

  bool operator==(const SampleRun&) const = default;
};

/// Substring after the last dot of the final path component, lowercased.
/// Both `\` and `/` separate components. No dot gives an empty string.
std::string extension_of(std::string_view path);

/// Builds a FileEvent with its extension filled in from `path`.
FileEvent make_file_event(FileAction action, std::string path,
                          std::optional<std::uint64_t> size_bytes);

/**
 * Reads a line-delimited artifact log.
 *
 * Returns one SampleRun per distinct sample_id, in order of first
 * appearance, with events kept in input order. Blank lines are skipped.
 * Throws ParseError (carrying the 1-based line number) on malformed
 * records, unknown fields, IPv6 destinations, unknown enum spellings or
 * labels that disagree across one sample's lines.
 */
std::vector<SampleRun> parse_artifact_log(std::istream& in);
std::vector<SampleRun> parse_artifact_log(std::string_view text);

/// Lists every type-invariant violation in `run`. Each entry names the
/// offending field and event index, e.g. `flows[2].dest_ip: ...`.
std::vector<std::string> validate_run(const SampleRun& run);

/**
 * Writes runs in the artifact-log format, one event per line.
 *
 * Runs without any event are written as a single `"kind":"sample"`
 * marker line so that they survive a round trip through the parser.
 */
void write_artifact_log(std::ostream& out, const std::vector<SampleRun>& runs);
std::string to_artifact_log(const std::vector<SampleRun>& runs);

std::string_view to_string(Label label);
std::optional<Label> label_from_string(std::string_view text);

}  // namespace malbehave
