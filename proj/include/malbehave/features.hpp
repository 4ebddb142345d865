#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "malbehave/artifacts.hpp"

namespace malbehave {

inline constexpr std::size_t kFeatureCount = 65;
inline constexpr std::size_t kPortSlots = 18;

using FeatureValues = std::array<double, kFeatureCount>;
using PortList = std::array<std::uint16_t, kPortSlots>;

/// Slot indices of the fixed layout.
namespace slot {
inline constexpr std::size_t kFilesCreated = 0;
inline constexpr std::size_t kFilesModified = 1;
inline constexpr std::size_t kFilesDeleted = 2;
inline constexpr std::size_t kFileSizeQ1 = 3;  // Q1..Q4 at 3..6
inline constexpr std::size_t kUniqueExtensions = 7;
inline constexpr std::size_t kPathAppData = 8;
inline constexpr std::size_t kPathTemp = 9;
inline constexpr std::size_t kPathSystem32 = 10;
inline constexpr std::size_t kPathWindows = 11;
inline constexpr std::size_t kPathProgramFiles = 12;
inline constexpr std::size_t kPathStartup = 13;
inline constexpr std::size_t kKeysCreated = 14;
inline constexpr std::size_t kKeysModified = 15;
inline constexpr std::size_t kKeysDeleted = 16;
inline constexpr std::size_t kRegTypeSz = 17;  // REG_SZ..REG_MULTI_SZ at 17..21
inline constexpr std::size_t kUniqueDestIps = 22;
inline constexpr std::size_t kPort0 = 23;  // 18 port slots at 23..40
inline constexpr std::size_t kFlowsTcp = 41;
inline constexpr std::size_t kFlowsUdp = 42;
inline constexpr std::size_t kFlowsRaw = 43;
inline constexpr std::size_t kHttpPost = 44;
inline constexpr std::size_t kHttpGet = 45;
inline constexpr std::size_t kHttpHead = 46;
inline constexpr std::size_t kResp2xx = 47;  // 2xx..5xx at 47..50
inline constexpr std::size_t kRequestSizeQ1 = 51;
inline constexpr std::size_t kReplySizeQ1 = 55;
inline constexpr std::size_t kDnsA = 59;  // A, MX, NS, PTR, SOA, CNAME at 59..64

inline constexpr std::size_t kFileSystemBegin = 0;
inline constexpr std::size_t kRegistryBegin = 14;
inline constexpr std::size_t kNetworkBegin = 22;
}  // namespace slot

enum class FeatureClass { FileSystem, Registry, Network };

inline constexpr PortList kDefaultPorts{21,  22,  23,  25,  53,  80,  110, 123, 135,
                                        139, 143, 443, 445, 465, 587, 993, 995, 8080};

/**
 * Index -> (name, class) table for the 65 feature slots.
 *
 * The only configurable part is the list of 18 monitored destination
 * ports. Changing it changes slot names and therefore the fingerprint,
 * which saved models embed.
 */
class FeatureLayout {
 public:
  explicit FeatureLayout(const PortList& ports = kDefaultPorts);

  const PortList& ports() const noexcept { return ports_; }
  const std::string& name(std::size_t index) const { return names_.at(index); }
  const std::array<std::string, kFeatureCount>& names() const noexcept { return names_; }
  static FeatureClass feature_class(std::size_t index);

  /// 64-bit FNV-1a over the newline-joined slot names.
  std::uint64_t fingerprint() const noexcept { return fingerprint_; }
  std::string fingerprint_hex() const;

  /// Slot of `port` among the monitored ports, if monitored.
  std::optional<std::size_t> port_slot(std::int32_t port) const;

  /// Rebuilds a layout from 65 column names; throws DatasetError if they
  /// do not describe a valid layout.
  static FeatureLayout from_names(std::span<const std::string> names);

 private:
  PortList ports_;
  std::array<std::string, kFeatureCount> names_;
  std::uint64_t fingerprint_;
};

const FeatureLayout& default_layout();

struct FeatureVector {
  FeatureValues values{};
  std::string sample_id;
  std::optional<Label> label;
  std::uint64_t layout_fingerprint = 0;
};

struct Dataset {
  std::vector<FeatureVector> rows;
  std::uint64_t layout_fingerprint = 0;

  std::size_t size() const noexcept { return rows.size(); }
  bool empty() const noexcept { return rows.empty(); }
  std::size_t count(Label label) const;
};

/// Per-quartile counts of `sizes` relative to their maximum M: bins are
/// [0, M/4], (M/4, M/2], (M/2, 3M/4], (3M/4, M]. Bin edges are compared
/// in exact integer arithmetic.
std::array<std::uint64_t, 4> quartile_counts(std::span<const std::uint64_t> sizes);

/// Which of the six common-path groups `path` falls under, in slot order
/// (APPDATA, TEMP, system32, Windows, Program Files, Startup). Groups nest,
/// so one path may match several.
std::array<bool, 6> common_path_groups(std::string_view path);

/// Maps a validated run onto the feature layout.
FeatureVector extract_features(const SampleRun& run, const FeatureLayout& layout = default_layout());

enum class DatasetPurpose { Training, Raw };

/// Extracts every run. All runs must be labeled; a Training dataset must
/// additionally hold at least one row of each class.
Dataset build_dataset(const std::vector<SampleRun>& runs, DatasetPurpose purpose,
                      const FeatureLayout& layout = default_layout());

/// Throws DatasetError unless both classes are present and every row is labeled.
void require_trainable(const Dataset& data);

/// Feature matrix CSV: 65 slot names, then `sample_id`, `label`.
void write_feature_matrix(std::ostream& out, const Dataset& data, const FeatureLayout& layout);
Dataset read_feature_matrix(std::istream& in, FeatureLayout* layout_out = nullptr);

}  // namespace malbehave
