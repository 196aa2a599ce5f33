#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "neuroflag/dataset/frames.hpp"
#include "neuroflag/dataset/normalization.hpp"
#include "neuroflag/dataset/windows.hpp"

// NFLG container for frame sequences and window sets. Byte layout is documented
// in docs/FORMATS.md; all integers and floats are little-endian.
namespace neuroflag::dataset {

inline constexpr char kDatasetMagic[4] = {'N', 'F', 'L', 'G'};
inline constexpr std::uint16_t kDatasetVersion = 1;

enum class DatasetKind : std::uint16_t {
  /// Raw simulation coordinates, one frame per record.
  frames = 1,
  /// Normalized windows, history_len + 1 frames per record.
  windows = 2,
};

struct ConditionEntry {
  cloth::WindCondition condition;
  double strength;
  friend bool operator==(const ConditionEntry&, const ConditionEntry&) = default;
};

struct DatasetHeader {
  DatasetKind kind = DatasetKind::windows;
  std::uint64_t record_count = 0;
  std::uint32_t frames_per_record = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::uint32_t coords = 3;
  NormalizationTransform transform;
  /// Hash of the resolved configuration that produced the file.
  std::uint64_t fingerprint = 0;
  std::vector<ConditionEntry> conditions;

  std::uint64_t record_floats() const {
    return static_cast<std::uint64_t>(frames_per_record) * rows * cols * coords;
  }
  std::uint64_t payload_floats() const { return record_count * record_floats(); }
};

struct DatasetFile {
  DatasetHeader header;
  std::vector<WindowMeta> records;
  std::vector<float> payload;
};

/// Writes header, per-record metadata and payload. Throws UsageError when sizes disagree.
void write_dataset_file(const std::string& path, const DatasetHeader& header, std::span<const WindowMeta> records,
                        std::span<const float> payload);
/// Validates magic, version, kind and payload length; FormatError (with byte offset) otherwise.
DatasetFile read_dataset_file(const std::string& path);

/// Saves `windows` (or only the records listed in `indices`, in that order).
void save_windows(const std::string& path, const WindowSet& windows, std::uint64_t fingerprint,
                  const std::vector<ConditionEntry>& conditions, std::span<const std::size_t> indices = {});
WindowSet load_windows(const std::string& path, DatasetHeader* header = nullptr);

void save_frames(const std::string& path, const FrameSequence& frames, std::uint64_t fingerprint, double strength);
FrameSequence load_frames(const std::string& path, DatasetHeader* header = nullptr);

}  // namespace neuroflag::dataset
