#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "neuroflag/dataset/frames.hpp"
#include "neuroflag/dataset/normalization.hpp"

namespace neuroflag::dataset {

/// Read-only view of one supervised sample inside a WindowSet.
struct TrajectoryWindow {
  /// history_len frames x rows x cols x 3, oldest first.
  std::span<const float> history;
  /// rows x cols x 3.
  std::span<const float> target;
  cloth::WindCondition condition;
  /// Frame index (within its run) of the first history frame.
  std::uint64_t source_step;
};

struct WindowMeta {
  cloth::WindCondition condition;
  std::uint64_t source_step;
  friend bool operator==(const WindowMeta&, const WindowMeta&) = default;
};

/// Normalized windows packed contiguously: each record is history_len + 1 frames.
class WindowSet {
 public:
  WindowSet() = default;
  WindowSet(std::size_t history_len, std::size_t rows, std::size_t cols, NormalizationTransform transform);

  /// Adopts an already packed payload; runs validate().
  static WindowSet from_packed(std::size_t history_len, std::size_t rows, std::size_t cols,
                               NormalizationTransform transform, std::vector<float> payload,
                               std::vector<WindowMeta> meta);

  std::size_t size() const { return meta_.size(); }
  bool empty() const { return meta_.empty(); }
  std::size_t history_len() const { return history_len_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t frame_floats() const { return rows_ * cols_ * kCoords; }
  std::size_t record_floats() const { return (history_len_ + 1) * frame_floats(); }
  const NormalizationTransform& transform() const { return transform_; }

  TrajectoryWindow operator[](std::size_t k) const;
  std::span<const float> record(std::size_t k) const;
  const WindowMeta& meta(std::size_t k) const { return meta_[k]; }
  std::span<const float> payload() const { return payload_; }
  const std::vector<WindowMeta>& metas() const { return meta_; }

  /// Appends one record (history then target). Throws UsageError if any value lies outside [-1, 1].
  void append(std::span<const float> record, WindowMeta meta);
  /// Appends every record of `other`; layouts and transforms must agree.
  void extend(const WindowSet& other);
  /// Copy holding only the listed records, in the given order.
  WindowSet subset(std::span<const std::size_t> indices) const;

  /// Throws UsageError if any stored value is outside [-1, 1] or non-finite.
  void validate() const;

 private:
  std::size_t history_len_ = kHistoryLen;
  std::size_t rows_ = cloth::kFlagRows;
  std::size_t cols_ = cloth::kFlagCols;
  NormalizationTransform transform_;
  std::vector<float> payload_;
  std::vector<WindowMeta> meta_;
};

/// Number of windows make_windows produces: floor((frames - window_len - 1) / stride) + 1.
std::size_t window_count(std::size_t frames, std::size_t window_len, std::size_t stride);

/// Sliding windows over one run, normalized through `transform`.
/// Throws UsageError when frames.size() < window_len + 1.
WindowSet make_windows(const FrameSequence& frames, const NormalizationTransform& transform,
                       std::size_t window_len = kHistoryLen, std::size_t stride = 1);

/// Model-facing layout of a window. The packed (history, rows, cols, 3) layout
/// already is (history, tokens, 3) with token = row * cols + col, so this is a view.
struct ModelView {
  std::span<const float> tokens;  // history_len x tokens x 3
  std::span<const float> target;  // tokens x 3
  std::size_t history_len;
  std::size_t num_tokens;
};

ModelView reshape_for_model(const TrajectoryWindow& window, std::size_t rows = cloth::kFlagRows,
                            std::size_t cols = cloth::kFlagCols);

/// Re-grids a (tokens x 3) buffer into (rows x cols x 3). Both layouts share memory
/// order, so this is a size-checked copy; `grid_to_tokens` is the inverse.
std::vector<float> tokens_to_grid(std::span<const float> tokens, std::size_t rows = cloth::kFlagRows,
                                  std::size_t cols = cloth::kFlagCols);
std::vector<float> grid_to_tokens(std::span<const float> grid, std::size_t rows = cloth::kFlagRows,
                                  std::size_t cols = cloth::kFlagCols);

struct TrainValSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

/// Seeded shuffle, then the first round(val_fraction * n) indices go to validation.
/// Throws ParameterError unless 0 < val_fraction < 1.
TrainValSplit split_train_val(std::size_t n_windows, double val_fraction, std::uint64_t seed);

}  // namespace neuroflag::dataset
