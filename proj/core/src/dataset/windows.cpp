#include "neuroflag/dataset/windows.hpp"

#include <cmath>
#include <numeric>

#include "neuroflag/error.hpp"
#include "neuroflag/rng.hpp"

namespace neuroflag::dataset {

namespace {

void check_range(std::span<const float> values, const char* what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    const float v = values[i];
    if (!(v >= -1.0f && v <= 1.0f)) {
      throw UsageError(std::string(what) + ": value " + std::to_string(v) + " at position " + std::to_string(i) +
                       " lies outside [-1, 1]");
    }
  }
}

}  // namespace

WindowSet::WindowSet(std::size_t history_len, std::size_t rows, std::size_t cols, NormalizationTransform transform)
    : history_len_(history_len), rows_(rows), cols_(cols), transform_(transform) {
  if (history_len == 0 || rows == 0 || cols == 0) throw UsageError("WindowSet: dimensions must be positive");
}

WindowSet WindowSet::from_packed(std::size_t history_len, std::size_t rows, std::size_t cols,
                                 NormalizationTransform transform, std::vector<float> payload,
                                 std::vector<WindowMeta> meta) {
  WindowSet ws(history_len, rows, cols, transform);
  ws.payload_ = std::move(payload);
  ws.meta_ = std::move(meta);
  ws.validate();
  return ws;
}

TrajectoryWindow WindowSet::operator[](std::size_t k) const {
  const auto rec = record(k);
  const std::size_t hist = history_len_ * frame_floats();
  return TrajectoryWindow{rec.first(hist), rec.subspan(hist), meta_[k].condition, meta_[k].source_step};
}

std::span<const float> WindowSet::record(std::size_t k) const {
  if (k >= size()) throw UsageError("WindowSet: index " + std::to_string(k) + " out of range");
  return std::span<const float>(payload_).subspan(k * record_floats(), record_floats());
}

void WindowSet::append(std::span<const float> rec, WindowMeta meta) {
  if (rec.size() != record_floats()) {
    throw DimensionError("WindowSet::append: record has " + std::to_string(rec.size()) + " floats, expected " +
                         std::to_string(record_floats()));
  }
  check_range(rec, "WindowSet::append");
  payload_.insert(payload_.end(), rec.begin(), rec.end());
  meta_.push_back(meta);
}

void WindowSet::extend(const WindowSet& other) {
  if (other.history_len_ != history_len_ || other.rows_ != rows_ || other.cols_ != cols_ ||
      !(other.transform_ == transform_)) {
    throw UsageError("WindowSet::extend: layouts or transforms differ");
  }
  payload_.insert(payload_.end(), other.payload_.begin(), other.payload_.end());
  meta_.insert(meta_.end(), other.meta_.begin(), other.meta_.end());
}

WindowSet WindowSet::subset(std::span<const std::size_t> indices) const {
  WindowSet out(history_len_, rows_, cols_, transform_);
  out.payload_.reserve(indices.size() * record_floats());
  out.meta_.reserve(indices.size());
  for (auto k : indices) {
    const auto rec = record(k);
    out.payload_.insert(out.payload_.end(), rec.begin(), rec.end());
    out.meta_.push_back(meta_[k]);
  }
  return out;
}

void WindowSet::validate() const {
  if (payload_.size() != meta_.size() * record_floats()) throw UsageError("WindowSet: payload/meta size mismatch");
  check_range(payload_, "WindowSet::validate");
}

std::size_t window_count(std::size_t frames, std::size_t window_len, std::size_t stride) {
  if (stride == 0) throw ParameterError("window stride must be >= 1");
  if (frames < window_len + 1) return 0;
  return (frames - window_len - 1) / stride + 1;
}

WindowSet make_windows(const FrameSequence& frames, const NormalizationTransform& transform, std::size_t window_len,
                       std::size_t stride) {
  if (window_len == 0) throw ParameterError("make_windows: window_len must be >= 1");
  if (frames.size() < window_len + 1) {
    throw UsageError("make_windows: need at least " + std::to_string(window_len + 1) + " frames, got " +
                     std::to_string(frames.size()));
  }
  const std::size_t count = window_count(frames.size(), window_len, stride);
  const auto normalized = transform.apply(frames.xyz);
  const std::size_t ff = frames.frame_floats();
  WindowSet ws(window_len, frames.rows, frames.cols, transform);
  for (std::size_t w = 0; w < count; ++w) {
    const std::size_t start = w * stride;
    const auto rec = std::span<const float>(normalized).subspan(start * ff, (window_len + 1) * ff);
    ws.append(rec, WindowMeta{frames.condition, start});
  }
  return ws;
}

ModelView reshape_for_model(const TrajectoryWindow& window, std::size_t rows, std::size_t cols) {
  const std::size_t tokens = rows * cols;
  if (window.target.size() != tokens * kCoords || window.history.size() % (tokens * kCoords) != 0) {
    throw DimensionError("reshape_for_model: window does not match a " + std::to_string(rows) + "x" +
                         std::to_string(cols) + " grid");
  }
  return ModelView{window.history, window.target, window.history.size() / (tokens * kCoords), tokens};
}

std::vector<float> tokens_to_grid(std::span<const float> tokens, std::size_t rows, std::size_t cols) {
  if (tokens.size() != rows * cols * kCoords) throw DimensionError("tokens_to_grid: size mismatch");
  std::vector<float> grid(tokens.size());
  for (std::size_t t = 0; t < rows * cols; ++t) {
    const auto g = grid_index(t, cols);
    for (std::size_t c = 0; c < kCoords; ++c) grid[(g.row * cols + g.col) * kCoords + c] = tokens[t * kCoords + c];
  }
  return grid;
}

std::vector<float> grid_to_tokens(std::span<const float> grid, std::size_t rows, std::size_t cols) {
  if (grid.size() != rows * cols * kCoords) throw DimensionError("grid_to_tokens: size mismatch");
  std::vector<float> tokens(grid.size());
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const std::size_t t = token_index(i, j, cols);
      for (std::size_t c = 0; c < kCoords; ++c) tokens[t * kCoords + c] = grid[(i * cols + j) * kCoords + c];
    }
  }
  return tokens;
}

TrainValSplit split_train_val(std::size_t n_windows, double val_fraction, std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ParameterError("val_fraction must lie in (0, 1)");
  std::vector<std::size_t> order(n_windows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n_windows; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(order[i - 1], order[j]);
  }
  const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n_windows)));
  TrainValSplit split;
  split.val.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  return split;
}

}  // namespace neuroflag::dataset
