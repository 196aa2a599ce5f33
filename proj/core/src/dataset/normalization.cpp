#include "neuroflag/dataset/normalization.hpp"

#include <algorithm>
#include <limits>

#include "neuroflag/error.hpp"

namespace neuroflag::dataset {

FrameSequence to_frames(std::span<const cloth::ClothState> states, cloth::WindCondition condition) {
  FrameSequence seq;
  seq.condition = condition;
  if (states.empty()) return seq;
  seq.rows = states.front().rows;
  seq.cols = states.front().cols;
  seq.first_step = states.front().step_index;
  seq.xyz.reserve(states.size() * seq.frame_floats());
  for (const auto& s : states) {
    for (const auto& p : s.positions) {
      seq.xyz.push_back(static_cast<float>(p.x()));
      seq.xyz.push_back(static_cast<float>(p.y()));
      seq.xyz.push_back(static_cast<float>(p.z()));
    }
  }
  return seq;
}

double NormalizationTransform::forward(std::size_t axis, double x) const {
  if (scale[axis] == 0.0) return 0.0;
  return 2.0 * (x - offset[axis]) / scale[axis] - 1.0;
}

double NormalizationTransform::inverse(std::size_t axis, double normalized) const {
  return offset[axis] + (normalized + 1.0) * scale[axis] * 0.5;
}

std::vector<float> NormalizationTransform::apply(std::span<const float> xyz) const {
  std::vector<float> out(xyz.size());
  for (std::size_t i = 0; i < xyz.size(); ++i) out[i] = static_cast<float>(forward(i % 3, xyz[i]));
  return out;
}

std::vector<float> NormalizationTransform::invert(std::span<const float> normalized) const {
  std::vector<float> out(normalized.size());
  for (std::size_t i = 0; i < normalized.size(); ++i) out[i] = static_cast<float>(inverse(i % 3, normalized[i]));
  return out;
}

namespace {

NormalizationTransform from_extrema(const std::array<double, 3>& lo, const std::array<double, 3>& hi) {
  NormalizationTransform t;
  for (std::size_t a = 0; a < 3; ++a) {
    t.offset[a] = lo[a];
    t.scale[a] = hi[a] - lo[a];
  }
  return t;
}

}  // namespace

NormalizationTransform fit_normalization(std::span<const FrameSequence> runs) {
  std::size_t frames = 0;
  std::array<double, 3> lo{}, hi{};
  lo.fill(std::numeric_limits<double>::infinity());
  hi.fill(-std::numeric_limits<double>::infinity());
  for (const auto& run : runs) {
    frames += run.size();
    for (std::size_t i = 0; i < run.xyz.size(); ++i) {
      const double v = run.xyz[i];
      lo[i % 3] = std::min(lo[i % 3], v);
      hi[i % 3] = std::max(hi[i % 3], v);
    }
  }
  if (frames < 2) throw UsageError("fit_normalization: need at least 2 frames, got " + std::to_string(frames));
  return from_extrema(lo, hi);
}

NormalizationTransform fit_normalization(std::span<const cloth::ClothState> states) {
  if (states.size() < 2) {
    throw UsageError("fit_normalization: need at least 2 frames, got " + std::to_string(states.size()));
  }
  const auto seq = to_frames(states, cloth::WindCondition::none);
  return fit_normalization(std::span<const FrameSequence>(&seq, 1));
}

}  // namespace neuroflag::dataset
