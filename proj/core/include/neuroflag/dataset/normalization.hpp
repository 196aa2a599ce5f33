#pragma once

#include <array>
#include <span>

#include "neuroflag/dataset/frames.hpp"

namespace neuroflag::dataset {

/// Per-axis affine map of simulation coordinates into [-1, 1].
///
///   normalized = 2 (x - offset) / scale - 1,   x = offset + (normalized + 1) scale / 2
///
/// where offset is the axis minimum and scale its extent. This form maps the
/// minimum and maximum to exactly -1 and +1. An axis with zero extent maps to 0.
struct NormalizationTransform {
  std::array<double, 3> offset{0.0, 0.0, 0.0};
  std::array<double, 3> scale{2.0, 2.0, 2.0};

  /// The transform whose forward map is x -> x (offset -1, scale 2).
  static NormalizationTransform identity() {
    return NormalizationTransform{{-1.0, -1.0, -1.0}, {2.0, 2.0, 2.0}};
  }

  double forward(std::size_t axis, double x) const;
  double inverse(std::size_t axis, double normalized) const;

  /// Normalizes a packed xyz buffer (length divisible by 3).
  std::vector<float> apply(std::span<const float> xyz) const;
  std::vector<float> invert(std::span<const float> normalized) const;

  friend bool operator==(const NormalizationTransform&, const NormalizationTransform&) = default;
};

/// Joint per-axis min/max over every frame of every run. Throws UsageError when
/// fewer than two frames are supplied in total.
NormalizationTransform fit_normalization(std::span<const FrameSequence> runs);
NormalizationTransform fit_normalization(std::span<const cloth::ClothState> states);

}  // namespace neuroflag::dataset
