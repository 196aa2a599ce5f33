#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "neuroflag/cloth/simulator.hpp"
#include "neuroflag/cloth/wind.hpp"

namespace neuroflag::dataset {

inline constexpr std::size_t kCoords = 3;
inline constexpr std::size_t kParticles = cloth::kFlagRows * cloth::kFlagCols;
inline constexpr std::size_t kFrameFloats = kParticles * kCoords;
inline constexpr std::size_t kHistoryLen = 64;

/// Token index of grid particle (row, col): row-major.
constexpr std::size_t token_index(std::size_t row, std::size_t col, std::size_t cols = cloth::kFlagCols) {
  return row * cols + col;
}

struct GridIndex {
  std::size_t row;
  std::size_t col;
  friend bool operator==(const GridIndex&, const GridIndex&) = default;
};

constexpr GridIndex grid_index(std::size_t token, std::size_t cols = cloth::kFlagCols) {
  return GridIndex{token / cols, token % cols};
}

/// Consecutive flag frames of one run, stored as frames x rows x cols x 3 floats.
struct FrameSequence {
  std::size_t rows = cloth::kFlagRows;
  std::size_t cols = cloth::kFlagCols;
  cloth::WindCondition condition = cloth::WindCondition::none;
  /// Simulation step index of frame 0.
  std::uint64_t first_step = 0;
  std::vector<float> xyz;

  std::size_t frame_floats() const { return rows * cols * kCoords; }
  std::size_t size() const { return frame_floats() == 0 ? 0 : xyz.size() / frame_floats(); }
  std::span<const float> frame(std::size_t k) const {
    return std::span<const float>(xyz).subspan(k * frame_floats(), frame_floats());
  }
};

/// Positions of simulated states, rounded to float.
FrameSequence to_frames(std::span<const cloth::ClothState> states, cloth::WindCondition condition);

}  // namespace neuroflag::dataset
