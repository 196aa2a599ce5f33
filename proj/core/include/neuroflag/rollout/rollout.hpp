#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "neuroflag/cloth/simulator.hpp"
#include "neuroflag/cloth/wind.hpp"
#include "neuroflag/dataset/frames.hpp"
#include "neuroflag/dataset/normalization.hpp"
#include "neuroflag/dataset/windows.hpp"
#include "neuroflag/rollout/predictor.hpp"

namespace neuroflag::rollout {

/// Sliding history of normalized frames. Always holds exactly `capacity` frames.
class RolloutState {
 public:
  RolloutState(std::span<const float> seed_window, std::size_t history_len, std::size_t frame_floats,
               cloth::WindCondition condition);

  /// Appends `frame`, evicting the oldest.
  void push(std::span<const float> frame);
  /// Frames oldest first, packed.
  std::vector<float> contiguous() const;

  std::size_t size() const { return frames_.size(); }
  std::size_t frames_predicted() const { return counter_; }
  cloth::WindCondition condition() const { return condition_; }
  std::span<const float> frame(std::size_t k) const { return frames_[k]; }

 private:
  std::size_t ff_;
  std::deque<std::vector<float>> frames_;
  std::size_t counter_ = 0;
  cloth::WindCondition condition_;
};

struct RolloutOptions {
  /// Overwrite column-0 particles of each prediction with their seed-window positions.
  bool clamp_pole = true;
  std::size_t rows = cloth::kFlagRows;
  std::size_t cols = cloth::kFlagCols;
};

/// Closed-loop prediction of `n_frames` frames from a seed history.
/// Throws RolloutDivergedError (0-based frame index) on a non-finite prediction.
dataset::FrameSequence rollout(Predictor& predictor, std::span<const float> seed_window, std::size_t n_frames,
                               cloth::WindCondition condition, const RolloutOptions& opts = {});

struct RolloutReport {
  cloth::WindCondition condition = cloth::WindCondition::none;
  std::string mode;
  /// e_t = mean over particles and axes of |predicted - truth|.
  std::vector<double> per_frame;
  double mu = 0.0;
  /// Population standard deviation of per_frame.
  double sigma = 0.0;

  std::size_t n_frames() const { return per_frame.size(); }
  /// Recomputes mu and sigma from per_frame.
  void summarize();
};

/// Mean absolute difference over one frame.
double frame_error(std::span<const float> predicted, std::span<const float> truth);

/// One-step predictions for every window, grouped by wind condition in the
/// order strong, moderate, none (absent conditions are skipped).
std::vector<RolloutReport> teacher_forced_errors(Predictor& predictor, const dataset::WindowSet& windows,
                                                 std::size_t batch_size = 32);

/// Closed-loop rollout seeded with frames [start, start + H) of `truth`,
/// scored against frames [start + H, start + H + n_frames).
RolloutReport compare_rollout_to_oracle(Predictor& predictor, const dataset::FrameSequence& truth,
                                        std::size_t start, std::size_t n_frames, const RolloutOptions& opts = {},
                                        dataset::FrameSequence* predicted = nullptr);

/// Simulates a fresh oracle run (warm-up, then H + n_frames frames), normalizes
/// it with `transform`, and scores a closed-loop rollout against it.
RolloutReport compare_rollout_to_oracle(Predictor& predictor, const cloth::ClothConfig& sim,
                                        const cloth::WindParams& wind, cloth::WindCondition condition,
                                        std::uint64_t seed, const dataset::NormalizationTransform& transform,
                                        std::size_t n_frames, const RolloutOptions& opts = {},
                                        dataset::FrameSequence* predicted = nullptr);

/// Writes `particle_RR_CC.csv` files (`t,x,y,z`, one row per frame) into `dir`.
/// Returns the number of files written.
std::size_t per_particle_traces(const dataset::FrameSequence& frames, const std::string& dir);

}  // namespace neuroflag::rollout
