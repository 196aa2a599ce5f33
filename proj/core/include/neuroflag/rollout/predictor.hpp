#pragma once

#include <cstddef>
#include <span>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "neuroflag/dataset/frames.hpp"
#include "neuroflag/model/config.hpp"
#include "neuroflag/model/params.hpp"

namespace neuroflag::rollout {

/// Next-frame predictor over normalized frames.
class Predictor {
 public:
  virtual ~Predictor() = default;

  virtual std::size_t history_len() const = 0;
  virtual std::size_t frame_floats() const = 0;
  /// `histories` holds `batch` consecutive histories of history_len() frames;
  /// returns `batch` predicted frames.
  virtual std::vector<float> predict(std::span<const float> histories, std::size_t batch) = 0;

 protected:
  void check_input(std::span<const float> histories, std::size_t batch) const;
};

/// The trajectory transformer in inference mode.
class ModelPredictor final : public Predictor {
 public:
  ModelPredictor(model::ModelConfig cfg, model::ModelParams<float> params);
  std::size_t history_len() const override { return cfg_.history_len; }
  std::size_t frame_floats() const override { return cfg_.output_dim(); }
  std::vector<float> predict(std::span<const float> histories, std::size_t batch) override;

 private:
  model::ModelConfig cfg_;
  model::ModelParams<float> params_;
};

/// Repeats the last history frame.
class CopyLastPredictor final : public Predictor {
 public:
  CopyLastPredictor(std::size_t history_len, std::size_t frame_floats) : history_len_(history_len), ff_(frame_floats) {}
  std::size_t history_len() const override { return history_len_; }
  std::size_t frame_floats() const override { return ff_; }
  std::vector<float> predict(std::span<const float> histories, std::size_t batch) override;

 private:
  std::size_t history_len_;
  std::size_t ff_;
};

/// Predicts all zeros.
class ZeroPredictor final : public Predictor {
 public:
  ZeroPredictor(std::size_t history_len, std::size_t frame_floats) : history_len_(history_len), ff_(frame_floats) {}
  std::size_t history_len() const override { return history_len_; }
  std::size_t frame_floats() const override { return ff_; }
  std::vector<float> predict(std::span<const float> histories, std::size_t batch) override;

 private:
  std::size_t history_len_;
  std::size_t ff_;
};

/// Returns the recorded simulator successor of a history. The whole history is
/// matched bitwise against the runs; an unknown history raises UsageError.
class OraclePredictor final : public Predictor {
 public:
  OraclePredictor(std::size_t history_len, std::vector<dataset::FrameSequence> normalized_runs);
  std::size_t history_len() const override { return history_len_; }
  std::size_t frame_floats() const override { return ff_; }
  std::vector<float> predict(std::span<const float> histories, std::size_t batch) override;

 private:
  std::size_t history_len_;
  std::size_t ff_ = 0;
  std::vector<dataset::FrameSequence> runs_;
  /// Hash of a frame -> every (run, frame index) holding it.
  std::unordered_multimap<std::uint64_t, std::pair<std::size_t, std::size_t>> by_frame_;
};

}  // namespace neuroflag::rollout
