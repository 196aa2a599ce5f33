#include "neuroflag/rollout/predictor.hpp"

#include <algorithm>
#include <cstring>

#include "neuroflag/error.hpp"
#include "neuroflag/fingerprint.hpp"
#include "neuroflag/model/animator.hpp"

namespace neuroflag::rollout {

namespace {

std::uint64_t frame_key(std::span<const float> frame) {
  return fnv1a64(std::string_view(reinterpret_cast<const char*>(frame.data()), frame.size_bytes()));
}

}  // namespace

void Predictor::check_input(std::span<const float> histories, std::size_t batch) const {
  if (histories.size() != batch * history_len() * frame_floats()) {
    throw DimensionError("predictor input holds " + std::to_string(histories.size()) + " floats, expected " +
                         std::to_string(batch * history_len() * frame_floats()));
  }
}

ModelPredictor::ModelPredictor(model::ModelConfig cfg, model::ModelParams<float> params)
    : cfg_(cfg), params_(std::move(params)) {
  cfg_.validate();
  params_.set_requires_grad(false);
}

std::vector<float> ModelPredictor::predict(std::span<const float> histories, std::size_t batch) {
  check_input(histories, batch);
  tensor::NoGradGuard no_grad;
  const auto x = tensor::Tensor::from_data({batch, cfg_.history_len, cfg_.grid_rows, cfg_.grid_cols, cfg_.coords},
                                           std::vector<float>(histories.begin(), histories.end()));
  const auto y = model::forward(params_, cfg_, x);
  return std::vector<float>(y.data().begin(), y.data().end());
}

std::vector<float> CopyLastPredictor::predict(std::span<const float> histories, std::size_t batch) {
  check_input(histories, batch);
  std::vector<float> out(batch * ff_);
  for (std::size_t b = 0; b < batch; ++b) {
    const auto last = histories.subspan(((b + 1) * history_len_ - 1) * ff_, ff_);
    std::copy(last.begin(), last.end(), out.begin() + static_cast<std::ptrdiff_t>(b * ff_));
  }
  return out;
}

std::vector<float> ZeroPredictor::predict(std::span<const float> histories, std::size_t batch) {
  check_input(histories, batch);
  return std::vector<float>(batch * ff_, 0.0f);
}

OraclePredictor::OraclePredictor(std::size_t history_len, std::vector<dataset::FrameSequence> normalized_runs)
    : history_len_(history_len), runs_(std::move(normalized_runs)) {
  if (history_len_ == 0) throw UsageError("OraclePredictor: history_len must be positive");
  if (runs_.empty()) throw UsageError("OraclePredictor needs at least one run");
  ff_ = runs_.front().frame_floats();
  for (std::size_t r = 0; r < runs_.size(); ++r) {
    if (runs_[r].frame_floats() != ff_) throw DimensionError("OraclePredictor runs differ in frame size");
    for (std::size_t k = history_len_ - 1; k + 1 < runs_[r].size(); ++k) {
      by_frame_.emplace(frame_key(runs_[r].frame(k)), std::make_pair(r, k));
    }
  }
}

std::vector<float> OraclePredictor::predict(std::span<const float> histories, std::size_t batch) {
  check_input(histories, batch);
  std::vector<float> out(batch * ff_);
  for (std::size_t b = 0; b < batch; ++b) {
    const auto hist = histories.subspan(b * history_len_ * ff_, history_len_ * ff_);
    const auto [lo, hi] = by_frame_.equal_range(frame_key(hist.last(ff_)));
    const float* next = nullptr;
    for (auto it = lo; it != hi && next == nullptr; ++it) {
      const auto& run = runs_[it->second.first];
      const std::size_t first = it->second.second + 1 - history_len_;
      if (std::memcmp(run.frame(first).data(), hist.data(), hist.size_bytes()) == 0) {
        next = run.frame(it->second.second + 1).data();
      }
    }
    if (next == nullptr) throw UsageError("OraclePredictor: history does not come from a recorded run");
    std::copy(next, next + ff_, out.begin() + static_cast<std::ptrdiff_t>(b * ff_));
  }
  return out;
}

}  // namespace neuroflag::rollout
