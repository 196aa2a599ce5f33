#include "neuroflag/rollout/rollout.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <fmt/format.h>

#include "neuroflag/error.hpp"

namespace neuroflag::rollout {

RolloutState::RolloutState(std::span<const float> seed_window, std::size_t history_len, std::size_t frame_floats,
                           cloth::WindCondition condition)
    : ff_(frame_floats), condition_(condition) {
  if (history_len == 0 || seed_window.size() != history_len * frame_floats) {
    throw DimensionError(fmt::format("seed window holds {} floats, expected {} frames of {}", seed_window.size(),
                                     history_len, frame_floats));
  }
  for (std::size_t k = 0; k < history_len; ++k) {
    const auto f = seed_window.subspan(k * ff_, ff_);
    frames_.emplace_back(f.begin(), f.end());
  }
}

void RolloutState::push(std::span<const float> frame) {
  if (frame.size() != ff_) throw DimensionError("RolloutState::push: frame size mismatch");
  frames_.pop_front();
  frames_.emplace_back(frame.begin(), frame.end());
  ++counter_;
}

std::vector<float> RolloutState::contiguous() const {
  std::vector<float> out;
  out.reserve(frames_.size() * ff_);
  for (const auto& f : frames_) out.insert(out.end(), f.begin(), f.end());
  return out;
}

dataset::FrameSequence rollout(Predictor& predictor, std::span<const float> seed_window, std::size_t n_frames,
                               cloth::WindCondition condition, const RolloutOptions& opts) {
  const std::size_t ff = predictor.frame_floats();
  if (ff != opts.rows * opts.cols * dataset::kCoords) throw DimensionError("rollout: grid does not match predictor");
  RolloutState state(seed_window, predictor.history_len(), ff, condition);
  const std::vector<float> pole(state.frame(state.size() - 1).begin(), state.frame(state.size() - 1).end());

  dataset::FrameSequence out;
  out.rows = opts.rows;
  out.cols = opts.cols;
  out.condition = condition;
  out.xyz.reserve(n_frames * ff);
  for (std::size_t t = 0; t < n_frames; ++t) {
    auto next = predictor.predict(state.contiguous(), 1);
    for (float v : next) {
      if (!std::isfinite(v)) throw RolloutDivergedError("non-finite prediction", t);
    }
    if (opts.clamp_pole) {
      for (std::size_t i = 0; i < opts.rows; ++i) {
        const std::size_t base = dataset::token_index(i, 0, opts.cols) * dataset::kCoords;
        for (std::size_t c = 0; c < dataset::kCoords; ++c) next[base + c] = pole[base + c];
      }
    }
    state.push(next);
    out.xyz.insert(out.xyz.end(), next.begin(), next.end());
  }
  return out;
}

void RolloutReport::summarize() {
  if (per_frame.empty()) {
    mu = sigma = 0.0;
    return;
  }
  const double n = static_cast<double>(per_frame.size());
  mu = std::accumulate(per_frame.begin(), per_frame.end(), 0.0) / n;
  double ss = 0.0;
  for (double e : per_frame) ss += (e - mu) * (e - mu);
  sigma = std::sqrt(ss / n);
}

double frame_error(std::span<const float> predicted, std::span<const float> truth) {
  if (predicted.size() != truth.size() || truth.empty()) throw DimensionError("frame_error: size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    acc += std::abs(static_cast<double>(predicted[i]) - static_cast<double>(truth[i]));
  }
  return acc / static_cast<double>(truth.size());
}

std::vector<RolloutReport> teacher_forced_errors(Predictor& predictor, const dataset::WindowSet& windows,
                                                 std::size_t batch_size) {
  if (batch_size == 0) throw ParameterError("batch_size must be >= 1");
  if (windows.history_len() != predictor.history_len() || windows.frame_floats() != predictor.frame_floats()) {
    throw DimensionError("teacher_forced_errors: windows do not match the predictor");
  }
  const std::size_t ff = windows.frame_floats();
  const std::size_t hist = windows.history_len() * ff;
  std::vector<double> errors(windows.size());
  std::vector<float> batch;
  for (std::size_t start = 0; start < windows.size(); start += batch_size) {
    const std::size_t end = std::min(windows.size(), start + batch_size);
    batch.clear();
    batch.reserve((end - start) * hist);
    for (std::size_t k = start; k < end; ++k) {
      const auto w = windows[k];
      batch.insert(batch.end(), w.history.begin(), w.history.end());
    }
    const auto pred = predictor.predict(batch, end - start);
    for (std::size_t k = start; k < end; ++k) {
      errors[k] = frame_error(std::span<const float>(pred).subspan((k - start) * ff, ff), windows[k].target);
    }
  }

  std::vector<RolloutReport> reports;
  for (auto condition : cloth::kAllWindConditions) {
    RolloutReport r;
    r.condition = condition;
    r.mode = "teacher_forced";
    for (std::size_t k = 0; k < windows.size(); ++k) {
      if (windows.meta(k).condition == condition) r.per_frame.push_back(errors[k]);
    }
    if (r.per_frame.empty()) continue;
    r.summarize();
    reports.push_back(std::move(r));
  }
  return reports;
}

RolloutReport compare_rollout_to_oracle(Predictor& predictor, const dataset::FrameSequence& truth, std::size_t start,
                                        std::size_t n_frames, const RolloutOptions& opts,
                                        dataset::FrameSequence* predicted) {
  const std::size_t h = predictor.history_len();
  const std::size_t ff = truth.frame_floats();
  if (start + h + n_frames > truth.size()) {
    throw UsageError(fmt::format("oracle run has {} frames; {} are needed", truth.size(), start + h + n_frames));
  }
  const auto seed = std::span<const float>(truth.xyz).subspan(start * ff, h * ff);
  auto frames = rollout(predictor, seed, n_frames, truth.condition, opts);
  RolloutReport r;
  r.condition = truth.condition;
  r.mode = "closed_loop";
  r.per_frame.reserve(n_frames);
  for (std::size_t t = 0; t < n_frames; ++t) r.per_frame.push_back(frame_error(frames.frame(t), truth.frame(start + h + t)));
  r.summarize();
  if (predicted != nullptr) *predicted = std::move(frames);
  return r;
}

RolloutReport compare_rollout_to_oracle(Predictor& predictor, const cloth::ClothConfig& sim,
                                        const cloth::WindParams& wind, cloth::WindCondition condition,
                                        std::uint64_t seed, const dataset::NormalizationTransform& transform,
                                        std::size_t n_frames, const RolloutOptions& opts,
                                        dataset::FrameSequence* predicted) {
  const auto topo = cloth::SpringTopology::grid(sim.rows, sim.cols, sim.spacing);
  const auto result = cloth::simulate(sim, wind, topo, predictor.history_len() + n_frames, seed);
  auto truth = dataset::to_frames(result.states, condition);
  truth.xyz = transform.apply(truth.xyz);
  return compare_rollout_to_oracle(predictor, truth, 0, n_frames, opts, predicted);
}

std::size_t per_particle_traces(const dataset::FrameSequence& frames, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
  const std::size_t ff = frames.frame_floats();
  for (std::size_t i = 0; i < frames.rows; ++i) {
    for (std::size_t j = 0; j < frames.cols; ++j) {
      const auto path = (std::filesystem::path(dir) / fmt::format("particle_{:02d}_{:02d}.csv", i, j)).string();
      std::ofstream out(path, std::ios::trunc);
      if (!out) throw IoError("cannot open " + path + " for writing");
      out << "t,x,y,z\n";
      const std::size_t base = dataset::token_index(i, j, frames.cols) * dataset::kCoords;
      for (std::size_t t = 0; t < frames.size(); ++t) {
        const float* p = frames.xyz.data() + t * ff + base;
        out << fmt::format("{},{:.6f},{:.6f},{:.6f}\n", t, p[0], p[1], p[2]);
      }
      if (!out) throw IoError("failed writing " + path);
    }
  }
  return frames.rows * frames.cols;
}

}  // namespace neuroflag::rollout
