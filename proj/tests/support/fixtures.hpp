#pragma once

#include <vector>

#include "neuroflag/cloth/simulator.hpp"
#include "neuroflag/cloth/topology.hpp"
#include "neuroflag/cloth/wind.hpp"
#include "neuroflag/dataset/frames.hpp"
#include "neuroflag/dataset/normalization.hpp"
#include "neuroflag/dataset/windows.hpp"
#include "neuroflag/model/config.hpp"

namespace neuroflag::testing {

/// Recorded positions of a rows x cols flag.
inline dataset::FrameSequence flag_frames(std::size_t rows, std::size_t cols, std::size_t n_frames,
                                          cloth::WindCondition condition, std::uint64_t seed = 42,
                                          std::uint64_t warmup = 200) {
  cloth::ClothConfig cfg;
  cfg.rows = rows;
  cfg.cols = cols;
  cfg.warmup_steps = warmup;
  const auto topo = cloth::SpringTopology::grid(rows, cols, cfg.spacing);
  const auto run = cloth::simulate(cfg, cloth::default_wind(condition), topo, n_frames, seed);
  return dataset::to_frames(run.states, condition);
}

/// Normalized windows pooled over the given runs, with the transform fitted to all of them.
inline dataset::WindowSet pooled_windows(const std::vector<dataset::FrameSequence>& runs, std::size_t history) {
  const auto transform = dataset::fit_normalization(runs);
  dataset::WindowSet all(history, runs.front().rows, runs.front().cols, transform);
  for (const auto& r : runs) all.extend(dataset::make_windows(r, transform, history));
  return all;
}

/// A small transformer over a 3 x 3 grid with a short history.
inline model::ModelConfig small_model(std::size_t history = 8) {
  model::ModelConfig cfg;
  cfg.grid_rows = 3;
  cfg.grid_cols = 3;
  cfg.history_len = history;
  cfg.projection_dim = 16;
  cfg.num_heads = 2;
  cfg.num_layers = 1;
  cfg.mlp_expansion = 2;
  return cfg;
}

}  // namespace neuroflag::testing
