#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "neuroflag/dataset/windows.hpp"
#include "neuroflag/model/checkpoint.hpp"
#include "neuroflag/model/config.hpp"
#include "neuroflag/model/params.hpp"
#include "neuroflag/rng.hpp"
#include "neuroflag/tensor/tensor.hpp"
#include "neuroflag/train/adam.hpp"
#include "neuroflag/train/huber.hpp"
#include "neuroflag/train/optimizer_state.hpp"

namespace neuroflag::train {

struct TrainConfig {
  std::size_t batch_size = 32;
  double huber_delta = kDefaultHuberDelta;
  AdamConfig adam;
  std::size_t epochs = 30;
  /// Stops after this many optimizer steps when non-zero, overriding `epochs`.
  std::size_t max_steps = 0;
  /// Validation loss is evaluated before every step whose index is a multiple of this.
  std::size_t val_interval = 100;
  /// Checkpoint written after every multiple of this many steps (0: final only).
  std::size_t checkpoint_interval = 0;
  /// Seeds initialization, per-epoch shuffles and dropout.
  std::uint64_t seed = 0;

  void validate() const;
  std::string describe() const;
  std::uint64_t fingerprint() const;
};

struct TrainLogEntry {
  std::uint64_t step = 0;
  double train_loss = 0.0;
  std::optional<double> val_loss;
};

struct TrainLog {
  std::vector<TrainLogEntry> entries;

  /// `step,train_loss,val_loss` with val_loss empty off-interval.
  std::string to_csv(bool header = true) const;
};

/// Copies windows `indices` of `windows` into model-ready (B, H, rows, cols, 3) and (B, 1, rows, cols, 3) tensors.
struct Batch {
  tensor::Tensor inputs;
  tensor::Tensor targets;
};
Batch make_batch(const dataset::WindowSet& windows, std::span<const std::size_t> indices);

/// Mean Huber loss over every element of `windows`, inference mode, no tape.
double evaluate_loss(const model::ModelParams<float>& params, const model::ModelConfig& mcfg,
                     const dataset::WindowSet& windows, double delta, std::size_t batch_size = 32);

/// Mini-batch Adam training on a window set. One instance owns the parameters.
///
/// Step s uses batch s mod (n / batch_size) of the permutation drawn for epoch
/// s div (n / batch_size) from the seed alone, so a resumed run replays the
/// same batch sequence. The final partial batch of each epoch is dropped.
class Trainer {
 public:
  Trainer(model::ModelConfig mcfg, TrainConfig tcfg, const dataset::WindowSet& train,
          const dataset::WindowSet* val = nullptr);

  /// Adopts parameters, moments, step and dropout RNG from a checkpoint.
  /// Throws ConfigMismatchError when the model configs differ.
  void resume(const model::Checkpoint& ckpt);

  /// One forward/backward/update on the next batch; returns the pre-update loss.
  /// Raises TrainingDivergedError (parameters left untouched) on a non-finite loss.
  double step();
  /// Steps until the budget is exhausted, calling `on_checkpoint` at each checkpoint interval.
  TrainLog run(const std::function<void(const model::Checkpoint&)>& on_checkpoint = {});

  double validation_loss() const;
  model::Checkpoint checkpoint() const;

  std::uint64_t steps_done() const { return step_; }
  std::size_t steps_per_epoch() const { return steps_per_epoch_; }
  std::size_t total_steps() const;
  const model::ModelParams<float>& params() const { return params_; }
  model::ModelParams<float>& params() { return params_; }
  const OptimizerState& optimizer() const { return opt_; }
  const TrainLog& log() const { return log_; }

 private:
  std::span<const std::size_t> batch_indices(std::uint64_t step);

  model::ModelConfig mcfg_;
  TrainConfig tcfg_;
  const dataset::WindowSet& train_;
  const dataset::WindowSet* val_;
  model::ModelParams<float> params_;
  OptimizerState opt_;
  Rng dropout_rng_;
  std::uint64_t step_ = 0;
  std::size_t steps_per_epoch_ = 0;
  std::uint64_t cached_epoch_ = ~std::uint64_t{0};
  std::vector<std::size_t> order_;
  TrainLog log_;
};

}  // namespace neuroflag::train
