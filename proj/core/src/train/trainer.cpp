#include "neuroflag/train/trainer.hpp"

#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "neuroflag/error.hpp"
#include "neuroflag/fingerprint.hpp"
#include "neuroflag/model/animator.hpp"

namespace neuroflag::train {

namespace {

constexpr std::uint64_t kDropoutStream = 1;
constexpr std::uint64_t kShuffleStreamBase = 1000;

}  // namespace

void TrainConfig::validate() const {
  if (batch_size == 0) throw ParameterError("batch_size must be >= 1");
  if (!(huber_delta > 0.0)) throw ParameterError("huber_delta must be positive");
  adam.validate();
  if (epochs == 0 && max_steps == 0) throw ParameterError("either epochs or max_steps must be positive");
  if (val_interval == 0) throw ParameterError("val_interval must be >= 1");
}

std::string TrainConfig::describe() const {
  return fmt::format("batch={} delta={:a} lr={:a} b1={:a} b2={:a} eps={:a} epochs={} max_steps={} val={} ckpt={} seed={}",
                     batch_size, huber_delta, adam.learning_rate, adam.beta1, adam.beta2, adam.epsilon, epochs,
                     max_steps, val_interval, checkpoint_interval, seed);
}

std::uint64_t TrainConfig::fingerprint() const { return fnv1a64(describe()); }

std::string TrainLog::to_csv(bool header) const {
  std::string out = header ? "step,train_loss,val_loss\n" : "";
  for (const auto& e : entries) {
    out += fmt::format("{},{:.9g},", e.step, e.train_loss);
    if (e.val_loss) out += fmt::format("{:.9g}", *e.val_loss);
    out += '\n';
  }
  return out;
}

Batch make_batch(const dataset::WindowSet& windows, std::span<const std::size_t> indices) {
  const std::size_t b = indices.size();
  const std::size_t ff = windows.frame_floats();
  const std::size_t hist = windows.history_len() * ff;
  std::vector<float> x(b * hist);
  std::vector<float> y(b * ff);
  for (std::size_t k = 0; k < b; ++k) {
    const auto w = windows[indices[k]];
    std::copy(w.history.begin(), w.history.end(), x.begin() + static_cast<std::ptrdiff_t>(k * hist));
    std::copy(w.target.begin(), w.target.end(), y.begin() + static_cast<std::ptrdiff_t>(k * ff));
  }
  const std::size_t r = windows.rows(), c = windows.cols();
  return Batch{tensor::Tensor::from_data({b, windows.history_len(), r, c, 3}, std::move(x)),
               tensor::Tensor::from_data({b, 1, r, c, 3}, std::move(y))};
}

double evaluate_loss(const model::ModelParams<float>& params, const model::ModelConfig& mcfg,
                     const dataset::WindowSet& windows, double delta, std::size_t batch_size) {
  if (windows.size() == 0) throw UsageError("evaluate_loss: empty window set");
  tensor::NoGradGuard no_grad;
  double weighted = 0.0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < windows.size(); start += batch_size) {
    const std::size_t end = std::min(windows.size(), start + batch_size);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const auto batch = make_batch(windows, idx);
    const auto pred = model::forward(params, mcfg, batch.inputs);
    weighted += static_cast<double>(huber_loss(pred, batch.targets, delta).item()) * static_cast<double>(idx.size());
  }
  return weighted / static_cast<double>(windows.size());
}

Trainer::Trainer(model::ModelConfig mcfg, TrainConfig tcfg, const dataset::WindowSet& train,
                 const dataset::WindowSet* val)
    : mcfg_(mcfg),
      tcfg_(tcfg),
      train_(train),
      val_(val),
      params_(model::init_params<float>(mcfg, tcfg.seed)),
      dropout_rng_(derive_seed(tcfg.seed, kDropoutStream)) {
  mcfg_.validate();
  tcfg_.validate();
  if (train.rows() != mcfg.grid_rows || train.cols() != mcfg.grid_cols || train.history_len() != mcfg.history_len) {
    throw ConfigMismatchError("training windows do not match the model's grid or history length");
  }
  steps_per_epoch_ = train.size() / tcfg.batch_size;
  if (steps_per_epoch_ == 0) {
    throw UsageError(fmt::format("{} training windows cannot fill one batch of {}", train.size(), tcfg.batch_size));
  }
  opt_ = make_optimizer_state(params_);
}

void Trainer::resume(const model::Checkpoint& ckpt) {
  if (!(ckpt.config == mcfg_)) {
    throw ConfigMismatchError("checkpoint config {" + ckpt.config.describe() + "} differs from {" + mcfg_.describe() +
                              "}");
  }
  params_ = ckpt.params.clone();
  params_.set_requires_grad(true);
  opt_ = ckpt.optimizer.empty() ? make_optimizer_state(params_) : ckpt.optimizer;
  step_ = ckpt.step;
  if (!ckpt.rng_state.empty()) dropout_rng_.restore(ckpt.rng_state);
  log_.entries.clear();
}

std::size_t Trainer::total_steps() const {
  return tcfg_.max_steps != 0 ? tcfg_.max_steps : tcfg_.epochs * steps_per_epoch_;
}

std::span<const std::size_t> Trainer::batch_indices(std::uint64_t step) {
  const std::uint64_t epoch = step / steps_per_epoch_;
  if (epoch != cached_epoch_) {
    order_.resize(train_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    Rng rng(derive_seed(tcfg_.seed, kShuffleStreamBase + epoch));
    for (std::size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[rng.below(i)]);
    cached_epoch_ = epoch;
  }
  const std::size_t pos = static_cast<std::size_t>(step % steps_per_epoch_) * tcfg_.batch_size;
  return std::span<const std::size_t>(order_).subspan(pos, tcfg_.batch_size);
}

double Trainer::step() {
  std::optional<double> val;
  if (val_ != nullptr && step_ % tcfg_.val_interval == 0) val = validation_loss();

  const auto batch = make_batch(train_, batch_indices(step_));
  params_.zero_grad();
  auto& tape = tensor::GradTape<float>::current();
  const Rng rng_before = dropout_rng_;
  double loss_value = 0.0;
  try {
    model::ForwardOptions opts{true, &dropout_rng_};
    const auto pred = model::forward(params_, mcfg_, batch.inputs, opts);
    const auto loss = huber_loss(pred, batch.targets, tcfg_.huber_delta);
    loss_value = loss.item();
    if (!std::isfinite(loss_value)) throw TrainingDivergedError("non-finite training loss", step_);
    tensor::backward(loss);
  } catch (const NumericFailureError& e) {
    tape.clear();
    dropout_rng_ = rng_before;
    throw TrainingDivergedError(e.what(), step_);
  } catch (...) {
    tape.clear();
    dropout_rng_ = rng_before;
    throw;
  }
  adam_step(params_, opt_, tcfg_.adam);
  log_.entries.push_back(TrainLogEntry{step_, loss_value, val});
  ++step_;
  return loss_value;
}

TrainLog Trainer::run(const std::function<void(const model::Checkpoint&)>& on_checkpoint) {
  const std::size_t total = total_steps();
  while (step_ < total) {
    step();
    if (on_checkpoint && tcfg_.checkpoint_interval != 0 && step_ % tcfg_.checkpoint_interval == 0 && step_ < total) {
      on_checkpoint(checkpoint());
    }
  }
  return log_;
}

double Trainer::validation_loss() const {
  if (val_ == nullptr) throw UsageError("Trainer has no validation set");
  return evaluate_loss(params_, mcfg_, *val_, tcfg_.huber_delta, tcfg_.batch_size);
}

model::Checkpoint Trainer::checkpoint() const {
  model::Checkpoint c;
  c.config = mcfg_;
  c.params = params_.clone();
  c.optimizer = opt_;
  c.step = step_;
  c.rng_state = dropout_rng_.serialize();
  c.train_fingerprint = tcfg_.fingerprint();
  return c;
}

}  // namespace neuroflag::train
