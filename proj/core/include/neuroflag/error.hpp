#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace neuroflag {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A scalar parameter is outside its legal range (eps <= 0, dropout rate >= 1, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// The API was called in a state that violates its precondition.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Reading or writing a file failed at the OS level. The message names the path.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A file on disk is malformed. `offset()` is the byte position where reading failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

/// A function evaluated twice at the same point returned different values.
class NondeterminismError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint and requested model configuration differ.
class ConfigMismatchError : public Error {
 public:
  using Error::Error;
};

/// Base for the numerical-divergence family (CLI exit code 3).
class DivergenceError : public Error {
 public:
  using Error::Error;
};

class SimulationDivergedError : public DivergenceError {
 public:
  SimulationDivergedError(const std::string& what, std::uint64_t step)
      : DivergenceError(what + " at step " + std::to_string(step)), step_(step) {}
  std::uint64_t step() const noexcept { return step_; }

 private:
  std::uint64_t step_;
};

class NumericFailureError : public DivergenceError {
 public:
  NumericFailureError(const std::string& what, int layer)
      : DivergenceError(what + " (layer " + std::to_string(layer) + ")"), layer_(layer) {}
  /// Transformer block index, or -1 for the embedding stage, or num_layers for the head.
  int layer() const noexcept { return layer_; }

 private:
  int layer_;
};

class TrainingDivergedError : public DivergenceError {
 public:
  TrainingDivergedError(const std::string& what, std::uint64_t step)
      : DivergenceError(what + " at training step " + std::to_string(step)), step_(step) {}
  std::uint64_t step() const noexcept { return step_; }

 private:
  std::uint64_t step_;
};

class RolloutDivergedError : public DivergenceError {
 public:
  RolloutDivergedError(const std::string& what, std::size_t frame)
      : DivergenceError(what + " at rollout frame " + std::to_string(frame)), frame_(frame) {}
  std::size_t frame() const noexcept { return frame_; }

 private:
  std::size_t frame_;
};

}  // namespace neuroflag
