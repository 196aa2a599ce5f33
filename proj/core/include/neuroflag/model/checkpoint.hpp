#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "neuroflag/model/config.hpp"
#include "neuroflag/model/params.hpp"
#include "neuroflag/train/optimizer_state.hpp"

// NFCK checkpoint: config, named-tensor directory, packed little-endian floats.
// Layout is documented in docs/FORMATS.md.
namespace neuroflag::model {

inline constexpr char kCheckpointMagic[4] = {'N', 'F', 'C', 'K'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  ModelParams<float> params;
  /// Empty for inference-only checkpoints.
  train::OptimizerState optimizer;
  std::uint64_t step = 0;
  /// Serialized dropout RNG; empty when absent.
  std::string rng_state;
  /// Fingerprint of the training configuration that produced the file.
  std::uint64_t train_fingerprint = 0;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
/// Throws FormatError on any malformed content.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
/// When `expected` is given, a differing stored config raises ConfigMismatchError.
Checkpoint load_checkpoint(const std::string& path, const ModelConfig* expected = nullptr);

}  // namespace neuroflag::model
