#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "neuroflag/cloth/forces.hpp"
#include "neuroflag/cloth/topology.hpp"
#include "neuroflag/cloth/wind.hpp"

namespace neuroflag::cloth {

/// Flag grid size used by the dataset and model.
inline constexpr std::size_t kFlagRows = 11;
inline constexpr std::size_t kFlagCols = 11;

struct ClothConfig {
  double spring_constant = 80.0;
  double damper_constant = 0.6;
  double particle_mass = 1.0;
  /// y is up, so a negative value pulls the flag down.
  double gravity = -9.8;
  double dt = 0.01;
  double spacing = 0.1;
  std::size_t rows = kFlagRows;
  std::size_t cols = kFlagCols;
  /// Amplitude of the seeded out-of-plane jitter applied to free particles at t = 0.
  double initial_jitter = 1e-3;
  /// Steps simulated and discarded before `simulate` starts recording.
  std::uint64_t warmup_steps = 500;

  /// Throws ParameterError naming the first constraint that fails.
  void validate() const;
};

/// Particle positions and velocities. Column 0 is attached to the pole.
struct ClothState {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Vec3> positions;
  std::vector<Vec3> velocities;
  std::uint64_t step_index = 0;

  std::size_t index(std::size_t row, std::size_t col) const { return row * cols + col; }
  const Vec3& position(std::size_t row, std::size_t col) const { return positions[index(row, col)]; }
  bool is_pole(std::size_t particle) const { return particle % cols == 0; }
};

struct StepDiagnostics {
  /// Springs skipped because their endpoints (nearly) coincided.
  std::uint64_t degenerate_springs = 0;
};

/// Flat grid in the x-y plane hanging from the pole at x = 0, top row highest.
/// Free particles get z jitter drawn from `seed`.
ClothState initial_state(const ClothConfig& cfg, std::uint64_t seed);

/// One semi-implicit Euler step: v += F/m dt, then x += v dt, for every free particle.
/// Throws SimulationDivergedError if any force or coordinate becomes non-finite.
ClothState step(const ClothState& state, const ClothConfig& cfg, const WindParams& wind, const SpringTopology& topo,
                StepDiagnostics* diagnostics = nullptr);

struct SimulationResult {
  std::vector<ClothState> states;
  std::uint64_t degenerate_springs = 0;
};

/// Runs cfg.warmup_steps unrecorded steps, then records `n_steps` successive states.
SimulationResult simulate(const ClothConfig& cfg, const WindParams& wind, const SpringTopology& topo,
                          std::size_t n_steps, std::uint64_t seed);

/// Kinetic energy plus elastic energy sum 1/2 K (L - L0)^2 over all springs.
double mechanical_energy(const ClothState& state, const ClothConfig& cfg, const SpringTopology& topo);

}  // namespace neuroflag::cloth
