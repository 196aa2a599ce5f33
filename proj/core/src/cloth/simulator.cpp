#include "neuroflag/cloth/simulator.hpp"

#include <cmath>

#include "neuroflag/error.hpp"
#include "neuroflag/rng.hpp"

namespace neuroflag::cloth {

void ClothConfig::validate() const {
  const auto require = [](bool ok, const char* what) {
    if (!ok) throw ParameterError(std::string("cloth config: ") + what);
  };
  require(spring_constant > 0.0, "spring_constant must be > 0");
  require(damper_constant >= 0.0, "damper_constant must be >= 0");
  require(particle_mass > 0.0, "particle_mass must be > 0");
  require(std::isfinite(gravity), "gravity must be finite");
  require(dt > 0.0, "dt must be > 0");
  require(spacing > 0.0, "spacing must be > 0");
  require(rows >= 1 && cols >= 2, "grid needs at least one row and two columns");
  require(initial_jitter >= 0.0, "initial_jitter must be >= 0");
}

ClothState initial_state(const ClothConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ClothState s;
  s.rows = cfg.rows;
  s.cols = cfg.cols;
  s.positions.resize(cfg.rows * cfg.cols);
  s.velocities.assign(cfg.rows * cfg.cols, Vec3::Zero());
  Rng rng(seed);
  for (std::size_t i = 0; i < cfg.rows; ++i) {
    for (std::size_t j = 0; j < cfg.cols; ++j) {
      const double x = static_cast<double>(j) * cfg.spacing;
      const double y = static_cast<double>(cfg.rows - 1 - i) * cfg.spacing;
      double z = 0.0;
      if (j != 0 && cfg.initial_jitter > 0.0) z = cfg.initial_jitter * (2.0 * rng.uniform() - 1.0);
      s.positions[s.index(i, j)] = Vec3(x, y, z);
    }
  }
  return s;
}

ClothState step(const ClothState& state, const ClothConfig& cfg, const WindParams& wind, const SpringTopology& topo,
                StepDiagnostics* diagnostics) {
  const std::size_t n = state.positions.size();
  std::vector<Vec3> force(n, Vec3::Zero());

  for (const auto& s : topo.springs) {
    const Vec3& pa = state.positions[s.a];
    const Vec3& pb = state.positions[s.b];
    if ((pa - pb).norm() < kDegenerateDistance) {
      if (diagnostics) ++diagnostics->degenerate_springs;
      continue;
    }
    const Vec3 f = spring_force(pa, pb, s.rest_length, cfg.spring_constant);
    force[s.a] += f;
    force[s.b] -= f;
  }

  const Vec3 gravity = gravity_force(cfg.particle_mass, cfg.gravity);
  const double inv_mass = 1.0 / cfg.particle_mass;

  ClothState next = state;
  next.step_index = state.step_index + 1;
  for (std::size_t p = 0; p < n; ++p) {
    if (state.is_pole(p)) continue;
    const std::size_t row = p / state.cols;
    const std::size_t col = p % state.cols;
    const Vec3 total = force[p] + damper_force(state.velocities[p], cfg.damper_constant) + gravity +
                       wind_force(wind, row, col, state.step_index, cfg.dt, cfg.spacing);
    if (!total.allFinite()) {
      throw SimulationDivergedError("non-finite force on particle " + std::to_string(p), state.step_index);
    }
    next.velocities[p] = state.velocities[p] + total * (inv_mass * cfg.dt);
    next.positions[p] = state.positions[p] + next.velocities[p] * cfg.dt;
    if (!next.positions[p].allFinite()) {
      throw SimulationDivergedError("non-finite position on particle " + std::to_string(p), state.step_index);
    }
  }
  return next;
}

SimulationResult simulate(const ClothConfig& cfg, const WindParams& wind, const SpringTopology& topo,
                          std::size_t n_steps, std::uint64_t seed) {
  if (n_steps < 1) throw UsageError("simulate: n_steps must be >= 1");
  if (topo.rows != cfg.rows || topo.cols != cfg.cols) throw UsageError("simulate: topology does not match grid");
  ClothState state = initial_state(cfg, seed);
  StepDiagnostics diag;
  for (std::uint64_t k = 0; k < cfg.warmup_steps; ++k) state = step(state, cfg, wind, topo, &diag);

  SimulationResult result;
  result.states.reserve(n_steps);
  result.states.push_back(state);
  while (result.states.size() < n_steps) {
    state = step(state, cfg, wind, topo, &diag);
    result.states.push_back(state);
  }
  result.degenerate_springs = diag.degenerate_springs;
  return result;
}

double mechanical_energy(const ClothState& state, const ClothConfig& cfg, const SpringTopology& topo) {
  double kinetic = 0.0;
  for (const auto& v : state.velocities) kinetic += 0.5 * cfg.particle_mass * v.squaredNorm();
  double elastic = 0.0;
  for (const auto& s : topo.springs) {
    const double stretch = (state.positions[s.a] - state.positions[s.b]).norm() - s.rest_length;
    elastic += 0.5 * cfg.spring_constant * stretch * stretch;
  }
  return kinetic + elastic;
}

}  // namespace neuroflag::cloth
