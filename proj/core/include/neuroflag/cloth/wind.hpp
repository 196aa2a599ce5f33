#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

#include "neuroflag/cloth/forces.hpp"

namespace neuroflag::cloth {

/// Rippling wind field (sin(phi_x), 0, cos(phi_z)) * strength.
///
/// Phases advance in time and along the grid diagonal:
///   phi_x(i, j, t) = phase_x + time_rate_x * t * dt + space_rate_x * (i + j) * spacing
/// and likewise for phi_z.
struct WindParams {
  double strength = 0.0;
  double phase_x = 0.0;
  double phase_z = 0.0;
  double time_rate_x = 0.3;
  double time_rate_z = 0.4;
  double space_rate_x = 0.5;
  double space_rate_z = 0.35;
};

enum class WindCondition : std::uint8_t { strong = 0, moderate = 1, none = 2 };

inline constexpr std::array<WindCondition, 3> kAllWindConditions{WindCondition::strong, WindCondition::moderate,
                                                                 WindCondition::none};

std::string_view to_string(WindCondition c);
std::optional<WindCondition> parse_wind_condition(std::string_view name);

/// Default strength for each condition: strong 1.0, moderate 0.45, none 0.0.
double default_strength(WindCondition c);
WindParams default_wind(WindCondition c);

/// Force for explicit phases.
Vec3 wind_force(double strength, double phase_x, double phase_z);

/// Force on grid particle (row, col) at simulation step `step`.
Vec3 wind_force(const WindParams& wind, std::size_t row, std::size_t col, std::uint64_t step, double dt,
                double spacing);

}  // namespace neuroflag::cloth
