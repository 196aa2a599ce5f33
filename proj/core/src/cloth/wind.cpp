#include "neuroflag/cloth/wind.hpp"

#include <cmath>

namespace neuroflag::cloth {

std::string_view to_string(WindCondition c) {
  switch (c) {
    case WindCondition::strong:
      return "strong";
    case WindCondition::moderate:
      return "moderate";
    case WindCondition::none:
      return "none";
  }
  return "unknown";
}

std::optional<WindCondition> parse_wind_condition(std::string_view name) {
  for (auto c : kAllWindConditions) {
    if (to_string(c) == name) return c;
  }
  return std::nullopt;
}

double default_strength(WindCondition c) {
  switch (c) {
    case WindCondition::strong:
      return 1.0;
    case WindCondition::moderate:
      return 0.45;
    case WindCondition::none:
      return 0.0;
  }
  return 0.0;
}

WindParams default_wind(WindCondition c) {
  WindParams wp;
  wp.strength = default_strength(c);
  return wp;
}

Vec3 wind_force(double strength, double phase_x, double phase_z) {
  return Vec3(std::sin(phase_x), 0.0, std::cos(phase_z)) * strength;
}

Vec3 wind_force(const WindParams& wind, std::size_t row, std::size_t col, std::uint64_t step, double dt,
                double spacing) {
  const double t = static_cast<double>(step) * dt;
  const double s = static_cast<double>(row + col) * spacing;
  const double phi_x = wind.phase_x + wind.time_rate_x * t + wind.space_rate_x * s;
  const double phi_z = wind.phase_z + wind.time_rate_z * t + wind.space_rate_z * s;
  return wind_force(wind.strength, phi_x, phi_z);
}

}  // namespace neuroflag::cloth
