#pragma once

#include <Eigen/Core>

#include "neuroflag/error.hpp"

namespace neuroflag::cloth {

using Vec3 = Eigen::Vector3d;

/// Distances below this make the spring direction undefined.
inline constexpr double kDegenerateDistance = 1e-9;

class DegenerateSpringError : public Error {
 public:
  using Error::Error;
};

/// Hooke spring force acting on p from its partner q: K (L0 - |p-q|) (p-q)/|p-q|.
/// Pulls p toward q when stretched and pushes it away when compressed.
/// Throws DegenerateSpringError when |p-q| < kDegenerateDistance.
Vec3 spring_force(const Vec3& p, const Vec3& q, double rest_length, double stiffness);

/// Linear damper -D v.
inline Vec3 damper_force(const Vec3& velocity, double damping) { return -damping * velocity; }

/// (0, m g, 0); the sign of g sets the direction.
inline Vec3 gravity_force(double mass, double gravity) { return Vec3(0.0, mass * gravity, 0.0); }

}  // namespace neuroflag::cloth
