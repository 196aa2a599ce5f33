#include "neuroflag/cloth/forces.hpp"

namespace neuroflag::cloth {

Vec3 spring_force(const Vec3& p, const Vec3& q, double rest_length, double stiffness) {
  const Vec3 d = p - q;
  const double len = d.norm();
  if (len < kDegenerateDistance) throw DegenerateSpringError("spring endpoints coincide");
  return stiffness * (rest_length - len) * (d / len);
}

}  // namespace neuroflag::cloth
