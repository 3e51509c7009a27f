#include "phasekit/admittance.hpp"

#include <cmath>
#include <stdexcept>

namespace phasekit {

void AdmittanceParams::validate() const {
  for (int i = 0; i < 3; ++i) {
    if (!(inertia(i) > 0.0) || !(damping(i) > 0.0) || !(stiffness(i) > 0.0)) {
      throw std::invalid_argument("admittance params must be positive");
    }
  }
}

AdmittanceParams critically_damped(const Eigen::Vector3d& inertia,
                                   const Eigen::Vector3d& stiffness) {
  AdmittanceParams p;
  p.inertia = inertia;
  p.stiffness = stiffness;
  p.damping = 2.0 * (inertia.array() * stiffness.array()).sqrt();
  p.validate();
  return p;
}

double wrap_angle(double theta) {
  theta = std::fmod(theta + M_PI, 2.0 * M_PI);
  if (theta <= 0.0) theta += 2.0 * M_PI;
  return theta - M_PI;
}

RobotState admittance_step(const RobotState& state, const Eigen::Vector3d& target,
                           const Eigen::Vector3d& wrench, const AdmittanceParams& params,
                           double dt) {
  params.validate();
  if (!(dt > 0.0) || dt > 0.1) throw std::invalid_argument("admittance_step: dt outside (0, 0.1]");
  if (!state.pose.allFinite() || !state.velocity.allFinite() || !target.allFinite() ||
      !wrench.allFinite()) {
    throw std::invalid_argument("admittance_step: non-finite input");
  }

  constexpr double kMaxSubstep = 2.5e-3;
  const int substeps = static_cast<int>(std::ceil(dt / kMaxSubstep));
  const double h = dt / static_cast<double>(substeps);

  RobotState out = state;
  for (int s = 0; s < substeps; ++s) {
    Eigen::Vector3d err = out.pose - target;
    err(2) = wrap_angle(err(2));
    out.acceleration = (-(params.damping.array() * out.velocity.array()) -
                        (params.stiffness.array() * err.array()) + wrench.array()) /
                       params.inertia.array();
    out.velocity += out.acceleration * h;
    out.pose += out.velocity * h;
  }
  out.pose(2) = wrap_angle(out.pose(2));
  return out;
}

}  // namespace phasekit
