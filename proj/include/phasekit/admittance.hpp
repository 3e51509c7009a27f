#pragma once

#include <Eigen/Dense>

namespace phasekit {

/// Virtual mass-spring-damper gains per planar axis (x, z, theta).
struct AdmittanceParams {
  Eigen::Vector3d inertia;    // kg, kg, kg m^2
  Eigen::Vector3d damping;    // N s/m, N s/m, N m s/rad
  Eigen::Vector3d stiffness;  // N/m, N/m, N m/rad

  void validate() const;
};

/// D = 2 sqrt(M K) per axis.
AdmittanceParams critically_damped(const Eigen::Vector3d& inertia,
                                   const Eigen::Vector3d& stiffness);

/// Planar rigid state: pose (x m, z m, theta rad), velocity, acceleration.
struct RobotState {
  Eigen::Vector3d pose = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  Eigen::Vector3d acceleration = Eigen::Vector3d::Zero();
};

/// Wraps to (-pi, pi].
double wrap_angle(double theta);

/// One controller step of the virtual dynamics
///   pdd = -M^-1 (D pd_err + K p_err) + M^-1 f_ext
/// with zero target velocity, integrated by semi-implicit Euler using
/// internal substeps (h <= 2.5 ms) so the 100 Hz step stays within 1% of
/// the continuous response.
RobotState admittance_step(const RobotState& state, const Eigen::Vector3d& target,
                           const Eigen::Vector3d& wrench, const AdmittanceParams& params,
                           double dt);

}  // namespace phasekit
