#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "phasekit/admittance.hpp"
#include "phasekit/demonstration.hpp"
#include "phasekit/rng.hpp"

namespace phasekit {

/// Planar bracket with two grommets over two pins. Clearance fits only:
/// tolerance = grommet inner radius - pin radius must be positive. The
/// task frame puts the pin-top plane at z = 0; the base plate the pins
/// stand on sits seat_clearance below the full-insertion depth.
struct BracketGeometry {
  double grommet_spacing = 0.12;  // m, also the pin spacing
  double grommet_radius = 0.006;  // m (1 mm tolerance default)
  double pin_radius = 0.005;      // m
  double pin_top_height = 0.0;    // m, world z of the pin tops
  double insertion_depth = 0.02;  // m below the pin top for full seating
  double seat_clearance = 0.002;  // m between full depth and the base plate

  double tolerance() const { return grommet_radius - pin_radius; }
  double seat_height() const { return pin_top_height - insertion_depth - seat_clearance; }
  void validate() const;
};

struct ContactParams {
  double stiffness = 5000.0;  // N/m
  double damping = 50.0;      // N s/m
  double friction = 0.3;      // Coulomb coefficient

  void validate() const;
};

/// One disturbance window. Gaussian windows draw their force once per
/// episode; fixed windows apply `mean` directly.
struct PerturbationWindow {
  double start = 0.0;  // s
  double end = 0.0;    // s
  bool gaussian = false;
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();    // N, N, N m
  Eigen::Vector3d stddev = Eigen::Vector3d::Zero();  // gaussian only
};

/// Additive gaussian noise on sensed pose/wrench (standard deviations;
/// zero by default so readings are exact).
struct SensorNoise {
  double position = 0.0;  // m
  double rotation = 0.0;  // rad
  double force = 0.0;     // N
  double torque = 0.0;    // N m
};

struct SensorReading {
  Eigen::Vector3d pose = Eigen::Vector3d::Zero();    // x, z, theta
  Eigen::Vector3d wrench = Eigen::Vector3d::Zero();  // f_x, f_z, tau
  double timestamp = 0.0;
};

struct WorldConfig {
  BracketGeometry geometry;
  ContactParams contact;
  AdmittanceParams admittance;
  std::vector<PerturbationWindow> perturbations;
  SensorNoise sensor_noise;
  double wrench_filter_hz = 2.5;  // first-order low-pass on sensed wrench; 0 disables
  double timestep = 0.01;         // s

  void validate() const;
};

/// Default compliance for the simulated arm: soft laterally, stiffer
/// vertically, critically damped.
AdmittanceParams default_admittance();

/// World defaults for the named tolerance variant ("1mm" or "5mm"),
/// without perturbations.
WorldConfig make_world_config(const std::string& tolerance_variant);

/// The disturbance window used in the phase-progression experiments:
/// horizontal force over 4.5-7.5 s drawn from a gaussian with mean 1.75 N
/// and variance 0.5 N^2.
PerturbationWindow default_disturbance();

/// Repulsive penalty contact between the bracket's grommets and the pins.
/// For each pair the smaller of the vertical (plate on pin top) and
/// lateral (shaft on grommet rim) penetrations decides the contact normal;
/// Coulomb friction opposes tangential sliding. Returns (f_x, f_z, tau)
/// acting on the bracket at its origin.
Eigen::Vector3d contact_wrench(const BracketGeometry& geometry, const ContactParams& contact,
                               const RobotState& bracket);

/// Planar insertion world. One instance per trial; stepping is
/// deterministic given (config, seed, commands).
class InsertionWorld {
 public:
  InsertionWorld(const WorldConfig& config, std::uint64_t seed);

  /// Places the bracket (at rest) and draws this episode's perturbation
  /// forces.
  void reset(const Eigen::Vector3d& start_pose);

  /// Advances one timestep under the commanded target pose; returns the
  /// sensor reading taken during the step.
  SensorReading step(const Eigen::Vector3d& commanded_target);

  /// True once both grommets are seated within tolerance at full depth
  /// and the sensed wrench has stayed below the quiescence threshold
  /// (1 N, 0.1 N m) for 0.25 s.
  bool success() const { return success_; }

  /// Geometric insertion check without the quiescence window.
  bool inserted() const;

  double time() const { return clock_; }
  const RobotState& bracket() const { return bracket_; }
  const WorldConfig& config() const { return config_; }
  Eigen::Vector3d active_perturbation() const;
  Eigen::Vector3d last_wrench() const { return last_wrench_; }

 private:
  WorldConfig config_;
  RobotState bracket_;
  Rng rng_;
  std::uint64_t seed_;
  double clock_ = 0.0;
  double quiescent_time_ = 0.0;
  bool success_ = false;
  Eigen::Vector3d last_wrench_ = Eigen::Vector3d::Zero();
  Eigen::Vector3d filtered_wrench_ = Eigen::Vector3d::Zero();
  std::vector<Eigen::Vector3d> drawn_forces_;
};

struct DemoGenConfig {
  double start_margin = 0.01;   // m, uniform start randomization
  double start_height = 0.08;   // m above the pin tops
  double hover_height = 0.01;   // m above the pin tops at approach end
  double bezier_jitter = 0.02;  // m, std of mid control point jitter
  double approach_min = 5.0;    // s
  double approach_max = 7.0;    // s
  double descent_min = 2.5;     // s
  double descent_max = 3.5;     // s
  double press_duration = 2.5;  // s, seating press stage
  double press_force = 1.0;     // N, extra press amplitude (randomized +-25%)
  double hold_force = 0.6;      // N, residual seating force held at the end
  double slide_max = 0.00075;   // m, in-tolerance lateral slide during the press
  double record_rate = 25.0;    // Hz
  double rollout_timeout = 25.0;  // s before an attempt is abandoned
  int max_attempts = 20;
};

/// Rolls out a scripted approach (randomized cubic Bezier to above-pin
/// alignment) followed by a compliant descent and seating press,
/// recording pose, wrench and commanded target channels. Rollouts that
/// fail the success check advance the seed and retry.
Demonstration generate_demo(std::uint64_t seed, const WorldConfig& world_config,
                            const DemoGenConfig& gen_config);

/// The channel layout produced by generate_demo: pose x/z/theta and
/// wrench fx/fz/tau as observed sensors, target x/z/theta as controls.
std::vector<ChannelInfo> demo_channel_layout(bool mask_ft = false);

std::string world_config_to_json(const WorldConfig& config);
WorldConfig world_config_from_json(const std::string& json_text);
void save_world_config(const WorldConfig& config, const std::string& path);
WorldConfig load_world_config(const std::string& path);

}  // namespace phasekit
