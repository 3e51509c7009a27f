#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "phasekit/model.hpp"
#include "phasekit/rng.hpp"

namespace phasekit {

/// Per-step additive noise applied during prediction (standard deviations).
struct ProcessNoise {
  double phase = 0.0;
  double phase_velocity = 1e-4;
  double weights = 1e-4;
};

/// Ensemble over joint states [phase, phase velocity, weights]; the
/// filter's entire belief. Column 0 is phase, column 1 phase velocity,
/// the remainder the weight layout of the basis library.
struct EnsembleState {
  Eigen::MatrixXd members;  // E x (2 + B)
  int step = 0;
  int collapse_rejitters = 0;  // times the degenerate-ensemble guard fired

  int size() const { return static_cast<int>(members.rows()); }
  int state_dim() const { return static_cast<int>(members.cols()); }

  Eigen::VectorXd phases() const { return members.col(0); }
  Eigen::VectorXd phase_velocities() const { return members.col(1); }
};

/// One sensor sample: values aligned with the model's channel layout plus
/// an active mask selecting which entries are present.
struct Observation {
  Eigen::VectorXd values;    // size D; only active entries are read
  std::vector<bool> active;  // size D
  double timestamp = 0.0;
};

/// Posterior summary: ensemble mean/variance of the temporal state plus
/// the decoded observation prediction at the mean.
struct StateEstimate {
  double phase_mean = 0.0;
  double phase_var = 0.0;
  double phase_vel_mean = 0.0;
  Eigen::VectorXd weight_mean;  // B
  Eigen::VectorXd predicted;    // per channel, decoded at mean phase / mean weights
};

/// Weight blocks sampled with replacement from the model's demonstration
/// rows; phase 0; phase velocity sampled from reciprocal durations with
/// 10% jitter.
EnsembleState init_ensemble(const TrajectoryModel& model, int ensemble_size, std::uint64_t seed);

/// Constant-velocity transition: phase += velocity * dt plus noise, then
/// clamp phase to [0,1] and velocity to >= 0.
void predict(EnsembleState& ens, double dt, const ProcessNoise& noise, Rng& rng);

/// Observation operator applied per member: reconstruct the active
/// channels at the member's own phase. Rows are members.
Eigen::MatrixXd observe_members(const EnsembleState& ens, const BasisLibrary& lib,
                                const std::vector<int>& active_channels);

/// Stochastic-perturbation ensemble Kalman update. Returns the posterior
/// summary after the correction. `rejitter` is the noise used by the
/// degenerate-ensemble guard.
StateEstimate update(EnsembleState& ens, const Observation& obs, const TrajectoryModel& model,
                     Rng& rng, const ProcessNoise& rejitter = ProcessNoise{});

StateEstimate estimate(const EnsembleState& ens, const TrajectoryModel& model);

/// Decode control channels from the mean weights at
/// min(mean phase + lookahead, 1): the admittance controller's target.
Eigen::VectorXd generate_control(const EnsembleState& ens, const TrajectoryModel& model,
                                 double lookahead);

/// Single-owner convenience wrapper tying ensemble, model, noise spec and
/// RNG stream together for sequential filtering.
class EnbipFilter {
 public:
  struct Options {
    int ensemble_size = 0;  // 0: one member per demonstration
    ProcessNoise noise;
    std::uint64_t seed = 0;
  };

  EnbipFilter(const TrajectoryModel& model, const Options& opts);

  void predict(double dt);
  StateEstimate update(const Observation& obs);
  StateEstimate estimate() const;
  Eigen::VectorXd control(double lookahead) const;

  const EnsembleState& state() const { return state_; }
  EnsembleState& state() { return state_; }
  const TrajectoryModel& model() const { return *model_; }

 private:
  const TrajectoryModel* model_;  // not owned; must outlive the filter
  EnsembleState state_;
  ProcessNoise noise_;
  Rng rng_;
};

}  // namespace phasekit
