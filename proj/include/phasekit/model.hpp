#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "phasekit/basis.hpp"
#include "phasekit/demonstration.hpp"

namespace phasekit {

/// Prior learned from demonstrations: per-demo weight rows plus the phase
/// velocity and observation-noise statistics the filter is seeded with.
struct TrajectoryModel {
  BasisLibrary basis;
  Eigen::MatrixXd weights;    // N x B, one row per demonstration
  Eigen::VectorXd durations;  // N, seconds
  double phase_vel_mean = 0.0;  // 1/s, statistics of 1/duration
  double phase_vel_var = 0.0;
  Eigen::VectorXd observation_noise;  // R diagonal, squared channel units
  std::vector<ChannelInfo> channels;
  std::vector<bool> channel_usable;  // false when the channel was masked at fit time

  int demo_count() const { return static_cast<int>(weights.rows()); }

  /// Channels the filter may condition on: observed-sensor role and usable.
  std::vector<int> observable_channels() const;
  std::vector<int> control_channels() const;

  void validate() const;
};

/// Decomposes every demonstration and aggregates weight rows, reciprocal
/// duration statistics, and residual-based noise estimates (floored at
/// 1e-8 in squared channel units).
TrajectoryModel fit_model(const std::vector<Demonstration>& demos, const BasisLibrary& lib,
                          double ridge);

void save_model(const TrajectoryModel& model, const std::string& path);
TrajectoryModel load_model(const std::string& path);

}  // namespace phasekit
