#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "phasekit/basis.hpp"
#include "phasekit/demonstration.hpp"

namespace phasekit {

/// Gaussian over basis weights with conditioning but no phase inference.
struct PrompModel {
  BasisLibrary basis;
  Eigen::VectorXd weight_mean;  // B
  Eigen::MatrixXd weight_cov;   // B x B, PSD up to round-off
  std::vector<ChannelInfo> channels;
  Eigen::VectorXd durations;  // training durations, seconds
  double mean_duration = 0.0;
};

/// Sample mean/covariance of per-demo weight rows, regularized with
/// 1e-8 on the diagonal.
PrompModel promp_fit(const std::vector<Demonstration>& demos, const BasisLibrary& lib,
                     double ridge);

/// Gaussian conditioning on y = Phi_phi^T w + noise at an externally
/// supplied phase, restricted to the given channels.
PrompModel promp_condition(const PrompModel& m, const Eigen::VectorXd& values,
                           const std::vector<int>& active_channels, double phase,
                           const Eigen::VectorXd& noise_diag);

/// Fixed-clock policy: decode control channels from the weight mean at
/// phase clamp(t / duration, 0, 1).
Eigen::VectorXd promp_policy_step(const PrompModel& m, double t, double duration_estimate);

/// Monotone alignment: ordered (query, reference) index pairs.
struct WarpPath {
  std::vector<std::pair<int, int>> pairs;
  void validate(int query_len, int reference_len) const;
};

struct DtwResult {
  WarpPath path;
  double cost = 0.0;
};

/// Classic O(Tr*Tq) dynamic program with Euclidean point distance over
/// columns. Both matrices are channels x time.
DtwResult dtw_align(const Eigen::MatrixXd& reference, const Eigen::MatrixXd& query);

/// Time-warps each demonstration onto the reference demonstration's
/// timeline using DTW over the given channels (ProMP's external temporal
/// alignment). Frames of the query mapped to the same reference step are
/// averaged.
std::vector<Demonstration> align_demos_dtw(const std::vector<Demonstration>& demos,
                                           int reference_index,
                                           const std::vector<int>& distance_channels);

/// k-nearest-neighbor regression from observed channels to the next-step
/// control: behavioral cloning without temporal state.
struct BcPolicy {
  Eigen::MatrixXd inputs;   // M x |observed|
  Eigen::MatrixXd targets;  // M x |control|
  std::vector<int> observed_channels;
  std::vector<int> control_channels;
  int k = 5;
};

BcPolicy bc_fit(const std::vector<Demonstration>& demos, int k = 5);

/// Inverse-distance weighted average of the k nearest training controls;
/// exact matches return their stored control directly.
Eigen::VectorXd bc_policy_step(const BcPolicy& policy, const Eigen::VectorXd& observation);

}  // namespace phasekit
