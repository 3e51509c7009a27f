#pragma once

// Test-only oracles, independent of the implementation paths they check.

#include <Eigen/Dense>
#include <limits>
#include <vector>

#include "phasekit/enbip.hpp"
#include "phasekit/rng.hpp"

namespace phasekit::testing {

/// Model whose observation operator is the identity on weights when every
/// member sits at phase 0.5: one basis function per channel, centered
/// there. Turns the ensemble update into a linear-gaussian problem, H = I.
inline TrajectoryModel identity_model(int dims, double obs_var) {
  TrajectoryModel model;
  model.basis.counts.assign(static_cast<std::size_t>(dims), 1);
  for (int d = 0; d < dims; ++d) {
    model.basis.centers.push_back(Eigen::VectorXd::Constant(1, 0.5));
    model.basis.widths.push_back(Eigen::VectorXd::Constant(1, 0.25));
    model.channels.push_back({"w" + std::to_string(d), "m", ChannelRole::ObservedSensor});
    model.channel_usable.push_back(true);
  }
  model.weights = Eigen::MatrixXd::Zero(2, dims);
  model.durations = Eigen::VectorXd::Constant(2, 10.0);
  model.phase_vel_mean = 0.1;
  model.phase_vel_var = 0.0;
  model.observation_noise = Eigen::VectorXd::Constant(dims, obs_var);
  return model;
}

/// Textbook dense Kalman filter.
struct KalmanOracle {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  void predict(const Eigen::MatrixXd& q) { cov += q; }
  void update(const Eigen::VectorXd& y, const Eigen::MatrixXd& r) {
    const Eigen::MatrixXd s = cov + r;
    const Eigen::MatrixXd k = cov * s.inverse();
    mean += k * (y - mean);
    cov = (Eigen::MatrixXd::Identity(mean.size(), mean.size()) - k) * cov;
  }
};

struct OracleErrors {
  double mean_rel = 0.0;
  double cov_rel = 0.0;
};

/// Runs the production ensemble update against the exact filter on a
/// shared synthetic linear-gaussian sequence.
inline OracleErrors enkf_vs_kf(int ensemble_size, std::uint64_t seed, int steps = 25) {
  const int dims = 4;
  const double q_std = 0.05;
  const double r_std = 0.3;
  const Eigen::VectorXd mu0 = (Eigen::VectorXd(dims) << 1.0, 2.0, -1.0, 0.5).finished();

  Rng truth_rng(derive_seed(seed, 0x0DDC));
  Eigen::VectorXd truth = mu0;
  for (int d = 0; d < dims; ++d) truth(d) += std::sqrt(0.5) * truth_rng.normal();
  std::vector<Eigen::VectorXd> obs;
  for (int t = 0; t < steps; ++t) {
    for (int d = 0; d < dims; ++d) truth(d) += q_std * truth_rng.normal();
    Eigen::VectorXd y = truth;
    for (int d = 0; d < dims; ++d) y(d) += r_std * truth_rng.normal();
    obs.push_back(y);
  }

  KalmanOracle kf{mu0, 0.5 * Eigen::MatrixXd::Identity(dims, dims)};

  const TrajectoryModel model = identity_model(dims, r_std * r_std);
  EnsembleState ens;
  ens.members.resize(ensemble_size, 2 + dims);
  Rng init_rng(derive_seed(seed, 0x1217));
  for (int j = 0; j < ensemble_size; ++j) {
    ens.members(j, 0) = 0.5;  // pinned phase: h is the identity
    ens.members(j, 1) = 0.0;
    for (int d = 0; d < dims; ++d) {
      ens.members(j, 2 + d) = mu0(d) + std::sqrt(0.5) * init_rng.normal();
    }
  }

  ProcessNoise noise;
  noise.phase = 0.0;
  noise.phase_velocity = 0.0;
  noise.weights = q_std;
  Rng filter_rng(derive_seed(seed, 0xF12A));

  Observation packet;
  packet.values = Eigen::VectorXd::Zero(dims);
  packet.active.assign(static_cast<std::size_t>(dims), true);

  StateEstimate est;
  for (int t = 0; t < steps; ++t) {
    predict(ens, 1.0, noise, filter_rng);
    kf.predict(q_std * q_std * Eigen::MatrixXd::Identity(dims, dims));
    packet.values = obs[static_cast<std::size_t>(t)];
    est = update(ens, packet, model, filter_rng);
    kf.update(packet.values, r_std * r_std * Eigen::MatrixXd::Identity(dims, dims));
  }

  const Eigen::VectorXd enkf_mean = est.weight_mean;
  Eigen::MatrixXd centered = ens.members.rightCols(dims);
  centered.rowwise() -= enkf_mean.transpose();
  const Eigen::MatrixXd enkf_cov =
      centered.transpose() * centered / static_cast<double>(ensemble_size - 1);

  OracleErrors out;
  out.mean_rel = (enkf_mean - kf.mean).norm() / kf.mean.norm();
  out.cov_rel = (enkf_cov - kf.cov).norm() / kf.cov.norm();
  return out;
}

/// Exhaustive minimum over all admissible monotone warp paths.
inline double brute_force_dtw(const Eigen::MatrixXd& reference, const Eigen::MatrixXd& query) {
  const int Tr = static_cast<int>(reference.cols());
  const int Tq = static_cast<int>(query.cols());
  auto dist = [&](int i, int j) { return (query.col(i) - reference.col(j)).norm(); };

  double best = std::numeric_limits<double>::infinity();
  struct Frame {
    int i, j;
    double cost;
  };
  std::vector<Frame> stack{{0, 0, dist(0, 0)}};
  while (!stack.empty()) {
    const Frame f = stack.back();
    stack.pop_back();
    if (f.i == Tq - 1 && f.j == Tr - 1) {
      best = std::min(best, f.cost);
      continue;
    }
    if (f.i + 1 < Tq && f.j + 1 < Tr) {
      stack.push_back({f.i + 1, f.j + 1, f.cost + dist(f.i + 1, f.j + 1)});
    }
    if (f.i + 1 < Tq) stack.push_back({f.i + 1, f.j, f.cost + dist(f.i + 1, f.j)});
    if (f.j + 1 < Tr) stack.push_back({f.i, f.j + 1, f.cost + dist(f.i, f.j + 1)});
  }
  return best;
}

}  // namespace phasekit::testing
