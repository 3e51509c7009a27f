#include "phasekit/enbip.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace phasekit {

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

void clamp_members(EnsembleState& ens) {
  for (int j = 0; j < ens.size(); ++j) {
    ens.members(j, 0) = clamp01(ens.members(j, 0));
    ens.members(j, 1) = std::max(ens.members(j, 1), 0.0);
  }
}

/// Upper bound on the max pairwise member distance from per-column ranges.
double ensemble_spread(const EnsembleState& ens) {
  double sum_sq = 0.0;
  for (int c = 0; c < ens.state_dim(); ++c) {
    const double range = ens.members.col(c).maxCoeff() - ens.members.col(c).minCoeff();
    sum_sq += range * range;
  }
  return std::sqrt(sum_sq);
}

void add_process_noise(EnsembleState& ens, const ProcessNoise& noise, Rng& rng) {
  const int B = ens.state_dim() - 2;
  for (int j = 0; j < ens.size(); ++j) {
    if (noise.phase > 0.0) ens.members(j, 0) += rng.normal(0.0, noise.phase);
    if (noise.phase_velocity > 0.0) ens.members(j, 1) += rng.normal(0.0, noise.phase_velocity);
    if (noise.weights > 0.0) {
      for (int b = 0; b < B; ++b) ens.members(j, 2 + b) += rng.normal(0.0, noise.weights);
    }
  }
}

}  // namespace

EnsembleState init_ensemble(const TrajectoryModel& model, int ensemble_size, std::uint64_t seed) {
  model.validate();
  if (ensemble_size < 2) throw std::invalid_argument("init_ensemble: need at least 2 members");

  Rng rng(seed);
  const int B = model.basis.total_weights();
  EnsembleState ens;
  ens.members.resize(ensemble_size, 2 + B);

  const double vel_jitter = 0.1 * model.phase_vel_mean;
  for (int j = 0; j < ensemble_size; ++j) {
    const int row = rng.uniform_int(0, model.demo_count() - 1);
    ens.members(j, 0) = 0.0;
    const double base_vel = 1.0 / model.durations(rng.uniform_int(0, model.demo_count() - 1));
    ens.members(j, 1) = std::max(base_vel + rng.normal(0.0, vel_jitter), 0.0);
    ens.members.row(j).segment(2, B) = model.weights.row(row);
  }
  return ens;
}

void predict(EnsembleState& ens, double dt, const ProcessNoise& noise, Rng& rng) {
  if (!(dt > 0.0)) throw std::invalid_argument("predict: dt must be positive");
  for (int j = 0; j < ens.size(); ++j) {
    ens.members(j, 0) += ens.members(j, 1) * dt;
  }
  add_process_noise(ens, noise, rng);
  clamp_members(ens);
  ens.step += 1;
}

Eigen::MatrixXd observe_members(const EnsembleState& ens, const BasisLibrary& lib,
                                const std::vector<int>& active_channels) {
  if (active_channels.empty()) {
    throw std::invalid_argument("observe_members: empty channel mask");
  }
  const int E = ens.size();
  const int m = static_cast<int>(active_channels.size());
  Eigen::MatrixXd hx(E, m);
  for (int j = 0; j < E; ++j) {
    const double phase = ens.members(j, 0);  // nonlinearity: phase enters the basis
    const auto w = ens.members.row(j).segment(2, ens.state_dim() - 2).transpose();
    for (int k = 0; k < m; ++k) {
      hx(j, k) = reconstruct_dim(w, lib, active_channels[static_cast<std::size_t>(k)], phase);
    }
  }
  return hx;
}

namespace {

StateEstimate summarize(const EnsembleState& ens, const TrajectoryModel& model) {
  StateEstimate est;
  const int E = ens.size();
  const int B = ens.state_dim() - 2;
  est.phase_mean = ens.members.col(0).mean();
  est.phase_vel_mean = ens.members.col(1).mean();
  const double denom = static_cast<double>(E > 1 ? E - 1 : 1);
  est.phase_var = (ens.members.col(0).array() - est.phase_mean).square().sum() / denom;
  est.weight_mean = ens.members.middleCols(2, B).colwise().mean().transpose();

  est.predicted.resize(model.basis.dims());
  for (int d = 0; d < model.basis.dims(); ++d) {
    est.predicted(d) = reconstruct_dim(est.weight_mean, model.basis, d, est.phase_mean);
  }
  return est;
}

}  // namespace

StateEstimate update(EnsembleState& ens, const Observation& obs, const TrajectoryModel& model,
                     Rng& rng, const ProcessNoise& rejitter) {
  if (static_cast<int>(obs.active.size()) != model.basis.dims() ||
      obs.values.size() != model.basis.dims()) {
    throw std::invalid_argument("update: observation layout does not match model");
  }
  std::vector<int> active;
  const auto observable = model.observable_channels();
  for (int d : observable) {
    if (obs.active[static_cast<std::size_t>(d)]) active.push_back(d);
  }
  if (active.empty()) throw std::invalid_argument("update: no active observable channel");

  const int E = ens.size();
  const int m = static_cast<int>(active.size());
  const int n = ens.state_dim();
  const double denom = static_cast<double>(E - 1);

  // Degenerate ensembles carry no gradient; re-jitter once and continue.
  if (ensemble_spread(ens) < 1e-12) {
    add_process_noise(ens, rejitter, rng);
    ens.collapse_rejitters += 1;
  }

  Eigen::MatrixXd hx = observe_members(ens, model.basis, active);
  const Eigen::RowVectorXd hx_mean = hx.colwise().mean();
  Eigen::MatrixXd ha = hx.rowwise() - hx_mean;  // E x m deviations

  Eigen::VectorXd r_diag(m);
  for (int k = 0; k < m; ++k) r_diag(k) = model.observation_noise(active[static_cast<std::size_t>(k)]);

  Eigen::MatrixXd innovation_cov = (ha.transpose() * ha) / denom;  // paper calls this w_t
  innovation_cov.diagonal() += r_diag;

  const Eigen::RowVectorXd x_mean = ens.members.colwise().mean();
  Eigen::MatrixXd a = ens.members.rowwise() - x_mean;  // E x n state deviations
  Eigen::MatrixXd cross = (a.transpose() * ha) / denom;  // n x m

  // Gain K = cross * S^-1, solved as S K^T = cross^T with S symmetric.
  Eigen::MatrixXd gain;
  bool solved = false;
  for (int attempt = 0; attempt < 2 && !solved; ++attempt) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(innovation_cov);
    if (ldlt.info() == Eigen::Success) {
      gain = ldlt.solve(cross.transpose()).transpose();
      solved = gain.allFinite();
    }
    if (!solved) innovation_cov.diagonal().array() += 1e-9;
  }
  if (!solved) throw std::runtime_error("update: singular innovation covariance");

  Eigen::VectorXd y(m);
  for (int k = 0; k < m; ++k) y(k) = obs.values(active[static_cast<std::size_t>(k)]);

  // Stochastic perturbation: each member assimilates y + eta, eta ~ N(0, R).
  Eigen::VectorXd perturbed(m);
  for (int j = 0; j < E; ++j) {
    for (int k = 0; k < m; ++k) perturbed(k) = y(k) + rng.normal(0.0, std::sqrt(r_diag(k)));
    ens.members.row(j) += (gain * (perturbed - hx.row(j).transpose())).transpose();
  }
  clamp_members(ens);

  return summarize(ens, model);
}

StateEstimate estimate(const EnsembleState& ens, const TrajectoryModel& model) {
  return summarize(ens, model);
}

Eigen::VectorXd generate_control(const EnsembleState& ens, const TrajectoryModel& model,
                                 double lookahead) {
  const auto controls = model.control_channels();
  if (controls.empty()) throw std::invalid_argument("generate_control: model has no control channel");
  if (lookahead < 0.0) throw std::invalid_argument("generate_control: negative lookahead");

  const StateEstimate est = summarize(ens, model);
  const double phase = std::min(est.phase_mean + lookahead, 1.0);
  Eigen::VectorXd out(controls.size());
  for (std::size_t k = 0; k < controls.size(); ++k) {
    out(static_cast<int>(k)) = reconstruct_dim(est.weight_mean, model.basis, controls[k], phase);
  }
  return out;
}

EnbipFilter::EnbipFilter(const TrajectoryModel& model, const Options& opts)
    : model_(&model),
      state_(init_ensemble(model, opts.ensemble_size > 0 ? opts.ensemble_size : model.demo_count(),
                           opts.seed)),
      noise_(opts.noise),
      rng_(derive_seed(opts.seed, 0x51EB851Full)) {}

void EnbipFilter::predict(double dt) { phasekit::predict(state_, dt, noise_, rng_); }

StateEstimate EnbipFilter::update(const Observation& obs) {
  return phasekit::update(state_, obs, *model_, rng_, noise_);
}

StateEstimate EnbipFilter::estimate() const { return phasekit::estimate(state_, *model_); }

Eigen::VectorXd EnbipFilter::control(double lookahead) const {
  return phasekit::generate_control(state_, *model_, lookahead);
}

}  // namespace phasekit
