#include "phasekit/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace phasekit {

PrompModel promp_fit(const std::vector<Demonstration>& demos, const BasisLibrary& lib,
                     double ridge) {
  if (demos.size() < 2) throw std::invalid_argument("promp_fit: need at least two demonstrations");
  const int N = static_cast<int>(demos.size());
  const int B = lib.total_weights();

  Eigen::MatrixXd W(N, B);
  Eigen::VectorXd durations(N);
  for (int i = 0; i < N; ++i) {
    W.row(i) = decompose(demos[static_cast<std::size_t>(i)], lib, ridge).w.transpose();
    durations(i) = demos[static_cast<std::size_t>(i)].duration();
  }

  PrompModel m;
  m.basis = lib;
  m.channels = demos.front().channels;
  m.durations = durations;
  m.mean_duration = durations.mean();
  m.weight_mean = W.colwise().mean().transpose();
  Eigen::MatrixXd centered = W.rowwise() - m.weight_mean.transpose();
  m.weight_cov = (centered.transpose() * centered) / static_cast<double>(N - 1);
  m.weight_cov = 0.5 * (m.weight_cov + m.weight_cov.transpose());
  m.weight_cov.diagonal().array() += 1e-8;
  return m;
}

PrompModel promp_condition(const PrompModel& m, const Eigen::VectorXd& values,
                           const std::vector<int>& active_channels, double phase,
                           const Eigen::VectorXd& noise_diag) {
  if (active_channels.empty()) throw std::invalid_argument("promp_condition: no active channel");
  if (values.size() != static_cast<Eigen::Index>(active_channels.size()) ||
      noise_diag.size() != values.size()) {
    throw std::invalid_argument("promp_condition: value/noise shape mismatch");
  }

  const int B = m.basis.total_weights();
  const int mdim = static_cast<int>(active_channels.size());
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(mdim, B);
  for (int k = 0; k < mdim; ++k) {
    const int d = active_channels[static_cast<std::size_t>(k)];
    H.row(k).segment(m.basis.block_offset(d), m.basis.block_size(d)) =
        evaluate_basis(m.basis, d, phase).transpose();
  }

  Eigen::MatrixXd S = H * m.weight_cov * H.transpose();
  S.diagonal() += noise_diag;

  Eigen::MatrixXd gain;
  bool solved = false;
  for (int attempt = 0; attempt < 2 && !solved; ++attempt) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
    if (ldlt.info() == Eigen::Success) {
      gain = ldlt.solve(H * m.weight_cov).transpose();  // B x m
      solved = gain.allFinite();
    }
    if (!solved) S.diagonal().array() += 1e-9;
  }
  if (!solved) throw std::runtime_error("promp_condition: singular innovation covariance");

  PrompModel out = m;
  out.weight_mean = m.weight_mean + gain * (values - H * m.weight_mean);
  out.weight_cov = m.weight_cov - gain * H * m.weight_cov;
  out.weight_cov = 0.5 * (out.weight_cov + out.weight_cov.transpose());
  return out;
}

Eigen::VectorXd promp_policy_step(const PrompModel& m, double t, double duration_estimate) {
  if (!(duration_estimate > 0.0)) {
    throw std::invalid_argument("promp_policy_step: duration estimate must be positive");
  }
  const double phase = std::clamp(t / duration_estimate, 0.0, 1.0);
  std::vector<int> controls;
  for (int d = 0; d < static_cast<int>(m.channels.size()); ++d) {
    if (m.channels[static_cast<std::size_t>(d)].role == ChannelRole::Control) controls.push_back(d);
  }
  if (controls.empty()) throw std::invalid_argument("promp_policy_step: no control channel");
  Eigen::VectorXd out(controls.size());
  for (std::size_t k = 0; k < controls.size(); ++k) {
    out(static_cast<int>(k)) = reconstruct_dim(m.weight_mean, m.basis, controls[k], phase);
  }
  return out;
}

void WarpPath::validate(int query_len, int reference_len) const {
  if (pairs.empty()) throw std::invalid_argument("warp path: empty");
  if (pairs.front() != std::make_pair(0, 0)) throw std::invalid_argument("warp path: must start at (0,0)");
  if (pairs.back() != std::make_pair(query_len - 1, reference_len - 1)) {
    throw std::invalid_argument("warp path: must end at sequence ends");
  }
  for (std::size_t p = 1; p < pairs.size(); ++p) {
    const int di = pairs[p].first - pairs[p - 1].first;
    const int dj = pairs[p].second - pairs[p - 1].second;
    const bool ok = (di == 1 && dj == 0) || (di == 0 && dj == 1) || (di == 1 && dj == 1);
    if (!ok) throw std::invalid_argument("warp path: invalid step increment");
  }
}

DtwResult dtw_align(const Eigen::MatrixXd& reference, const Eigen::MatrixXd& query) {
  if (reference.cols() == 0 || query.cols() == 0) {
    throw std::invalid_argument("dtw_align: empty sequence");
  }
  if (reference.rows() != query.rows()) {
    throw std::invalid_argument("dtw_align: channel count mismatch");
  }
  const int Tr = static_cast<int>(reference.cols());
  const int Tq = static_cast<int>(query.cols());

  auto dist = [&](int i, int j) { return (query.col(i) - reference.col(j)).norm(); };

  const double inf = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd D = Eigen::MatrixXd::Constant(Tq, Tr, inf);
  Eigen::Matrix<std::int8_t, Eigen::Dynamic, Eigen::Dynamic> from(Tq, Tr);  // 0:diag 1:up 2:left
  D(0, 0) = dist(0, 0);
  from(0, 0) = 0;
  for (int i = 0; i < Tq; ++i) {
    for (int j = 0; j < Tr; ++j) {
      if (i == 0 && j == 0) continue;
      double best = inf;
      std::int8_t arg = 0;
      if (i > 0 && j > 0 && D(i - 1, j - 1) < best) { best = D(i - 1, j - 1); arg = 0; }
      if (i > 0 && D(i - 1, j) < best) { best = D(i - 1, j); arg = 1; }
      if (j > 0 && D(i, j - 1) < best) { best = D(i, j - 1); arg = 2; }
      D(i, j) = best + dist(i, j);
      from(i, j) = arg;
    }
  }

  DtwResult result;
  result.cost = D(Tq - 1, Tr - 1);
  int i = Tq - 1, j = Tr - 1;
  std::vector<std::pair<int, int>> rev;
  rev.emplace_back(i, j);
  while (i != 0 || j != 0) {
    switch (from(i, j)) {
      case 0: --i; --j; break;
      case 1: --i; break;
      default: --j; break;
    }
    rev.emplace_back(i, j);
  }
  result.path.pairs.assign(rev.rbegin(), rev.rend());
  result.path.validate(Tq, Tr);
  return result;
}

std::vector<Demonstration> align_demos_dtw(const std::vector<Demonstration>& demos,
                                           int reference_index,
                                           const std::vector<int>& distance_channels) {
  if (demos.empty()) throw std::invalid_argument("align_demos_dtw: no demonstrations");
  if (reference_index < 0 || reference_index >= static_cast<int>(demos.size())) {
    throw std::invalid_argument("align_demos_dtw: reference index out of range");
  }
  if (distance_channels.empty()) {
    throw std::invalid_argument("align_demos_dtw: no distance channels");
  }
  const Demonstration& ref = demos[static_cast<std::size_t>(reference_index)];
  const int Tr = ref.sample_count();

  auto select_rows = [&](const Demonstration& demo) {
    Eigen::MatrixXd out(distance_channels.size(), demo.sample_count());
    for (std::size_t k = 0; k < distance_channels.size(); ++k) {
      out.row(static_cast<int>(k)) = demo.values.row(distance_channels[k]);
    }
    return out;
  };
  const Eigen::MatrixXd ref_features = select_rows(ref);

  std::vector<Demonstration> aligned;
  aligned.reserve(demos.size());
  for (const auto& demo : demos) {
    const DtwResult dtw = dtw_align(ref_features, select_rows(demo));
    Demonstration out;
    out.channels = demo.channels;
    out.timestamps = ref.timestamps;
    out.values = Eigen::MatrixXd::Zero(demo.channel_count(), Tr);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(Tr);
    for (const auto& [qi, rj] : dtw.path.pairs) {
      out.values.col(rj) += demo.values.col(qi);
      counts(rj) += 1.0;
    }
    for (int j = 0; j < Tr; ++j) out.values.col(j) /= counts(j);
    aligned.push_back(std::move(out));
  }
  return aligned;
}

BcPolicy bc_fit(const std::vector<Demonstration>& demos, int k) {
  if (demos.empty()) throw std::invalid_argument("bc_fit: empty training set");
  if (k < 1) throw std::invalid_argument("bc_fit: k must be positive");

  BcPolicy policy;
  policy.k = k;
  const auto& layout = demos.front().channels;
  for (int d = 0; d < static_cast<int>(layout.size()); ++d) {
    if (layout[static_cast<std::size_t>(d)].role == ChannelRole::ObservedSensor) {
      policy.observed_channels.push_back(d);
    } else if (layout[static_cast<std::size_t>(d)].role == ChannelRole::Control) {
      policy.control_channels.push_back(d);
    }
  }
  if (policy.observed_channels.empty() || policy.control_channels.empty()) {
    throw std::invalid_argument("bc_fit: need observed and control channels");
  }

  int total = 0;
  for (const auto& demo : demos) total += demo.sample_count() - 1;
  policy.inputs.resize(total, policy.observed_channels.size());
  policy.targets.resize(total, policy.control_channels.size());

  int row = 0;
  for (const auto& demo : demos) {
    if (demo.channels.size() != layout.size()) {
      throw std::invalid_argument("bc_fit: inconsistent channel layouts");
    }
    for (int i = 0; i + 1 < demo.sample_count(); ++i) {
      for (std::size_t c = 0; c < policy.observed_channels.size(); ++c) {
        policy.inputs(row, static_cast<int>(c)) = demo.values(policy.observed_channels[c], i);
      }
      for (std::size_t c = 0; c < policy.control_channels.size(); ++c) {
        policy.targets(row, static_cast<int>(c)) = demo.values(policy.control_channels[c], i + 1);
      }
      ++row;
    }
  }
  return policy;
}

Eigen::VectorXd bc_policy_step(const BcPolicy& policy, const Eigen::VectorXd& observation) {
  if (observation.size() != policy.inputs.cols()) {
    throw std::invalid_argument("bc_policy_step: observation size mismatch");
  }
  const int M = static_cast<int>(policy.inputs.rows());
  const int k = std::min(policy.k, M);

  std::vector<int> idx(static_cast<std::size_t>(M));
  std::iota(idx.begin(), idx.end(), 0);
  Eigen::VectorXd dist(M);
  for (int i = 0; i < M; ++i) {
    dist(i) = (policy.inputs.row(i).transpose() - observation).norm();
  }
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(),
                    [&](int a, int b) { return dist(a) < dist(b) || (dist(a) == dist(b) && a < b); });

  // Exact match short-circuits the inverse-distance weighting.
  if (dist(idx[0]) < 1e-12) return policy.targets.row(idx[0]).transpose();

  Eigen::VectorXd out = Eigen::VectorXd::Zero(policy.targets.cols());
  double weight_sum = 0.0;
  for (int n = 0; n < k; ++n) {
    const double w = 1.0 / dist(idx[static_cast<std::size_t>(n)]);
    out += w * policy.targets.row(idx[static_cast<std::size_t>(n)]).transpose();
    weight_sum += w;
  }
  return out / weight_sum;
}

}  // namespace phasekit
