#pragma once

#include <Eigen/Dense>
#include <vector>

#include "phasekit/basis.hpp"
#include "phasekit/demonstration.hpp"
#include "phasekit/rng.hpp"

namespace phasekit::testing {

/// Random cubic Bezier trajectories anchored at zero: the basis module's
/// own generator for round-trip checks.
inline Demonstration bezier_demo(std::uint64_t seed, int dims, int samples, double duration) {
  Rng rng(seed);
  Demonstration demo;
  demo.timestamps.resize(samples);
  for (int i = 0; i < samples; ++i) {
    demo.timestamps(i) = duration * static_cast<double>(i) / (samples - 1);
  }
  demo.values.resize(dims, samples);
  for (int d = 0; d < dims; ++d) {
    Eigen::Vector4d p(0.0, rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    for (int i = 0; i < samples; ++i) {
      const double u = static_cast<double>(i) / (samples - 1);
      const double v = 1.0 - u;
      demo.values(d, i) = v * v * v * p(0) + 3.0 * v * v * u * p(1) + 3.0 * v * u * u * p(2) +
                          u * u * u * p(3);
    }
    demo.channels.push_back({"ch" + std::to_string(d), "m", ChannelRole::ObservedSensor});
  }
  return demo;
}

/// Extended-precision ridge normal equations, independent of decompose().
inline Eigen::VectorXd long_double_ridge_fit(const BasisLibrary& lib, int dim,
                                             const Eigen::VectorXd& phases,
                                             const Eigen::VectorXd& y, double ridge) {
  using LongMat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  using LongVec = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
  const int n = lib.block_size(dim);
  const int T = static_cast<int>(phases.size());
  LongMat phi(n, T);
  for (int i = 0; i < T; ++i) {
    const Eigen::VectorXd col = evaluate_basis(lib, dim, phases(i));
    for (int b = 0; b < n; ++b) phi(b, i) = static_cast<long double>(col(b));
  }
  LongMat gram = phi * phi.transpose();
  for (int b = 0; b < n; ++b) gram(b, b) += static_cast<long double>(ridge);
  LongVec rhs = phi * y.cast<long double>();
  LongVec w = gram.ldlt().solve(rhs);
  return w.cast<double>();
}

inline double channel_range(const Demonstration& demo, int d) {
  return demo.values.row(d).maxCoeff() - demo.values.row(d).minCoeff();
}

}  // namespace phasekit::testing
