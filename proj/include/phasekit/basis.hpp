#pragma once

#include <Eigen/Dense>
#include <vector>

#include "phasekit/demonstration.hpp"

namespace phasekit {

/// Gaussian radial basis functions over phase in [0, 1], one block of
/// functions per trajectory dimension. Blocks are concatenated in channel
/// order to form the full weight layout of length B = sum of counts.
struct BasisLibrary {
  std::vector<int> counts;               // B^d per dimension
  std::vector<Eigen::VectorXd> centers;  // per dimension, strictly increasing in [0,1]
  std::vector<Eigen::VectorXd> widths;   // per dimension, > 0

  int dims() const { return static_cast<int>(counts.size()); }
  int total_weights() const;
  int block_offset(int dim) const;
  int block_size(int dim) const { return counts[static_cast<std::size_t>(dim)]; }

  void validate() const;
};

/// Uniformly spaced centers on [0,1] inclusive; width = width_scale * spacing.
BasisLibrary make_basis(int dims, const std::vector<int>& counts, double width_scale);
BasisLibrary make_basis(int dims, int count_per_dim, double width_scale);

/// Value of each basis function of `dim` at `phase`:
/// exp(-(phase - c_b)^2 / (2 sigma_b^2)). Phases outside [0,1] extrapolate.
Eigen::VectorXd evaluate_basis(const BasisLibrary& lib, int dim, double phase);

/// Compressed trajectory representation plus the fit quality it was
/// recorded with.
struct WeightVector {
  Eigen::VectorXd w;              // length B, per-dimension blocks
  Eigen::VectorXd residual_rmse;  // per dimension, channel units
  std::vector<bool> usable;       // false for masked (zero-filled) blocks
};

/// Per-dimension ridge least squares against phases assigned linearly in
/// time: phi(t_i) = (t_i - t_0) / (t_{T-1} - t_0). Masked channels get a
/// zero block flagged unusable.
WeightVector decompose(const Demonstration& demo, const BasisLibrary& lib, double ridge);

/// Decodes all dimensions at the given phases: row d, column p is
/// evaluate_basis(lib, d, phases[p]) . w^d.
Eigen::MatrixXd reconstruct(const Eigen::VectorXd& w, const BasisLibrary& lib,
                            const Eigen::VectorXd& phases);
Eigen::MatrixXd reconstruct(const WeightVector& wv, const BasisLibrary& lib,
                            const Eigen::VectorXd& phases);

/// Single dimension at a single phase.
double reconstruct_dim(const Eigen::VectorXd& w, const BasisLibrary& lib, int dim, double phase);

}  // namespace phasekit
