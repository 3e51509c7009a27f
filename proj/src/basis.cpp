#include "phasekit/basis.hpp"

#include <cmath>
#include <stdexcept>

namespace phasekit {

int BasisLibrary::total_weights() const {
  int total = 0;
  for (int c : counts) total += c;
  return total;
}

int BasisLibrary::block_offset(int dim) const {
  int offset = 0;
  for (int d = 0; d < dim; ++d) offset += counts[static_cast<std::size_t>(d)];
  return offset;
}

void BasisLibrary::validate() const {
  if (counts.empty()) throw std::invalid_argument("basis: no dimensions");
  if (centers.size() != counts.size() || widths.size() != counts.size()) {
    throw std::invalid_argument("basis: inconsistent per-dimension data");
  }
  for (int d = 0; d < dims(); ++d) {
    const auto& c = centers[static_cast<std::size_t>(d)];
    const auto& s = widths[static_cast<std::size_t>(d)];
    if (c.size() != counts[static_cast<std::size_t>(d)] || s.size() != c.size()) {
      throw std::invalid_argument("basis: center/width count mismatch");
    }
    for (int b = 0; b < c.size(); ++b) {
      if (c(b) < 0.0 || c(b) > 1.0) throw std::invalid_argument("basis: center outside [0,1]");
      if (b > 0 && !(c(b) > c(b - 1))) {
        throw std::invalid_argument("basis: centers must be strictly increasing");
      }
      if (!(s(b) > 0.0)) throw std::invalid_argument("basis: widths must be positive");
    }
  }
}

BasisLibrary make_basis(int dims, const std::vector<int>& counts, double width_scale) {
  if (dims <= 0) throw std::invalid_argument("make_basis: dims must be positive");
  if (static_cast<int>(counts.size()) != dims) {
    throw std::invalid_argument("make_basis: counts size must equal dims");
  }
  if (!(width_scale > 0.0)) throw std::invalid_argument("make_basis: width_scale must be positive");

  BasisLibrary lib;
  lib.counts = counts;
  for (int d = 0; d < dims; ++d) {
    const int n = counts[static_cast<std::size_t>(d)];
    if (n < 2) throw std::invalid_argument("make_basis: need at least 2 basis functions per dim");
    const double spacing = 1.0 / static_cast<double>(n - 1);
    Eigen::VectorXd c(n);
    for (int b = 0; b < n; ++b) c(b) = static_cast<double>(b) * spacing;
    lib.centers.push_back(c);
    lib.widths.push_back(Eigen::VectorXd::Constant(n, width_scale * spacing));
  }
  lib.validate();
  return lib;
}

BasisLibrary make_basis(int dims, int count_per_dim, double width_scale) {
  return make_basis(dims, std::vector<int>(static_cast<std::size_t>(dims), count_per_dim),
                    width_scale);
}

Eigen::VectorXd evaluate_basis(const BasisLibrary& lib, int dim, double phase) {
  if (dim < 0 || dim >= lib.dims()) throw std::invalid_argument("evaluate_basis: dim out of range");
  const auto& c = lib.centers[static_cast<std::size_t>(dim)];
  const auto& s = lib.widths[static_cast<std::size_t>(dim)];
  Eigen::VectorXd out(c.size());
  for (int b = 0; b < c.size(); ++b) {
    const double z = (phase - c(b)) / s(b);
    out(b) = std::exp(-0.5 * z * z);
  }
  return out;
}

WeightVector decompose(const Demonstration& demo, const BasisLibrary& lib, double ridge) {
  demo.validate();
  lib.validate();
  if (demo.channel_count() != lib.dims()) {
    throw std::invalid_argument("decompose: demonstration channels do not match basis dims");
  }
  if (ridge < 0.0) throw std::invalid_argument("decompose: ridge must be non-negative");

  const int T = demo.sample_count();
  const double t0 = demo.timestamps(0);
  const double span = demo.timestamps(T - 1) - t0;
  Eigen::VectorXd phases(T);
  for (int i = 0; i < T; ++i) phases(i) = (demo.timestamps(i) - t0) / span;

  WeightVector wv;
  wv.w = Eigen::VectorXd::Zero(lib.total_weights());
  wv.residual_rmse = Eigen::VectorXd::Zero(lib.dims());
  wv.usable.assign(static_cast<std::size_t>(lib.dims()), true);

  for (int d = 0; d < lib.dims(); ++d) {
    if (demo.channels[static_cast<std::size_t>(d)].role == ChannelRole::Masked) {
      wv.usable[static_cast<std::size_t>(d)] = false;
      continue;  // zero block
    }
    const int n = lib.block_size(d);
    if (T < n && ridge == 0.0) {
      throw std::runtime_error("decompose: underdetermined fit (T < B^d) with zero ridge");
    }
    Eigen::MatrixXd Phi(n, T);  // basis values, one column per sample
    for (int i = 0; i < T; ++i) Phi.col(i) = evaluate_basis(lib, d, phases(i));

    const Eigen::VectorXd y = demo.values.row(d).transpose();
    Eigen::MatrixXd gram = Phi * Phi.transpose();
    gram.diagonal().array() += ridge;
    const Eigen::VectorXd rhs = Phi * y;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    Eigen::VectorXd wd = ldlt.solve(rhs);
    if (!wd.allFinite()) {
      throw std::runtime_error("decompose: ill-conditioned normal equations for channel " +
                               demo.channels[static_cast<std::size_t>(d)].name);
    }
    wv.w.segment(lib.block_offset(d), n) = wd;
    const Eigen::VectorXd residual = y - Phi.transpose() * wd;
    wv.residual_rmse(d) = std::sqrt(residual.squaredNorm() / static_cast<double>(T));
  }
  return wv;
}

Eigen::MatrixXd reconstruct(const Eigen::VectorXd& w, const BasisLibrary& lib,
                            const Eigen::VectorXd& phases) {
  if (w.size() != lib.total_weights()) {
    throw std::invalid_argument("reconstruct: weight length does not match basis layout");
  }
  if (!phases.allFinite()) throw std::invalid_argument("reconstruct: non-finite phase");
  Eigen::MatrixXd out(lib.dims(), phases.size());
  for (int d = 0; d < lib.dims(); ++d) {
    const auto wd = w.segment(lib.block_offset(d), lib.block_size(d));
    for (int p = 0; p < phases.size(); ++p) {
      out(d, p) = evaluate_basis(lib, d, phases(p)).dot(wd);
    }
  }
  return out;
}

Eigen::MatrixXd reconstruct(const WeightVector& wv, const BasisLibrary& lib,
                            const Eigen::VectorXd& phases) {
  return reconstruct(wv.w, lib, phases);
}

double reconstruct_dim(const Eigen::VectorXd& w, const BasisLibrary& lib, int dim, double phase) {
  if (w.size() != lib.total_weights()) {
    throw std::invalid_argument("reconstruct_dim: weight length does not match basis layout");
  }
  return evaluate_basis(lib, dim, phase).dot(w.segment(lib.block_offset(dim), lib.block_size(dim)));
}

}  // namespace phasekit
