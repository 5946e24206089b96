#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cmath>
#include <stdexcept>

namespace pforge {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Numerical failure inside a solver (breakdown, singular system, exhausted budget).
struct SolveError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline double inf_norm(const Vector& v) {
  return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>();
}

/// Comparison scale: quantities below unit magnitude compare absolutely,
/// larger ones relatively.
inline double tolerance_scale(double reference) {
  return std::max(1.0, std::abs(reference));
}

}  // namespace pforge
