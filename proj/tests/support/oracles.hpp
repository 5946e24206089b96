// Test-only reference computations: dense solves, active-set enumeration for
// small quadratic programs, finite differences and the taut-string solution
// of one-dimensional total-variation denoising. These stay independent of the
// library's solve paths so they can serve as oracles for them.
#pragma once

#include "pforge/penalty.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

using pforge::DenseMatrix;
using pforge::Index;
using pforge::Vector;

inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_pm1(std::mt19937_64& rng) { return 2.0 * uniform01(rng) - 1.0; }

// Random convex quadratic program min 1/2 x^t A x - b^t x s.t. G x <= g with
// unit-norm constraint rows. `cuts` rows are placed to exclude the
// unconstrained optimum (slack -0.1..-0.3), the rest get slack in [1, 2], so
// the feasible set is nonempty and the multiplier is nonzero when cuts > 0.
struct RandomQp {
  DenseMatrix a_dense;
  Vector b;
  DenseMatrix g_dense;
  Vector g_rhs;

  pforge::SparseMatrix sparse_g() const {
    pforge::SparseMatrix G(g_dense.rows(), g_dense.cols());
    std::vector<pforge::Triplet> trips;
    for (Index i = 0; i < g_dense.rows(); ++i)
      for (Index j = 0; j < g_dense.cols(); ++j)
        if (g_dense(i, j) != 0.0) trips.emplace_back(i, j, g_dense(i, j));
    G.setFromTriplets(trips.begin(), trips.end());
    return G;
  }

  pforge::SparseSymMatrix sparse_a() const {
    pforge::SparseMatrix A(a_dense.rows(), a_dense.cols());
    std::vector<pforge::Triplet> trips;
    for (Index i = 0; i < a_dense.rows(); ++i)
      for (Index j = 0; j < a_dense.cols(); ++j)
        if (a_dense(i, j) != 0.0) trips.emplace_back(i, j, a_dense(i, j));
    A.setFromTriplets(trips.begin(), trips.end());
    return pforge::SparseSymMatrix::from_eigen(std::move(A));
  }

  pforge::PenaltyProblem problem(double beta) const {
    return pforge::PenaltyProblem(pforge::Objective::quadratic(sparse_a(), b),
                                  pforge::ConstraintSystem(sparse_g(), g_rhs), beta);
  }
};

inline RandomQp make_random_qp(std::uint64_t seed, Index n, Index m, Index cuts) {
  std::mt19937_64 rng(seed);
  DenseMatrix basis(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) basis(i, j) = uniform_pm1(rng);

  RandomQp qp;
  qp.a_dense = basis.transpose() * basis + DenseMatrix::Identity(n, n);
  qp.b = Vector(n);
  for (Index i = 0; i < n; ++i) qp.b[i] = uniform_pm1(rng);

  qp.g_dense = DenseMatrix(m, n);
  for (Index i = 0; i < m; ++i) {
    Vector row(n);
    do {
      for (Index j = 0; j < n; ++j) row[j] = uniform_pm1(rng);
    } while (row.norm() < 1e-3);
    qp.g_dense.row(i) = row.transpose() / row.norm();
  }

  const Vector x_unc = qp.a_dense.ldlt().solve(qp.b);
  qp.g_rhs = Vector(m);
  for (Index i = 0; i < m; ++i) {
    const double at_unc = qp.g_dense.row(i).dot(x_unc);
    if (i < cuts)
      qp.g_rhs[i] = at_unc - (0.1 + 0.2 * uniform01(rng));
    else
      qp.g_rhs[i] = at_unc + (1.0 + uniform01(rng));
  }
  return qp;
}

// Exhaustive active-set enumeration for small convex QPs: solves the
// equality-constrained KKT system for every subset of rows and keeps the
// feasible, dual-feasible candidate.
struct QpSolution {
  bool found = false;
  Vector x;
  Vector mu;  // full length, zero off the active set
};

inline QpSolution enumerate_qp(const DenseMatrix& A, const Vector& b, const DenseMatrix& G,
                               const Vector& g, double tol = 1e-9) {
  const Index n = A.rows();
  const Index m = G.rows();
  QpSolution best;
  double best_value = 0.0;

  for (std::uint64_t mask = 0; mask < (1ull << m); ++mask) {
    std::vector<Index> active;
    for (Index j = 0; j < m; ++j)
      if (mask & (1ull << j)) active.push_back(j);
    const Index ma = static_cast<Index>(active.size());

    DenseMatrix kkt = DenseMatrix::Zero(n + ma, n + ma);
    kkt.topLeftCorner(n, n) = A;
    for (Index i = 0; i < ma; ++i) {
      kkt.block(n + i, 0, 1, n) = G.row(active[static_cast<std::size_t>(i)]);
      kkt.block(0, n + i, n, 1) = G.row(active[static_cast<std::size_t>(i)]).transpose();
    }
    Vector rhs(n + ma);
    rhs.head(n) = b;
    for (Index i = 0; i < ma; ++i) rhs[n + i] = g[active[static_cast<std::size_t>(i)]];

    Eigen::FullPivLU<DenseMatrix> lu(kkt);
    if (!lu.isInvertible()) continue;
    const Vector sol = lu.solve(rhs);
    const Vector x = sol.head(n);
    const Vector mu_active = sol.tail(ma);

    if (((G * x - g).array() > tol).any()) continue;
    if (ma > 0 && (mu_active.array() < -tol).any()) continue;

    const double value = 0.5 * x.dot(A * x) - b.dot(x);
    if (!best.found || value < best_value - 1e-14) {
      best.found = true;
      best.x = x;
      best.mu = Vector::Zero(m);
      for (Index i = 0; i < ma; ++i) best.mu[active[static_cast<std::size_t>(i)]] = mu_active[i];
      best_value = value;
    }
  }
  return best;
}

// Central finite-difference gradient.
inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                          double h = 1e-6) {
  Vector grad(x.size());
  Vector probe = x;
  for (Index i = 0; i < x.size(); ++i) {
    const double step = h * std::max(1.0, std::abs(x[i]));
    probe[i] = x[i] + step;
    const double fp = f(probe);
    probe[i] = x[i] - step;
    const double fm = f(probe);
    probe[i] = x[i];
    grad[i] = (fp - fm) / (2.0 * step);
  }
  return grad;
}

inline double fd_directional(const std::function<double(const Vector&)>& f, const Vector& x,
                             const Vector& v, double h = 1e-6) {
  return (f(x + h * v) - f(x - h * v)) / (2.0 * h);
}

// Taut string through the tube (cumulative sums +- lambda, pinned ends),
// computed by projected Gauss-Seidel on the equivalent box-constrained
// quadratic problem min sum (s_k - s_{k-1})^2. The string's increments are
// the exact minimizer of 1/2 ||u - f||^2 + lambda sum |u_{i+1} - u_i|.
inline Vector tv1d_taut_string(const Vector& f, double lambda) {
  const Index m = f.size();
  Vector cumulative(m + 1);
  cumulative[0] = 0.0;
  for (Index i = 0; i < m; ++i) cumulative[i + 1] = cumulative[i] + f[i];

  Vector lo(m + 1), hi(m + 1);
  lo[0] = hi[0] = 0.0;
  lo[m] = hi[m] = cumulative[m];
  for (Index k = 1; k < m; ++k) {
    lo[k] = cumulative[k] - lambda;
    hi[k] = cumulative[k] + lambda;
  }

  Vector s = cumulative;
  for (int sweep = 0; sweep < 2000000; ++sweep) {
    double change = 0.0;
    for (Index k = 1; k < m; ++k) {
      const double target = 0.5 * (s[k - 1] + s[k + 1]);
      const double clamped = std::min(hi[k], std::max(lo[k], target));
      change = std::max(change, std::abs(clamped - s[k]));
      s[k] = clamped;
    }
    if (change < 1e-15) break;
  }

  Vector u(m);
  for (Index i = 0; i < m; ++i) u[i] = s[i + 1] - s[i];
  return u;
}

}  // namespace oracle
