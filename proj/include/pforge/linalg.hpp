#pragma once

#include "pforge/types.hpp"

#include <Eigen/SparseCholesky>

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace pforge {

struct DiagonalWeights;  // penalty.hpp

/// Sparse symmetric matrix with a triplet staging area and compressed storage.
///
/// add() stages entries; finalize() merges duplicate (row, col) pairs by
/// summation and, when the symmetry flag is set, verifies the stored values
/// match their transposed counterparts to 1e-14 (relative above unit
/// magnitude). Finalized matrices are immutable and safe to share across
/// threads.
class SparseSymMatrix {
 public:
  SparseSymMatrix() = default;
  explicit SparseSymMatrix(Index n, bool symmetric = true);

  static SparseSymMatrix identity(Index n);
  static SparseSymMatrix scaled_identity(Index n, double value);
  /// Wraps an already-assembled Eigen matrix; finalizes immediately.
  static SparseSymMatrix from_eigen(SparseMatrix m, bool symmetric = true);
  /// Averages m with its transpose first; sparse products carry asymmetric
  /// roundoff even when they are symmetric in exact arithmetic.
  static SparseSymMatrix from_eigen_symmetrized(const SparseMatrix& m);

  void add(Index row, Index col, double value);
  void finalize();

  bool finalized() const { return finalized_; }
  bool symmetric_flag() const { return symmetric_; }
  Index size() const { return n_; }
  Index nonzeros() const;

  const SparseMatrix& matrix() const;
  Vector apply(const Vector& x) const;

  /// Largest mismatch between stored entries and their transpose,
  /// relative above unit magnitude. Zero for an exactly symmetric matrix.
  double symmetry_error() const;

 private:
  Index n_ = 0;
  bool symmetric_ = true;
  bool finalized_ = false;
  std::vector<Triplet> staged_;
  SparseMatrix mat_;
};

/// Matrix-free operator contract: apply and transpose-apply callbacks.
class LinearOperator {
 public:
  using ApplyFn = std::function<Vector(const Vector&)>;

  LinearOperator(Index rows, Index cols, ApplyFn apply, ApplyFn apply_transpose);

  static LinearOperator from_matrix(const SparseMatrix& m);
  static LinearOperator from_matrix(const SparseSymMatrix& m);

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Vector apply(const Vector& x) const;
  Vector apply_transpose(const Vector& y) const;

  /// Largest violation of <Op x, y> == <x, Op^t y> over seeded random probes,
  /// relative above unit magnitude.
  double adjoint_identity_error(std::uint64_t seed, int probes = 8) const;

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  ApplyFn apply_;
  ApplyFn apply_transpose_;
};

struct SpdSolveReport {
  double residual_norm = 0.0;  // true ||M x - r||_2, recomputed after the solve
  std::string method;          // "ldlt" | "cg"
  int iterations = 0;          // 0 for direct solves
  bool success = false;
};

struct SpdSolveOptions {
  double tol = 1e-12;              // relative to max(1, ||r||_2)
  Index direct_size_limit = 50000; // direct factorization below, CG above
  int max_iterations = 0;          // 0: choose from the system size
};

/// Solves M x = r for symmetric positive definite M. Direct sparse LDL^t
/// below the size threshold, preconditioned conjugate gradients above it.
/// Breakdown and indefiniteness are reported through the success flag.
std::pair<Vector, SpdSolveReport> spd_solve(const SparseSymMatrix& M, const Vector& r,
                                            const SpdSolveOptions& options);
std::pair<Vector, SpdSolveReport> spd_solve(const SparseSymMatrix& M, const Vector& r,
                                            double tol = 1e-12);

/// Conjugate gradient solve against an operator contract, with an optional
/// diagonal (Jacobi) preconditioner.
std::pair<Vector, SpdSolveReport> spd_solve(const LinearOperator& op, const Vector& r,
                                            const SpdSolveOptions& options,
                                            const Vector* jacobi = nullptr);

/// Reusable direct factorization for repeated solves with one SPD matrix.
class SpdFactorization {
 public:
  explicit SpdFactorization(const SparseSymMatrix& M);
  Vector solve(const Vector& r) const;
  Index size() const { return size_; }

 private:
  Index size_ = 0;
  std::shared_ptr<Eigen::SimplicialLDLT<SparseMatrix>> ldlt_;
};

struct SaddleResult {
  Vector x;
  Vector mu;
};

/// Solves the saddle system [A G^t; G -reg I][x; mu] = [b; g] over the active
/// rows. reg = 0 gives the exact equality-constrained step; a singular system
/// with reg = 0 raises SolveError naming the deficient block.
SaddleResult saddle_solve(const SparseSymMatrix& A, const SparseMatrix& G_active,
                          const Vector& b, const Vector& g_active, double reg);

/// Assembles alpha P + beta G^t diag(chi) G, plus A when supplied.
/// Result is symmetric whenever the inputs are; positive definite for
/// alpha > 0 and P positive definite. An all-zero result is rejected.
SparseSymMatrix assemble_step_matrix(double alpha, const SparseSymMatrix& P, double beta,
                                     const SparseMatrix& G, const DiagonalWeights& chi,
                                     const SparseSymMatrix* A = nullptr);

// Matrix Market coordinate / array formats, used for fixtures and dumps.
void write_matrix_market(const std::string& path, const SparseSymMatrix& m);
void write_matrix_market(const std::string& path, const SparseMatrix& m);
SparseMatrix read_matrix_market(const std::string& path);
void write_matrix_market_vector(const std::string& path, const Vector& v);
Vector read_matrix_market_vector(const std::string& path);

}  // namespace pforge
