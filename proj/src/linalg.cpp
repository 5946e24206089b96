#include "pforge/linalg.hpp"

#include "pforge/penalty.hpp"

#include <Eigen/QR>
#include <Eigen/SparseLU>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

namespace pforge {

namespace {

// Deterministic uniform double in [0, 1) from the raw generator stream,
// identical across platforms.
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

SparseSymMatrix::SparseSymMatrix(Index n, bool symmetric) : n_(n), symmetric_(symmetric) {
  if (n <= 0) throw std::invalid_argument("matrix dimension must be positive");
}

SparseSymMatrix SparseSymMatrix::identity(Index n) { return scaled_identity(n, 1.0); }

SparseSymMatrix SparseSymMatrix::scaled_identity(Index n, double value) {
  SparseSymMatrix m(n);
  for (Index i = 0; i < n; ++i) m.add(i, i, value);
  m.finalize();
  return m;
}

SparseSymMatrix SparseSymMatrix::from_eigen(SparseMatrix mat, bool symmetric) {
  if (mat.rows() != mat.cols())
    throw std::invalid_argument("from_eigen: matrix is not square");
  SparseSymMatrix m(mat.rows(), symmetric);
  mat.makeCompressed();
  m.mat_ = std::move(mat);
  m.finalized_ = true;
  if (symmetric && m.symmetry_error() > 1e-14)
    throw std::invalid_argument("from_eigen: matrix is not symmetric");
  return m;
}

SparseSymMatrix SparseSymMatrix::from_eigen_symmetrized(const SparseMatrix& m) {
  SparseMatrix sym = 0.5 * (SparseMatrix(m.transpose()) + m);
  return from_eigen(std::move(sym));
}

void SparseSymMatrix::add(Index row, Index col, double value) {
  if (finalized_) throw std::invalid_argument("add after finalize");
  if (row < 0 || row >= n_ || col < 0 || col >= n_)
    throw std::invalid_argument("triplet index out of range");
  staged_.emplace_back(row, col, value);
}

void SparseSymMatrix::finalize() {
  if (finalized_) return;
  mat_.resize(n_, n_);
  mat_.setFromTriplets(staged_.begin(), staged_.end());  // duplicates sum
  mat_.makeCompressed();
  staged_.clear();
  staged_.shrink_to_fit();
  finalized_ = true;
  if (symmetric_ && symmetry_error() > 1e-14)
    throw std::invalid_argument("finalize: symmetry check failed");
}

Index SparseSymMatrix::nonzeros() const { return finalized_ ? mat_.nonZeros() : 0; }

const SparseMatrix& SparseSymMatrix::matrix() const {
  if (!finalized_) throw std::invalid_argument("matrix() before finalize");
  return mat_;
}

Vector SparseSymMatrix::apply(const Vector& x) const {
  if (!finalized_) throw std::invalid_argument("apply before finalize");
  if (x.size() != n_) throw std::invalid_argument("apply: dimension mismatch");
  return mat_ * x;
}

double SparseSymMatrix::symmetry_error() const {
  if (!finalized_) throw std::invalid_argument("symmetry_error before finalize");
  SparseMatrix diff = SparseMatrix(mat_.transpose()) - mat_;
  double worst = 0.0;
  for (Index k = 0; k < diff.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(diff, k); it; ++it) {
      const double ref = tolerance_scale(mat_.coeff(it.row(), it.col()));
      worst = std::max(worst, std::abs(it.value()) / ref);
    }
  }
  return worst;
}

LinearOperator::LinearOperator(Index rows, Index cols, ApplyFn apply, ApplyFn apply_transpose)
    : rows_(rows), cols_(cols), apply_(std::move(apply)),
      apply_transpose_(std::move(apply_transpose)) {
  if (rows <= 0 || cols <= 0) throw std::invalid_argument("operator dimensions must be positive");
  if (!apply_ || !apply_transpose_)
    throw std::invalid_argument("operator requires apply and transpose-apply");
}

LinearOperator LinearOperator::from_matrix(const SparseMatrix& m) {
  auto shared = std::make_shared<SparseMatrix>(m);
  return LinearOperator(
      m.rows(), m.cols(), [shared](const Vector& x) { return Vector(*shared * x); },
      [shared](const Vector& y) { return Vector(shared->transpose() * y); });
}

LinearOperator LinearOperator::from_matrix(const SparseSymMatrix& m) {
  return from_matrix(m.matrix());
}

Vector LinearOperator::apply(const Vector& x) const {
  if (x.size() != cols_) throw std::invalid_argument("operator apply: dimension mismatch");
  Vector y = apply_(x);
  if (y.size() != rows_) throw SolveError("operator apply returned a wrong-sized vector");
  return y;
}

Vector LinearOperator::apply_transpose(const Vector& y) const {
  if (y.size() != rows_)
    throw std::invalid_argument("operator transpose-apply: dimension mismatch");
  Vector x = apply_transpose_(y);
  if (x.size() != cols_) throw SolveError("operator transpose-apply returned a wrong-sized vector");
  return x;
}

double LinearOperator::adjoint_identity_error(std::uint64_t seed, int probes) const {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int p = 0; p < probes; ++p) {
    Vector x(cols_), y(rows_);
    for (Index i = 0; i < cols_; ++i) x[i] = 2.0 * uniform01(rng) - 1.0;
    for (Index i = 0; i < rows_; ++i) y[i] = 2.0 * uniform01(rng) - 1.0;
    const double lhs = apply(x).dot(y);
    const double rhs = x.dot(apply_transpose(y));
    worst = std::max(worst, std::abs(lhs - rhs) / tolerance_scale(lhs));
  }
  return worst;
}

namespace {

std::pair<Vector, SpdSolveReport> solve_direct(const SparseSymMatrix& M, const Vector& r,
                                               double tol) {
  SpdSolveReport report;
  report.method = "ldlt";

  Eigen::SimplicialLDLT<SparseMatrix> ldlt(M.matrix());
  if (ldlt.info() != Eigen::Success) {
    report.residual_norm = r.norm();
    return {Vector::Zero(r.size()), report};
  }
  // A semidefinite or indefinite matrix shows up as a nonpositive pivot.
  if (ldlt.vectorD().minCoeff() <= 0.0) {
    report.residual_norm = r.norm();
    return {Vector::Zero(r.size()), report};
  }

  Vector x = ldlt.solve(r);
  const double target = tol * tolerance_scale(r.norm());
  double res = (M.apply(x) - r).norm();
  if (res > target) {
    x += ldlt.solve(r - M.apply(x));  // one refinement pass
    res = (M.apply(x) - r).norm();
  }
  // Backward-stable floor: residuals cannot fall below roundoff in ||M|| ||x||.
  double m_norm = 0.0;
  for (Index k = 0; k < M.matrix().outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(M.matrix(), k); it; ++it)
      m_norm = std::max(m_norm, std::abs(it.value()));
  const double floor = 64.0 * 2.2e-16 * (m_norm * x.norm() + r.norm());
  report.residual_norm = res;
  report.success = res <= std::max(target, floor);
  return {std::move(x), report};
}

std::pair<Vector, SpdSolveReport> solve_cg(const LinearOperator& op, const Vector& r,
                                           const SpdSolveOptions& options,
                                           const Vector* jacobi) {
  SpdSolveReport report;
  report.method = "cg";

  const Index n = r.size();
  const int max_iter =
      options.max_iterations > 0 ? options.max_iterations : static_cast<int>(4 * n + 100);

  Vector x = Vector::Zero(n);
  Vector residual = r;
  const double rhs_scale = tolerance_scale(r.norm());
  const double target = options.tol * rhs_scale;
  if (residual.norm() <= target) {
    report.success = true;
    report.residual_norm = residual.norm();
    return {std::move(x), report};
  }

  auto precond = [&](const Vector& v) {
    if (!jacobi) return v;
    return Vector(v.cwiseQuotient(*jacobi));
  };

  Vector z = precond(residual);
  Vector p = z;
  double rho = residual.dot(z);
  for (int it = 0; it < max_iter; ++it) {
    const Vector q = op.apply(p);
    const double pq = p.dot(q);
    if (!(pq > 0.0)) {  // breakdown or indefiniteness
      report.iterations = it;
      report.residual_norm = residual.norm();
      return {std::move(x), report};
    }
    const double step = rho / pq;
    x += step * p;
    residual -= step * q;
    report.iterations = it + 1;
    if (residual.norm() <= target) break;
    z = precond(residual);
    const double rho_next = residual.dot(z);
    p = z + (rho_next / rho) * p;
    rho = rho_next;
  }
  report.residual_norm = (op.apply(x) - r).norm();
  report.success = report.residual_norm <= target;
  return {std::move(x), report};
}

}  // namespace

std::pair<Vector, SpdSolveReport> spd_solve(const SparseSymMatrix& M, const Vector& r,
                                            const SpdSolveOptions& options) {
  if (!M.finalized()) throw std::invalid_argument("spd_solve: matrix not finalized");
  if (M.size() != r.size()) throw std::invalid_argument("spd_solve: dimension mismatch");

  if (M.size() <= options.direct_size_limit) return solve_direct(M, r, options.tol);
  Vector diag = M.matrix().diagonal();
  for (Index i = 0; i < diag.size(); ++i)
    if (!(diag[i] > 0.0)) diag[i] = 1.0;
  return solve_cg(LinearOperator::from_matrix(M), r, options, &diag);
}

std::pair<Vector, SpdSolveReport> spd_solve(const SparseSymMatrix& M, const Vector& r,
                                            double tol) {
  SpdSolveOptions options;
  options.tol = tol;
  return spd_solve(M, r, options);
}

std::pair<Vector, SpdSolveReport> spd_solve(const LinearOperator& op, const Vector& r,
                                            const SpdSolveOptions& options,
                                            const Vector* jacobi) {
  if (op.rows() != op.cols()) throw std::invalid_argument("spd_solve: operator not square");
  if (op.rows() != r.size()) throw std::invalid_argument("spd_solve: dimension mismatch");
  return solve_cg(op, r, options, jacobi);
}

SpdFactorization::SpdFactorization(const SparseSymMatrix& M) : size_(M.size()) {
  ldlt_ = std::make_shared<Eigen::SimplicialLDLT<SparseMatrix>>(M.matrix());
  if (ldlt_->info() != Eigen::Success || ldlt_->vectorD().minCoeff() <= 0.0)
    throw SolveError("factorization failed: matrix is not positive definite");
}

Vector SpdFactorization::solve(const Vector& r) const {
  if (r.size() != size_) throw std::invalid_argument("factorized solve: dimension mismatch");
  return ldlt_->solve(r);
}

SaddleResult saddle_solve(const SparseSymMatrix& A, const SparseMatrix& G_active,
                          const Vector& b, const Vector& g_active, double reg) {
  const Index n = A.size();
  const Index ma = G_active.rows();
  if (G_active.cols() != n && ma > 0)
    throw std::invalid_argument("saddle_solve: G_active column count mismatch");
  if (b.size() != n || g_active.size() != ma)
    throw std::invalid_argument("saddle_solve: right-hand side dimension mismatch");
  if (reg < 0.0) throw std::invalid_argument("saddle_solve: reg must be nonnegative");

  if (ma == 0) {
    auto [x, rep] = spd_solve(A, b);
    if (!rep.success) throw SolveError("saddle_solve: A block solve failed");
    return {std::move(x), Vector(0)};
  }

  SparseMatrix kkt(n + ma, n + ma);
  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(A.nonzeros() + 2 * G_active.nonZeros() + ma));
  const SparseMatrix& Am = A.matrix();
  for (Index k = 0; k < Am.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(Am, k); it; ++it)
      trips.emplace_back(it.row(), it.col(), it.value());
  for (Index k = 0; k < G_active.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(G_active, k); it; ++it) {
      trips.emplace_back(n + it.row(), it.col(), it.value());
      trips.emplace_back(it.col(), n + it.row(), it.value());
    }
  }
  for (Index j = 0; j < ma; ++j) trips.emplace_back(n + j, n + j, -reg);
  kkt.setFromTriplets(trips.begin(), trips.end());
  kkt.makeCompressed();

  Vector rhs(n + ma);
  rhs.head(n) = b;
  rhs.tail(ma) = g_active;

  Eigen::SparseLU<SparseMatrix> lu;
  lu.compute(kkt);
  bool singular = lu.info() != Eigen::Success;
  Vector sol;
  if (!singular) {
    sol = lu.solve(rhs);
    singular = lu.info() != Eigen::Success || !sol.allFinite();
  }
  if (singular) {
    if (reg > 0.0) throw SolveError("saddle_solve: regularized saddle system is singular");
    // Name the deficient block: dependent active rows are the usual culprit.
    std::string block = "A";
    if (ma <= 4000) {
      DenseMatrix Gd = DenseMatrix(G_active);
      Eigen::ColPivHouseholderQR<DenseMatrix> qr(Gd);
      if (qr.rank() < ma) block = "G_active";
    }
    throw SolveError("saddle_solve: singular saddle system with reg=0, deficient block: " +
                     block);
  }

  return {sol.head(n), sol.tail(ma)};
}

SparseSymMatrix assemble_step_matrix(double alpha, const SparseSymMatrix& P, double beta,
                                     const SparseMatrix& G, const DiagonalWeights& chi,
                                     const SparseSymMatrix* A) {
  const Index n = P.size();
  if (G.cols() != n) throw std::invalid_argument("assemble_step_matrix: G column mismatch");
  if (chi.size() != G.rows())
    throw std::invalid_argument("assemble_step_matrix: chi length mismatch");
  if (A && A->size() != n)
    throw std::invalid_argument("assemble_step_matrix: A dimension mismatch");
  if (alpha < 0.0) throw std::invalid_argument("assemble_step_matrix: alpha must be nonnegative");
  if (alpha == 0.0 && !A)
    throw std::invalid_argument("assemble_step_matrix: alpha = 0 requires the A block");

  SparseMatrix penalty_part =
      G.transpose() * chi.entries.asDiagonal() * G;
  SparseMatrix sum = beta * penalty_part;
  if (alpha > 0.0) sum += alpha * P.matrix();
  if (A) sum += A->matrix();
  sum.prune(0.0, 0.0);
  sum.makeCompressed();
  if (sum.nonZeros() == 0) throw std::invalid_argument("assemble_step_matrix: all-zero result");
  return SparseSymMatrix::from_eigen_symmetrized(sum);
}

namespace {

void write_coordinate(std::ofstream& out, const SparseMatrix& m, bool symmetric) {
  out << "%%MatrixMarket matrix coordinate real " << (symmetric ? "symmetric" : "general")
      << "\n";
  Index nnz = 0;
  for (Index k = 0; k < m.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m, k); it; ++it)
      if (!symmetric || it.row() >= it.col()) ++nnz;
  out << m.rows() << " " << m.cols() << " " << nnz << "\n";
  for (Index k = 0; k < m.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
      if (symmetric && it.row() < it.col()) continue;
      out << (it.row() + 1) << " " << (it.col() + 1) << " " << format_full(it.value()) << "\n";
    }
  }
}

}  // namespace

void write_matrix_market(const std::string& path, const SparseSymMatrix& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  write_coordinate(out, m.matrix(), m.symmetric_flag());
}

void write_matrix_market(const std::string& path, const SparseMatrix& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  write_coordinate(out, m, false);
}

SparseMatrix read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);

  std::string header;
  std::getline(in, header);
  const bool symmetric = header.find("symmetric") != std::string::npos;
  const bool array = header.find("array") != std::string::npos;

  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '%') break;
  }
  std::istringstream dims(line);

  if (array) {
    Index rows = 0, cols = 0;
    dims >> rows >> cols;
    SparseMatrix m(rows, cols);
    std::vector<Triplet> trips;
    for (Index c = 0; c < cols; ++c) {
      for (Index r = 0; r < rows; ++r) {
        double v = 0.0;
        in >> v;
        if (v != 0.0) trips.emplace_back(r, c, v);
      }
    }
    m.setFromTriplets(trips.begin(), trips.end());
    return m;
  }

  Index rows = 0, cols = 0, nnz = 0;
  dims >> rows >> cols >> nnz;
  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(symmetric ? 2 * nnz : nnz));
  for (Index k = 0; k < nnz; ++k) {
    Index i = 0, j = 0;
    double v = 0.0;
    in >> i >> j >> v;
    trips.emplace_back(i - 1, j - 1, v);
    if (symmetric && i != j) trips.emplace_back(j - 1, i - 1, v);
  }
  SparseMatrix m(rows, cols);
  m.setFromTriplets(trips.begin(), trips.end());
  m.makeCompressed();
  return m;
}

void write_matrix_market_vector(const std::string& path, const Vector& v) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "%%MatrixMarket matrix array real general\n";
  out << v.size() << " 1\n";
  for (Index i = 0; i < v.size(); ++i) out << format_full(v[i]) << "\n";
}

Vector read_matrix_market_vector(const std::string& path) {
  SparseMatrix m = read_matrix_market(path);
  if (m.cols() != 1) throw std::runtime_error("not a vector: " + path);
  return Vector(m);
}

}  // namespace pforge
