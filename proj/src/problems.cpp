#include "pforge/problems.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

namespace pforge {

namespace {

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Indicator of the centered square of side 0.4, sampled at interior nodes.
Vector default_ground_truth(const GridSpec& grid, double height) {
  const Index m = grid.interior_per_side();
  const double h = grid.h();
  Vector u = Vector::Zero(m * m);
  for (Index j = 1; j <= m; ++j) {
    for (Index i = 1; i <= m; ++i) {
      const double x = i * h;
      const double y = j * h;
      if (std::max(std::abs(x - 0.5), std::abs(y - 0.5)) <= 0.2)
        u[(j - 1) * m + (i - 1)] = height;
    }
  }
  return u;
}

SparseMatrix sparse_identity(Index n) {
  SparseMatrix eye(n, n);
  eye.setIdentity();
  return eye;
}

// Stacked box constraint lo <= u <= hi as [I; -I] u <= [hi; -lo].
ConstraintSystem box_bounds(Index n, double lo, double hi) {
  SparseMatrix stacked(2 * n, n);
  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(2 * n));
  for (Index i = 0; i < n; ++i) {
    trips.emplace_back(i, i, 1.0);
    trips.emplace_back(n + i, i, -1.0);
  }
  stacked.setFromTriplets(trips.begin(), trips.end());
  Vector rhs(2 * n);
  rhs.head(n).setConstant(hi);
  rhs.tail(n).setConstant(-lo);
  return ConstraintSystem(std::move(stacked), std::move(rhs));
}

}  // namespace

GridSpec::GridSpec(Index subdivisions) : n(subdivisions) {
  if (n < 2) throw std::invalid_argument("grid requires at least 2 subdivisions");
}

double distance_to_boundary(double x, double y) {
  if (x < 0.0 || x > 1.0 || y < 0.0 || y > 1.0)
    throw std::invalid_argument("point outside the closed unit square");
  return 0.5 * (1.0 - std::max(std::abs(2.0 * x - 1.0), std::abs(2.0 * y - 1.0)));
}

Vector add_noise(const Vector& y, const NoiseSpec& spec) {
  if (spec.level < 0.0) throw std::invalid_argument("noise level must be nonnegative");
  if (spec.level == 0.0 || y.size() == 0) return y;

  double scale = spec.level;
  if (spec.mode == NoiseSpec::Mode::relative_max) scale *= y.maxCoeff();

  std::mt19937_64 rng(spec.seed);
  Vector out(y.size());
  for (Index i = 0; i < y.size(); ++i)
    out[i] = y[i] + scale * (2.0 * uniform01(rng) - 1.0);
  return out;
}

PenaltyProblem ObstacleInstance::make_problem(double beta) const {
  const Index n = load.size();
  Objective obj = Objective::quadratic(stiffness, load);
  if (!bilateral)
    return PenaltyProblem(std::move(obj),
                          ConstraintSystem(sparse_identity(n), obstacle), beta);
  return PenaltyProblem(
      std::move(obj),
      ConstraintSystem::bilateral(sparse_identity(n), Vector::Zero(n), -obstacle, obstacle),
      beta);
}

ObstacleInstance assemble_obstacle(const GridSpec& grid, double source_constant,
                                   bool bilateral) {
  if (grid.n < 3) throw std::invalid_argument("obstacle assembly requires n >= 3");

  const Index m = grid.interior_per_side();
  const Index dofs = m * m;
  const double h = grid.h();

  // Bilinear element stiffness on a square cell, counterclockwise node order.
  // Mesh-size independent for the Dirichlet energy.
  static const double ke[4][4] = {{4.0, -1.0, -2.0, -1.0},
                                  {-1.0, 4.0, -1.0, -2.0},
                                  {-2.0, -1.0, 4.0, -1.0},
                                  {-1.0, -2.0, -1.0, 4.0}};

  auto interior_id = [m](Index i, Index j) -> Index {
    // Node (i, j) with i, j in 1..n-1; -1 for boundary nodes.
    return (j - 1) * m + (i - 1);
  };
  auto is_interior = [&grid](Index i, Index j) {
    return i >= 1 && i <= grid.n - 1 && j >= 1 && j <= grid.n - 1;
  };

  SparseSymMatrix stiffness(dofs);
  Vector load = Vector::Zero(dofs);
  const double cell_load = source_constant * h * h / 4.0;

  for (Index ej = 0; ej < grid.n; ++ej) {
    for (Index ei = 0; ei < grid.n; ++ei) {
      const Index nodes_i[4] = {ei, ei + 1, ei + 1, ei};
      const Index nodes_j[4] = {ej, ej, ej + 1, ej + 1};
      for (int a = 0; a < 4; ++a) {
        if (!is_interior(nodes_i[a], nodes_j[a])) continue;
        const Index row = interior_id(nodes_i[a], nodes_j[a]);
        load[row] += cell_load;
        for (int b = 0; b < 4; ++b) {
          if (!is_interior(nodes_i[b], nodes_j[b])) continue;
          stiffness.add(row, interior_id(nodes_i[b], nodes_j[b]), ke[a][b] / 6.0);
        }
      }
    }
  }
  stiffness.finalize();

  Vector obstacle(dofs);
  for (Index j = 1; j <= m; ++j)
    for (Index i = 1; i <= m; ++i)
      obstacle[interior_id(i, j)] = distance_to_boundary(i * h, j * h);

  ObstacleInstance instance{grid, source_constant, std::move(stiffness), std::move(load),
                            std::move(obstacle), bilateral};
  return instance;
}

SparseSymMatrix assemble_fd_laplacian(const GridSpec& grid) {
  if (grid.n < 3) throw std::invalid_argument("finite difference grid requires n >= 3");

  const Index m = grid.interior_per_side();
  const double w = 1.0 / (grid.h() * grid.h());
  SparseSymMatrix lap(m * m);
  for (Index j = 0; j < m; ++j) {
    for (Index i = 0; i < m; ++i) {
      const Index id = j * m + i;
      lap.add(id, id, 4.0 * w);
      if (i > 0) lap.add(id, id - 1, -w);
      if (i + 1 < m) lap.add(id, id + 1, -w);
      if (j > 0) lap.add(id, id - m, -w);
      if (j + 1 < m) lap.add(id, id + m, -w);
    }
  }
  lap.finalize();
  return lap;
}

Objective InverseSourceInstance::make_objective() const {
  auto solver = laplacian_solver;
  const Vector data = y_delta;
  const double weight = eta;
  const Index n = u_star.size();

  auto value = [solver, data, weight](const Vector& u) {
    const Vector y = solver->solve(u);
    return 0.5 * (y - data).squaredNorm() + 0.5 * weight * u.squaredNorm();
  };
  auto gradient = [solver, data, weight](const Vector& u) {
    const Vector y = solver->solve(u);
    const Vector p = solver->solve(y - data);
    return Vector(p + weight * u);
  };
  auto hessian = [solver, weight](const Vector&, const Vector& v) {
    return Vector(solver->solve(solver->solve(v)) + weight * v);
  };
  return Objective::general(n, value, gradient, hessian);
}

ConstraintSystem InverseSourceInstance::make_bounds() const {
  return box_bounds(u_star.size(), 0.0, 1.0);
}

PenaltyProblem InverseSourceInstance::make_problem(double beta) const {
  return PenaltyProblem(make_objective(), make_bounds(), beta);
}

StepSolver InverseSourceInstance::make_step_solver(double alpha, double beta) const {
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  auto K = std::make_shared<SparseMatrix>(laplacian.matrix());
  auto K2 = std::make_shared<SparseMatrix>(laplacian_squared.matrix());
  const double weight = eta;
  const Index n = u_star.size();

  return [K, K2, alpha, beta, weight, n](const Vector&, const DiagonalWeights& chi,
                                         const Vector& rhs) {
    if (chi.size() != 2 * n) throw SolveError("inverse source step: weight length mismatch");
    // chi rows stack the upper bound (u <= 1) over the lower bound (-u <= 0);
    // G = [I; -I] collapses G^t chi G to one diagonal.
    Vector combined = chi.entries.head(n) + chi.entries.tail(n);

    // alpha (K^{-2} + eta I) + beta chi applied to d = K z turns into the
    // sparse symmetric system (alpha I + alpha eta K^2 + beta K chi K) z = K rhs.
    SparseMatrix system = *K2 * (alpha * weight);
    system += beta * SparseMatrix(*K * combined.asDiagonal() * *K);
    system += SparseMatrix(alpha * sparse_identity(n));
    auto [z, rep] = spd_solve(SparseSymMatrix::from_eigen_symmetrized(system), *K * rhs);
    if (!rep.success)
      throw SolveError("inverse source step system solve failed (residual " +
                       std::to_string(rep.residual_norm) + ")");
    return Vector(*K * z);
  };
}

InverseSourceInstance assemble_inverse_source(const GridSpec& grid, double eta,
                                              const NoiseSpec& noise, Vector u_star) {
  if (!(eta > 0.0)) throw std::invalid_argument("eta must be positive");

  InverseSourceInstance instance;
  instance.grid = grid;
  instance.eta = eta;
  instance.laplacian = assemble_fd_laplacian(grid);
  instance.laplacian_squared = SparseSymMatrix::from_eigen(
      SparseMatrix(instance.laplacian.matrix() * instance.laplacian.matrix()));
  instance.laplacian_solver = std::make_shared<SpdFactorization>(instance.laplacian);

  if (u_star.size() == 0) u_star = default_ground_truth(grid, 1.0);
  if (u_star.size() != grid.interior_count())
    throw std::invalid_argument("ground truth length does not match the grid");
  instance.u_star = std::move(u_star);
  instance.y_clean = instance.laplacian_solver->solve(instance.u_star);
  instance.y_delta = add_noise(instance.y_clean, noise);
  return instance;
}

Vector InverseMediumInstance::forward(const Vector& u) const {
  if (u.size() != source.size()) throw std::invalid_argument("forward: dimension mismatch");
  SparseMatrix op = laplacian.matrix();
  for (Index i = 0; i < u.size(); ++i) op.coeffRef(i, i) += u[i];
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(op);
  if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 0.0)
    throw SolveError("forward operator is not positive definite (negative potential probe)");
  return ldlt.solve(source);
}

Objective InverseMediumInstance::make_objective() const {
  auto lap = std::make_shared<SparseMatrix>(laplacian.matrix());
  auto f = std::make_shared<Vector>(source);
  auto data = std::make_shared<Vector>(y_delta);
  const double weight = eta;
  const Index n = source.size();

  auto factorize = [lap](const Vector& u) {
    SparseMatrix op = *lap;
    for (Index i = 0; i < u.size(); ++i) op.coeffRef(i, i) += u[i];
    auto ldlt = std::make_shared<Eigen::SimplicialLDLT<SparseMatrix>>(op);
    if (ldlt->info() != Eigen::Success || ldlt->vectorD().minCoeff() <= 0.0)
      throw SolveError("forward operator is not positive definite (negative potential probe)");
    return ldlt;
  };

  auto value = [factorize, f, data, weight](const Vector& u) {
    auto ldlt = factorize(u);
    const Vector y = ldlt->solve(*f);
    return 0.5 * (y - *data).squaredNorm() + 0.5 * weight * u.squaredNorm();
  };
  auto gradient = [factorize, f, data, weight](const Vector& u) {
    auto ldlt = factorize(u);
    const Vector y = ldlt->solve(*f);
    const Vector p = ldlt->solve(y - *data);
    return Vector(-y.cwiseProduct(p) + weight * u);
  };
  return Objective::general(n, value, gradient);
}

ConstraintSystem InverseMediumInstance::make_bounds() const {
  return box_bounds(source.size(), 0.0, upper_bound);
}

PenaltyProblem InverseMediumInstance::make_problem(double beta) const {
  return PenaltyProblem(make_objective(), make_bounds(), beta);
}

StepSolver InverseMediumInstance::make_step_solver(double alpha, double beta) const {
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  const double p_diag = 1.0 / 100.0 + eta;
  const Index n = source.size();

  return [alpha, beta, p_diag, n](const Vector&, const DiagonalWeights& chi,
                                  const Vector& rhs) {
    if (chi.size() != 2 * n) throw SolveError("inverse medium step: weight length mismatch");
    const Vector combined = chi.entries.head(n) + chi.entries.tail(n);
    Vector d(n);
    for (Index i = 0; i < n; ++i) d[i] = rhs[i] / (alpha * p_diag + beta * combined[i]);
    return d;
  };
}

InverseMediumInstance assemble_inverse_medium(const GridSpec& grid, double eta,
                                              double upper_bound, const NoiseSpec& noise,
                                              Vector u_star, double source_value) {
  if (!(eta > 0.0)) throw std::invalid_argument("eta must be positive");
  if (!(upper_bound > 0.0)) throw std::invalid_argument("upper bound must be positive");

  InverseMediumInstance instance;
  instance.grid = grid;
  instance.eta = eta;
  instance.upper_bound = upper_bound;
  instance.source_value = source_value;
  instance.laplacian = assemble_fd_laplacian(grid);
  instance.source = Vector::Constant(grid.interior_count(), source_value);

  if (u_star.size() == 0)
    u_star = default_ground_truth(grid, std::min(1.0, upper_bound));
  if (u_star.size() != grid.interior_count())
    throw std::invalid_argument("ground truth length does not match the grid");
  if (u_star.minCoeff() < 0.0 || u_star.maxCoeff() > upper_bound)
    throw std::invalid_argument("ground truth must lie within [0, U]");
  instance.u_star = std::move(u_star);
  instance.y_clean = instance.forward(instance.u_star);
  instance.y_delta = add_noise(instance.y_clean, noise);
  return instance;
}

namespace {

// Forward difference along one image axis; rows on the far edge stay zero so
// the operator is square, matching the weight-vector length n^2.
SparseMatrix forward_difference(Index rows, Index cols, bool along_x) {
  const Index n = rows * cols;
  SparseMatrix d(n, n);
  std::vector<Triplet> trips;
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      const Index id = r * cols + c;
      if (along_x) {
        if (c + 1 < cols) {
          trips.emplace_back(id, id, -1.0);
          trips.emplace_back(id, id + 1, 1.0);
        }
      } else {
        if (r + 1 < rows) {
          trips.emplace_back(id, id, -1.0);
          trips.emplace_back(id, id + cols, 1.0);
        }
      }
    }
  }
  d.setFromTriplets(trips.begin(), trips.end());
  return d;
}

Vector abs_prime(const Vector& v, double eps) {
  Vector out(v.size());
  for (Index i = 0; i < v.size(); ++i) out[i] = phi_eps_abs_prime(v[i], eps);
  return out;
}

double abs_psi(const Vector& v, double eps) {
  double sum = 0.0;
  for (Index i = 0; i < v.size(); ++i) sum += phi_eps_abs(v[i], eps);
  return sum;
}

DiagonalWeights symmetric_weights(const Vector& v, double eps) {
  DiagonalWeights w;
  w.entries = Vector(v.size());
  w.active.assign(static_cast<std::size_t>(v.size()), true);
  for (Index i = 0; i < v.size(); ++i) w.entries[i] = 1.0 / std::max(eps, std::abs(v[i]));
  return w;
}

}  // namespace

DenoiseInstance make_denoise(Index rows, Index cols, Vector noisy_image, double eta1,
                             double eta2) {
  if (rows < 2 || cols < 2) throw std::invalid_argument("image must be at least 2x2");
  if (noisy_image.size() != rows * cols)
    throw std::invalid_argument("image length does not match its dimensions");
  if (eta1 < 0.0 || eta2 < 0.0)
    throw std::invalid_argument("regularization weights must be nonnegative");

  DenoiseInstance instance;
  instance.rows = rows;
  instance.cols = cols;
  instance.noisy = std::move(noisy_image);
  instance.diff_x = forward_difference(rows, cols, true);
  instance.diff_y = forward_difference(rows, cols, false);
  instance.laplacian = SparseSymMatrix::from_eigen(
      SparseMatrix(instance.diff_x.transpose() * instance.diff_x +
                   instance.diff_y.transpose() * instance.diff_y));
  instance.eta1 = eta1;
  instance.eta2 = eta2;
  instance.dx = 1.0 / static_cast<double>(cols);
  instance.dy = 1.0 / static_cast<double>(rows);
  return instance;
}

DenoiseInstance make_denoise_1d(Vector noisy_signal, double eta1) {
  const Index m = noisy_signal.size();
  if (m < 2) throw std::invalid_argument("signal must have at least 2 samples");
  if (eta1 < 0.0) throw std::invalid_argument("regularization weight must be nonnegative");

  DenoiseInstance instance;
  instance.rows = 1;
  instance.cols = m;
  instance.noisy = std::move(noisy_signal);
  instance.diff_x = forward_difference(1, m, true);
  instance.diff_y = SparseMatrix(m, m);  // no vertical neighbors
  instance.laplacian = SparseSymMatrix::from_eigen(
      SparseMatrix(instance.diff_x.transpose() * instance.diff_x));
  instance.eta1 = eta1;
  instance.eta2 = 0.0;
  instance.dx = 1.0 / static_cast<double>(m);
  instance.dy = 1.0;
  return instance;
}

double denoise_value(const Vector& u, const DenoiseInstance& instance, double eps) {
  double value = 0.5 * (u - instance.noisy).squaredNorm();
  if (instance.eta1 > 0.0)
    value += instance.eta1 *
             (abs_psi(instance.diff_x * u, eps) + abs_psi(instance.diff_y * u, eps));
  if (instance.eta2 > 0.0) value += instance.eta2 * abs_psi(instance.laplacian.apply(u), eps);
  return value;
}

Vector denoise_gradient(const Vector& u, const DenoiseInstance& instance, double eps) {
  Vector grad = u - instance.noisy;
  if (instance.eta1 > 0.0) {
    grad += instance.eta1 *
            (instance.diff_x.transpose() * abs_prime(instance.diff_x * u, eps) +
             instance.diff_y.transpose() * abs_prime(instance.diff_y * u, eps));
  }
  if (instance.eta2 > 0.0) {
    grad += instance.eta2 *
            (instance.laplacian.matrix().transpose() *
             abs_prime(instance.laplacian.apply(u), eps));
  }
  return grad;
}

Vector denoise_step_multiparam(const Vector& u, const DenoiseInstance& instance,
                               double alpha, double eps) {
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  if (u.size() != instance.noisy.size())
    throw std::invalid_argument("denoise step: dimension mismatch");

  const Index n = u.size();
  SparseMatrix system = alpha * sparse_identity(n);
  if (instance.eta1 > 0.0) {
    const DiagonalWeights wx = symmetric_weights(instance.diff_x * u, eps);
    const DiagonalWeights wy = symmetric_weights(instance.diff_y * u, eps);
    system += instance.eta1 *
              SparseMatrix(instance.diff_x.transpose() * wx.entries.asDiagonal() *
                           instance.diff_x);
    system += instance.eta1 *
              SparseMatrix(instance.diff_y.transpose() * wy.entries.asDiagonal() *
                           instance.diff_y);
  }
  if (instance.eta2 > 0.0) {
    const DiagonalWeights wh = symmetric_weights(instance.laplacian.apply(u), eps);
    system += instance.eta2 *
              SparseMatrix(instance.laplacian.matrix() * wh.entries.asDiagonal() *
                           instance.laplacian.matrix());
  }

  auto [d, rep] = spd_solve(SparseSymMatrix::from_eigen_symmetrized(system),
                            -denoise_gradient(u, instance, eps));
  if (!rep.success)
    throw SolveError("denoise step system solve failed (residual " +
                     std::to_string(rep.residual_norm) + ")");
  return Vector(u + d);
}

SolveReport solve_denoise(Vector u0, const DenoiseInstance& instance, double alpha,
                          double eps, double tol, int max_iter) {
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
  if (max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");

  SolveReport report;
  Vector u = std::move(u0);
  double prev_j = 0.0;
  int k = 0;
  while (true) {
    const Vector grad = denoise_gradient(u, instance, eps);
    const double gnorm = inf_norm(grad);
    const double j = denoise_value(u, instance, eps);

    // Count of difference entries outside the smoothing band.
    Index saturated = 0;
    const Vector vx = instance.diff_x * u;
    const Vector vy = instance.diff_y * u;
    for (Index i = 0; i < vx.size(); ++i) {
      if (std::abs(vx[i]) >= eps) ++saturated;
      if (std::abs(vy[i]) >= eps) ++saturated;
    }

    if (k > 0 && j > prev_j + 1e-12 * tolerance_scale(prev_j)) ++report.nonmonotone_steps;
    prev_j = j;
    report.grad_inf = gnorm;

    if (gnorm < tol) {
      report.trace.append({k, j, gnorm, saturated, 0.0, 0.0,
                           std::numeric_limits<double>::quiet_NaN()});
      report.converged = true;
      report.termination = Termination::tolerance;
      break;
    }
    if (k >= max_iter) {
      report.trace.append({k, j, gnorm, saturated, 0.0, 0.0,
                           std::numeric_limits<double>::quiet_NaN()});
      report.termination = Termination::max_iter;
      break;
    }

    Vector u_next;
    try {
      u_next = denoise_step_multiparam(u, instance, alpha, eps);
    } catch (const SolveError& err) {
      report.trace.append({k, j, gnorm, saturated, 0.0, 0.0,
                           std::numeric_limits<double>::quiet_NaN()});
      report.termination = Termination::solver_failure;
      report.message = err.what();
      break;
    }
    report.trace.append({k, j, gnorm, saturated, (u_next - u).norm(), 1.0,
                         std::numeric_limits<double>::quiet_NaN()});
    u = std::move(u_next);
    ++k;
  }

  report.x = std::move(u);
  report.iterations = k;
  return report;
}

DiagonalWeights tv_weights(const Vector& u, const SparseMatrix& diff_x,
                           const SparseMatrix& diff_y, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  const Vector vx = diff_x * u;
  const Vector vy = diff_y * u;
  DiagonalWeights w;
  w.entries = Vector(vx.size());
  w.active.assign(static_cast<std::size_t>(vx.size()), true);
  for (Index i = 0; i < vx.size(); ++i) {
    const double r = std::sqrt(vx[i] * vx[i] + vy[i] * vy[i]);
    w.entries[i] = 1.0 / std::max(eps, r);
  }
  return w;
}

double tv_value(const Vector& u, const DenoiseInstance& instance, double eps) {
  const Vector vx = instance.diff_x * u;
  const Vector vy = instance.diff_y * u;
  double sum = 0.0;
  for (Index i = 0; i < vx.size(); ++i)
    sum += phi_eps(std::sqrt(vx[i] * vx[i] + vy[i] * vy[i]), eps);
  return instance.dx * instance.dy * sum;
}

Vector tv_gradient(const Vector& u, const DenoiseInstance& instance, double eps) {
  const DiagonalWeights chi = tv_weights(u, instance.diff_x, instance.diff_y, eps);
  const Vector vx = instance.diff_x * u;
  const Vector vy = instance.diff_y * u;
  return instance.dx * instance.dy *
         (instance.diff_x.transpose() * chi.entries.cwiseProduct(vx) +
          instance.diff_y.transpose() * chi.entries.cwiseProduct(vy));
}

void write_grid_text(const std::string& path, const Vector& field, Index rows, Index cols) {
  if (field.size() != rows * cols)
    throw std::invalid_argument("field length does not match its dimensions");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      if (c > 0) out << ' ';
      out << format_full(field[r * cols + c]);
    }
    out << '\n';
  }
}

Vector read_grid_text(const std::string& path, Index& rows, Index& cols) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<double> values;
  rows = 0;
  cols = -1;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    Index count = 0;
    double v = 0.0;
    while (ss >> v) {
      values.push_back(v);
      ++count;
    }
    if (cols < 0)
      cols = count;
    else if (count != cols)
      throw std::runtime_error("ragged grid file: " + path);
    ++rows;
  }
  Vector field(static_cast<Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) field[static_cast<Index>(i)] = values[i];
  return field;
}

void write_pgm(const std::string& path, const Vector& image, Index rows, Index cols) {
  if (image.size() != rows * cols)
    throw std::invalid_argument("image length does not match its dimensions");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);

  const double lo = image.minCoeff();
  const double hi = image.maxCoeff();
  const double span = hi > lo ? hi - lo : 1.0;
  out << "P2\n" << cols << " " << rows << "\n255\n";
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      const int gray =
          static_cast<int>(std::lround(255.0 * (image[r * cols + c] - lo) / span));
      out << std::min(255, std::max(0, gray));
      out << (c + 1 == cols ? '\n' : ' ');
    }
  }
}

}  // namespace pforge
