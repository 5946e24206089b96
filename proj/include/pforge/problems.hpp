#pragma once

#include "pforge/penalty.hpp"
#include "pforge/solvers.hpp"

#include <cstdint>
#include <memory>
#include <string>

namespace pforge {

/// Uniform Cartesian grid on the unit square with n subdivisions per side.
struct GridSpec {
  Index n = 2;

  GridSpec() = default;
  explicit GridSpec(Index subdivisions);
  double h() const { return 1.0 / static_cast<double>(n); }
  Index interior_per_side() const { return n - 1; }
  Index interior_count() const { return (n - 1) * (n - 1); }
};

/// Distance from a point of the closed unit square to its boundary,
/// 1/2 (1 - max(|2x - 1|, |2y - 1|)).
double distance_to_boundary(double x, double y);

struct NoiseSpec {
  enum class Mode { additive_uniform, relative_max };

  double level = 0.0;  // delta
  Mode mode = Mode::additive_uniform;
  std::uint64_t seed = 1;
};

/// Uniform [-1, 1] noise, deterministic under a fixed seed.
/// additive_uniform: y + delta * rand; relative_max: y + delta * max(y) * rand.
Vector add_noise(const Vector& y, const NoiseSpec& spec);

/// Dirichlet energy minimization under the distance-to-boundary upper bound,
/// discretized with bilinear elements on interior nodes.
struct ObstacleInstance {
  GridSpec grid;
  double source_constant = 10.0;
  SparseSymMatrix stiffness;  // interior nodes, Dirichlet rows eliminated
  Vector load;
  Vector obstacle;  // nodal bound values
  bool bilateral = false;

  PenaltyProblem make_problem(double beta) const;
  /// Start at the bound: from a fully active feasible point the active set
  /// only shrinks, which keeps the objective monotone along the iteration.
  Vector initial_point() const { return obstacle; }
};

ObstacleInstance assemble_obstacle(const GridSpec& grid, double source_constant,
                                   bool bilateral = false);

/// Five-point finite difference Laplacian on interior nodes (positive
/// definite convention), Dirichlet boundary eliminated.
SparseSymMatrix assemble_fd_laplacian(const GridSpec& grid);

/// Source identification for the Poisson equation from noisy state data,
/// with Tikhonov regularization and bound constraints 0 <= u <= 1.
struct InverseSourceInstance {
  GridSpec grid;
  double eta = 0.0;
  SparseSymMatrix laplacian;  // K
  SparseSymMatrix laplacian_squared;
  std::shared_ptr<const SpdFactorization> laplacian_solver;
  Vector u_star;
  Vector y_clean;
  Vector y_delta;

  /// 1/2 ||K^{-1} u - y_delta||^2 + eta/2 ||u||^2, gradient p + eta u with
  /// the adjoint p solved from K p = K^{-1} u - y_delta.
  Objective make_objective() const;
  ConstraintSystem make_bounds() const;  // [I; -I] u <= [1; 0]
  PenaltyProblem make_problem(double beta) const;

  /// Step-system solver realizing the recommended preconditioner
  /// P = K^{-2} + eta I through multiplication by K^2: with d = K z it
  /// solves (alpha I + alpha eta K^2 + beta K chi K) z = K rhs.
  StepSolver make_step_solver(double alpha, double beta) const;

  Vector initial_point() const { return Vector::Zero(u_star.size()); }
};

/// Passing an empty u_star selects the default ground truth: the indicator
/// of the centered square of side 0.4.
InverseSourceInstance assemble_inverse_source(const GridSpec& grid, double eta,
                                              const NoiseSpec& noise, Vector u_star = {});

/// Potential identification in -Delta y + u y = f from noisy state data,
/// with bounds 0 <= u <= U. Gradients are computed by one forward and one
/// adjoint solve per call.
struct InverseMediumInstance {
  GridSpec grid;
  double eta = 0.0;
  double upper_bound = 1.0;
  double source_value = 10.0;
  SparseSymMatrix laplacian;
  Vector source;  // constant right-hand side
  Vector u_star;
  Vector y_clean;
  Vector y_delta;

  /// Solution of (-Delta + diag(u)) y = f; rejects an indefinite operator.
  Vector forward(const Vector& u) const;

  Objective make_objective() const;
  ConstraintSystem make_bounds() const;  // [I; -I] u <= [U; 0]
  PenaltyProblem make_problem(double beta) const;

  /// The step matrix (1/100 + eta) I + beta (chi_up + chi_lo) is diagonal.
  StepSolver make_step_solver(double alpha, double beta) const;

  Vector initial_point() const { return Vector::Zero(u_star.size()); }
};

InverseMediumInstance assemble_inverse_medium(const GridSpec& grid, double eta,
                                              double upper_bound, const NoiseSpec& noise,
                                              Vector u_star = {}, double source_value = 10.0);

/// Image denoising data for the multi-parameter nonsmooth Tikhonov iteration:
/// 1/2 ||u - vec(f)||^2 + eta1 sum (phi(|Dx u|) + phi(|Dy u|)) + eta2 sum phi(|H u|).
struct DenoiseInstance {
  Index rows = 0;
  Index cols = 0;
  Vector noisy;           // vec(f), row-major
  SparseMatrix diff_x;    // forward differences, zero rows on the far edge
  SparseMatrix diff_y;
  SparseSymMatrix laplacian;  // symmetric 5-point stencil Dx^t Dx + Dy^t Dy
  double eta1 = 0.0;
  double eta2 = 0.0;
  double dx = 1.0;  // cell sizes carried by the isotropic TV functional
  double dy = 1.0;
};

DenoiseInstance make_denoise(Index rows, Index cols, Vector noisy_image, double eta1,
                             double eta2);
DenoiseInstance make_denoise_1d(Vector noisy_signal, double eta1);

double denoise_value(const Vector& u, const DenoiseInstance& instance, double eps);
Vector denoise_gradient(const Vector& u, const DenoiseInstance& instance, double eps);

/// One reweighted step with the symmetric weights 1/max(eps, |v_j|):
/// (alpha I + eta1 (Dx^t chi Dx + Dy^t chi Dy) + eta2 H^t chi H) d = -grad,
/// returning u + d.
Vector denoise_step_multiparam(const Vector& u, const DenoiseInstance& instance,
                               double alpha, double eps);

SolveReport solve_denoise(Vector u0, const DenoiseInstance& instance, double alpha,
                          double eps, double tol, int max_iter);

/// Isotropic weights 1/max(eps, r_i) from the joint gradient magnitude
/// r_i = sqrt([Dx u]_i^2 + [Dy u]_i^2). The mask is true on every row.
DiagonalWeights tv_weights(const Vector& u, const SparseMatrix& diff_x,
                           const SparseMatrix& diff_y, double eps);

/// dx dy * sum_i phi_eps(r_i) and its gradient dx dy (Dx^t chi Dx + Dy^t chi Dy) u.
double tv_value(const Vector& u, const DenoiseInstance& instance, double eps);
Vector tv_gradient(const Vector& u, const DenoiseInstance& instance, double eps);

// Field import/export: plain-text grids (one row per line), 8-bit PGM with a
// linear gray map.
void write_grid_text(const std::string& path, const Vector& field, Index rows, Index cols);
Vector read_grid_text(const std::string& path, Index& rows, Index& cols);
void write_pgm(const std::string& path, const Vector& image, Index rows, Index cols);

}  // namespace pforge
