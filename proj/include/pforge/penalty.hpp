#pragma once

#include "pforge/linalg.hpp"
#include "pforge/types.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace pforge {

/// C^1 smoothing of s -> max(0, s): constant eps/2 for s <= 0, quadratic
/// s^2/(2 eps) + eps/2 on [0, eps], identity above eps.
double phi_eps(double s, double eps);

/// Derivative of phi_eps, equal to max(0, s) / max(eps, s); values in [0, 1].
double phi_eps_prime(double s, double eps);

/// Two-sided variant smoothing s -> |s| (used by the denoising functionals).
double phi_eps_abs(double s, double eps);

/// Derivative of the two-sided variant: s / max(eps, |s|).
double phi_eps_abs_prime(double s, double eps);

/// Sum of phi_eps over the components of y. Satisfies
/// 0 <= psi_eps(y) - sum_i max(0, y_i) <= m * eps / 2.
double psi_eps(const Vector& y, double eps);

/// Componentwise phi_eps_prime.
Vector psi_eps_prime(const Vector& y, double eps);

struct RegularizationParams {
  double epsilon;
  explicit RegularizationParams(double eps);
};

/// Diagonal reweighting of the constraint rows. entries[j] is zero exactly
/// where active[j] is false and lies in (0, 1/eps] where it is true.
struct DiagonalWeights {
  Vector entries;
  std::vector<bool> active;

  Index size() const { return entries.size(); }
  Index active_count() const;
};

/// Unilateral constraint system G x <= g with m rows and n columns.
struct ConstraintSystem {
  SparseMatrix G;
  Vector g;

  ConstraintSystem(SparseMatrix G_in, Vector g_in);

  Index rows() const { return G.rows(); }
  Index cols() const { return G.cols(); }
  Vector residual(const Vector& x) const { return G * x - g; }

  /// Transforms lower <= Gx - g <= upper into the stacked unilateral
  /// system [G; -G] with 2m rows.
  static ConstraintSystem bilateral(const SparseMatrix& G, const Vector& g,
                                    const Vector& lower, const Vector& upper);
};

/// Objective functional: either an explicit quadratic 1/2 x^t A x - b^t x
/// with sparse symmetric A, or a general value/gradient pair with an
/// optional Hessian-apply callback (required only by the Newton solver).
class Objective {
 public:
  using ValueFn = std::function<double(const Vector&)>;
  using GradientFn = std::function<Vector(const Vector&)>;
  using HessianApplyFn = std::function<Vector(const Vector&, const Vector&)>;

  static Objective quadratic(SparseSymMatrix A, Vector b);
  static Objective general(Index dimension, ValueFn value, GradientFn gradient,
                           std::optional<HessianApplyFn> hessian = std::nullopt);

  bool is_quadratic() const { return quadratic_.has_value(); }
  bool has_hessian() const;
  Index dimension() const { return dim_; }

  double value(const Vector& x) const;
  Vector gradient(const Vector& x) const;
  Vector hessian_apply(const Vector& x, const Vector& v) const;

  const SparseSymMatrix& quadratic_matrix() const;
  const Vector& linear_term() const;

 private:
  Objective() = default;

  struct QuadraticData {
    SparseSymMatrix A;
    Vector b;
  };

  Index dim_ = 0;
  std::optional<QuadraticData> quadratic_;
  ValueFn value_;
  GradientFn gradient_;
  std::optional<HessianApplyFn> hessian_;
};

/// Penalized problem F(x) + beta * psi(Gx - g) with beta > 0.
struct PenaltyProblem {
  Objective objective;
  ConstraintSystem constraints;
  double beta;

  PenaltyProblem(Objective obj, ConstraintSystem cs, double beta_in);
  Index dimension() const { return objective.dimension(); }
};

struct ChiF {
  DiagonalWeights chi;
  Vector f;
};

/// Produces the diagonal weights chi and the companion vector f from one
/// pass over Gx - g, so the active mask is consistent between them. On every
/// row, chi_j * (Gx)_j - f_j equals phi_eps_prime((Gx - g)_j).
ChiF chi_f_weights(const Vector& x, const PenaltyProblem& problem, double eps);

/// Regularized objective F(x) + beta * psi_eps(Gx - g).
double j_eps_value(const Vector& x, const PenaltyProblem& problem, double eps);

/// Gradient F'(x) + beta G^t psi_eps'(Gx - g).
Vector j_eps_gradient(const Vector& x, const PenaltyProblem& problem, double eps);

/// Nonsmooth objective F(x) + beta * sum_i max(0, (Gx - g)_i).
double j_exact_value(const Vector& x, const PenaltyProblem& problem);

}  // namespace pforge
