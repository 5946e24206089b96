#include "pforge/penalty.hpp"

#include <cmath>
#include <utility>

namespace pforge {

namespace {

void require_positive_eps(double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
}

}  // namespace

double phi_eps(double s, double eps) {
  require_positive_eps(eps);
  if (s <= 0.0) return 0.5 * eps;
  if (s >= eps) return s;
  return s * s / (2.0 * eps) + 0.5 * eps;
}

double phi_eps_prime(double s, double eps) {
  require_positive_eps(eps);
  if (s <= 0.0) return 0.0;
  if (s >= eps) return 1.0;
  return s / eps;
}

double phi_eps_abs(double s, double eps) { return phi_eps(std::abs(s), eps); }

double phi_eps_abs_prime(double s, double eps) {
  require_positive_eps(eps);
  return s / std::max(eps, std::abs(s));
}

double psi_eps(const Vector& y, double eps) {
  require_positive_eps(eps);
  double sum = 0.0;
  for (Index i = 0; i < y.size(); ++i) sum += phi_eps(y[i], eps);
  return sum;
}

Vector psi_eps_prime(const Vector& y, double eps) {
  require_positive_eps(eps);
  Vector out(y.size());
  for (Index i = 0; i < y.size(); ++i) out[i] = phi_eps_prime(y[i], eps);
  return out;
}

RegularizationParams::RegularizationParams(double eps) : epsilon(eps) {
  require_positive_eps(eps);
}

Index DiagonalWeights::active_count() const {
  Index count = 0;
  for (bool a : active) count += a ? 1 : 0;
  return count;
}

ConstraintSystem::ConstraintSystem(SparseMatrix G_in, Vector g_in)
    : G(std::move(G_in)), g(std::move(g_in)) {
  if (G.rows() != g.size())
    throw std::invalid_argument("constraint system: G rows and g length differ");
  G.makeCompressed();
}

ConstraintSystem ConstraintSystem::bilateral(const SparseMatrix& G, const Vector& g,
                                             const Vector& lower, const Vector& upper) {
  const Index m = G.rows();
  if (g.size() != m || lower.size() != m || upper.size() != m)
    throw std::invalid_argument("bilateral constraint: dimension mismatch");

  SparseMatrix stacked(2 * m, G.cols());
  std::vector<Triplet> trips;
  trips.reserve(2 * static_cast<std::size_t>(G.nonZeros()));
  for (Index k = 0; k < G.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(G, k); it; ++it) {
      trips.emplace_back(it.row(), it.col(), it.value());
      trips.emplace_back(m + it.row(), it.col(), -it.value());
    }
  }
  stacked.setFromTriplets(trips.begin(), trips.end());

  Vector rhs(2 * m);
  rhs.head(m) = g + upper;
  rhs.tail(m) = -(g + lower);
  return ConstraintSystem(std::move(stacked), std::move(rhs));
}

Objective Objective::quadratic(SparseSymMatrix A, Vector b) {
  if (!A.finalized()) A.finalize();
  if (A.size() != b.size())
    throw std::invalid_argument("quadratic objective: A and b dimensions differ");
  if (A.symmetry_error() > 1e-14)
    throw std::invalid_argument("quadratic objective: A is not symmetric");

  Objective obj;
  obj.dim_ = A.size();
  obj.quadratic_ = QuadraticData{std::move(A), std::move(b)};
  return obj;
}

Objective Objective::general(Index dimension, ValueFn value, GradientFn gradient,
                             std::optional<HessianApplyFn> hessian) {
  if (dimension <= 0) throw std::invalid_argument("objective dimension must be positive");
  if (!value || !gradient)
    throw std::invalid_argument("general objective requires value and gradient evaluators");

  Objective obj;
  obj.dim_ = dimension;
  obj.value_ = std::move(value);
  obj.gradient_ = std::move(gradient);
  obj.hessian_ = std::move(hessian);
  return obj;
}

bool Objective::has_hessian() const { return quadratic_.has_value() || hessian_.has_value(); }

double Objective::value(const Vector& x) const {
  if (x.size() != dim_) throw std::invalid_argument("objective value: dimension mismatch");
  if (quadratic_) return 0.5 * x.dot(quadratic_->A.apply(x)) - quadratic_->b.dot(x);
  return value_(x);
}

Vector Objective::gradient(const Vector& x) const {
  if (x.size() != dim_) throw std::invalid_argument("objective gradient: dimension mismatch");
  if (quadratic_) return quadratic_->A.apply(x) - quadratic_->b;
  return gradient_(x);
}

Vector Objective::hessian_apply(const Vector& x, const Vector& v) const {
  if (quadratic_) return quadratic_->A.apply(v);
  if (!hessian_) throw std::invalid_argument("objective has no Hessian-apply evaluator");
  return (*hessian_)(x, v);
}

const SparseSymMatrix& Objective::quadratic_matrix() const {
  if (!quadratic_) throw std::invalid_argument("objective is not quadratic");
  return quadratic_->A;
}

const Vector& Objective::linear_term() const {
  if (!quadratic_) throw std::invalid_argument("objective is not quadratic");
  return quadratic_->b;
}

PenaltyProblem::PenaltyProblem(Objective obj, ConstraintSystem cs, double beta_in)
    : objective(std::move(obj)), constraints(std::move(cs)), beta(beta_in) {
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
  if (objective.dimension() != constraints.cols())
    throw std::invalid_argument("objective and constraint dimensions differ");
}

ChiF chi_f_weights(const Vector& x, const PenaltyProblem& problem, double eps) {
  require_positive_eps(eps);
  if (x.size() != problem.dimension())
    throw std::invalid_argument("chi_f_weights: dimension mismatch");

  const Vector r = problem.constraints.residual(x);
  const Index m = r.size();

  ChiF out;
  out.chi.entries = Vector::Zero(m);
  out.chi.active.assign(static_cast<std::size_t>(m), false);
  out.f = Vector::Zero(m);
  for (Index j = 0; j < m; ++j) {
    if (r[j] >= 0.0) {
      const double denom = std::max(eps, r[j]);
      out.chi.entries[j] = 1.0 / denom;
      out.f[j] = problem.constraints.g[j] / denom;
      out.chi.active[static_cast<std::size_t>(j)] = true;
    }
  }
  return out;
}

double j_eps_value(const Vector& x, const PenaltyProblem& problem, double eps) {
  return problem.objective.value(x) +
         problem.beta * psi_eps(problem.constraints.residual(x), eps);
}

Vector j_eps_gradient(const Vector& x, const PenaltyProblem& problem, double eps) {
  const Vector w = psi_eps_prime(problem.constraints.residual(x), eps);
  return problem.objective.gradient(x) +
         problem.beta * (problem.constraints.G.transpose() * w);
}

double j_exact_value(const Vector& x, const PenaltyProblem& problem) {
  const Vector r = problem.constraints.residual(x);
  double penalty = 0.0;
  for (Index i = 0; i < r.size(); ++i) penalty += std::max(0.0, r[i]);
  return problem.objective.value(x) + problem.beta * penalty;
}

}  // namespace pforge
