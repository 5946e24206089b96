#pragma once

#include "pforge/penalty.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace pforge {

/// Problem-supplied step-system solver: given the current iterate, the
/// diagonal weights at that iterate and the right-hand side -grad J_eps,
/// returns the direction d solving (alpha P + beta G^t chi G) d = rhs for
/// the problem's recommended preconditioner P.
using StepSolver =
    std::function<Vector(const Vector& x, const DiagonalWeights& chi, const Vector& rhs)>;

enum class PreconditionerChoice { identity, supplied, problem_recommended };

struct SolverConfig {
  double alpha = 1.0;    // stabilizing stepsize in front of P
  double epsilon = 1e-6; // penalty smoothing width
  PreconditionerChoice preconditioner = PreconditionerChoice::problem_recommended;
  std::optional<SparseSymMatrix> preconditioner_matrix;  // used with `supplied`
  std::optional<StepSolver> step_solver;                 // overrides matrix assembly
  double tol = 1e-10;       // on ||grad J_eps||_inf
  int max_iter = 100;
  double linear_tol = 1e-12;
  bool stop_on_nonmonotone = false;  // off: objective increases are recorded, not fatal
  bool record_iterates = false;
};

struct TraceRecord {
  int k = 0;
  double j_eps = 0.0;
  double grad_inf = 0.0;
  Index active_size = 0;
  double step_norm = 0.0;        // ||d^k||_2 of the step leaving iterate k
  double alpha_k = 0.0;          // line-search steplength (1 for the plain iteration)
  double energy_identity = 0.0;  // per-step energy balance residual, NaN if unavailable
};

/// Append-only per-iteration record with strictly increasing k from 0.
class IterateTrace {
 public:
  void append(TraceRecord rec);
  const std::vector<TraceRecord>& records() const { return records_; }
  bool empty() const { return records_.empty(); }
  std::size_t size() const { return records_.size(); }
  const TraceRecord& back() const { return records_.back(); }

 private:
  std::vector<TraceRecord> records_;
};

enum class Termination { tolerance, max_iter, solver_failure, nonmonotone_guard };
std::string to_string(Termination t);

struct SolveReport {
  Vector x;
  bool converged = false;
  int iterations = 0;
  double grad_inf = 0.0;
  Termination termination = Termination::max_iter;
  std::string message;
  int nonmonotone_steps = 0;  // objective increases beyond the 1e-12 slack
  IterateTrace trace;
  std::vector<Vector> iterates;  // populated when config.record_iterates
};

struct StepDiagnostics {
  double descent_inner = 0.0;  // <d, grad J_eps>, negative for genuine steps
  Index active_size = 0;
  SpdSolveReport linear;
};

/// Resolves the effective preconditioner: the supplied matrix, the identity,
/// or (problem_recommended) the quadratic matrix A when positive definite
/// and the identity otherwise.
SparseSymMatrix resolve_preconditioner(const PenaltyProblem& problem,
                                       const SolverConfig& config);

/// One implicit fixed-point step: solves
///   (alpha P + beta G^t chi_eps(x) G) d = -grad J_eps(x).
/// The direction is guaranteed to be a descent direction for J_eps when the
/// preconditioner is positive definite and the gradient is nonzero.
std::pair<Vector, StepDiagnostics> fixed_point_step(const Vector& x,
                                                    const PenaltyProblem& problem,
                                                    const SolverConfig& config);

/// Implicit fixed-point iteration: x^{k+1} = x^k + d^k until
/// ||grad J_eps||_inf < tol or the iteration cap.
SolveReport solve_fixed_point(Vector x0, const PenaltyProblem& problem,
                              const SolverConfig& config);

struct LineSearchControl {
  double c1 = 1e-4;
  double shrink = 0.5;
  int max_backtracks = 50;
};

struct LineSearchError : SolveError {
  double last_alpha;
  double last_value;
  LineSearchError(const std::string& what, double alpha, double value)
      : SolveError(what), last_alpha(alpha), last_value(value) {}
};

/// Backtracking steplength: the largest alpha in {1, shrink, shrink^2, ...}
/// with J_eps(x + alpha d) <= J_eps(x) + c1 alpha <grad J_eps(x), d>.
/// Requires a descent direction; throws LineSearchError when the backtrack
/// budget is exhausted.
double armijo_line_search(const Vector& x, const Vector& d, const PenaltyProblem& problem,
                          double eps, const LineSearchControl& control = {});

/// Fixed-point direction with an Armijo steplength per iteration.
SolveReport solve_line_search(Vector x0, const PenaltyProblem& problem,
                              const SolverConfig& config,
                              const LineSearchControl& control = {});

/// Generalized-derivative weights: 1/eps exactly on rows with
/// (Gx - g)_j in the open interval (0, eps), zero elsewhere.
DiagonalWeights newton_weight_matrix(const Vector& x, const PenaltyProblem& problem,
                                     double eps);

/// Semismooth Newton direction solving (F''(x) + beta G^t N G) d = -grad J_eps(x).
/// No descent guarantee; a singular Newton matrix raises SolveError.
Vector semismooth_newton_step(const Vector& x, const PenaltyProblem& problem, double eps);

/// Plain semismooth Newton iteration (no globalization).
SolveReport solve_semismooth_newton(Vector x0, const PenaltyProblem& problem,
                                    const SolverConfig& config);

struct PdasOptions {
  double gamma = 1.0;   // active-set prediction weight, any positive value
  double reg = 0.0;     // saddle regularization; > 0 guards singular systems
  int max_iter = 100;   // cycling guard
  double kkt_tol = 1e-10;
};

/// Primal-dual iteration state: the active set and its complement partition
/// the constraint rows, and mu vanishes on the inactive rows after each step.
struct PdasState {
  Vector x;
  Vector mu;
  double gamma = 1.0;
  std::vector<Index> active;

  std::vector<Index> inactive(Index rows) const;
};

struct PdasResult {
  SolveReport report;
  PdasState state;

  const Vector& mu() const { return state.mu; }
};

/// Primal-dual active set iteration: predicts the active rows from
/// mu + gamma (Gx - g), solves the equality-constrained saddle system on
/// them, and stops when consecutive active sets repeat.
PdasResult solve_pdas(Vector x0, Vector mu0, const PenaltyProblem& problem,
                      const PdasOptions& options = {});

/// Residual of the per-step energy balance identity for quadratic objectives:
///   R + F(x^{k+1}) - F(x^k) + beta/2 (chi G d, G d)
///     + beta/2 sum_active chi_j (|(Gx^{k+1}-g)_j|^2 - |(Gx^k-g)_j|^2) = 0
/// with R = alpha (P d, d) - 1/2 (A d, d). Vanishes (to roundoff) exactly on
/// genuine fixed-point steps.
double energy_identity_residual(const Vector& x_k, const Vector& x_k1,
                                const PenaltyProblem& problem, const SolverConfig& config);

struct SweepEntry {
  double eps = 0.0;
  Vector x;
  double j_exact = 0.0;  // unregularized penalty objective at the solution
  bool converged = false;
  int iterations = 0;
  std::string error;
};

/// Solves the problem for each eps in a strictly decreasing list, warm
/// starting from the previous solution. Per-eps failures are recorded and
/// the sweep continues.
std::vector<SweepEntry> consistency_sweep(const PenaltyProblem& problem,
                                          const std::vector<double>& eps_list,
                                          const SolverConfig& config, Vector x0);

/// Scalar iteration maps for the one-dimensional model problem
/// min 1/2 x^2 + beta phi_eps(x - g), with sign(0) = 1.
double scalar_fixed_point_map(double x, double g, double beta, double eps);
double scalar_newton_map(double x, double g, double beta, double eps);

// Trace and report export.
void write_trace_csv(std::ostream& out, const IterateTrace& trace);
void write_trace_csv(const std::string& path, const IterateTrace& trace);
std::string report_to_json(const SolveReport& report);
void write_report_json(const std::string& path, const SolveReport& report);

}  // namespace pforge
