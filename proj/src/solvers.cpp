#include "pforge/solvers.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace pforge {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

void validate_config(const SolverConfig& config) {
  if (!(config.alpha > 0.0)) throw std::invalid_argument("solver config: alpha must be positive");
  if (!(config.epsilon > 0.0)) throw std::invalid_argument("solver config: eps must be positive");
  if (!(config.tol > 0.0)) throw std::invalid_argument("solver config: tol must be positive");
  if (config.max_iter < 1) throw std::invalid_argument("solver config: max_iter must be >= 1");
}

std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Resolved step-system context for one solver run.
struct StepContext {
  const StepSolver* custom = nullptr;
  std::optional<SparseSymMatrix> P;
  double alpha = 1.0;
  double beta = 1.0;
  double linear_tol = 1e-12;
};

StepContext make_step_context(const PenaltyProblem& problem, const SolverConfig& config) {
  StepContext ctx;
  ctx.alpha = config.alpha;
  ctx.beta = problem.beta;
  ctx.linear_tol = config.linear_tol;
  if (config.step_solver) {
    ctx.custom = &*config.step_solver;
  } else {
    ctx.P = resolve_preconditioner(problem, config);
  }
  return ctx;
}

Vector solve_step_system(const StepContext& ctx, const PenaltyProblem& problem,
                         const Vector& x, const DiagonalWeights& chi, const Vector& rhs,
                         SpdSolveReport* linear_report = nullptr) {
  if (ctx.custom) {
    Vector d = (*ctx.custom)(x, chi, rhs);
    if (d.size() != x.size())
      throw SolveError("step solver returned a wrong-sized direction");
    if (linear_report) {
      linear_report->method = "custom";
      linear_report->success = true;
    }
    return d;
  }
  SparseSymMatrix M =
      assemble_step_matrix(ctx.alpha, *ctx.P, ctx.beta, problem.constraints.G, chi);
  auto [d, rep] = spd_solve(M, rhs, ctx.linear_tol);
  if (linear_report) *linear_report = rep;
  if (!rep.success)
    throw SolveError("step system solve failed (residual " +
                     std::to_string(rep.residual_norm) + ")");
  return d;
}

double energy_identity_with(const SparseSymMatrix& P, const Vector& x0, const Vector& x1,
                            const PenaltyProblem& problem, double alpha, double eps) {
  const Vector d = x1 - x0;
  const auto& A = problem.objective.quadratic_matrix();
  const double remainder = alpha * d.dot(P.apply(d)) - 0.5 * d.dot(A.apply(d));
  const double df = problem.objective.value(x1) - problem.objective.value(x0);

  const ChiF cf = chi_f_weights(x0, problem, eps);
  const Vector gd = problem.constraints.G * d;
  const Vector after = problem.constraints.residual(x1);
  const Vector before = problem.constraints.residual(x0);
  double quad = 0.0;
  double shift = 0.0;
  for (Index j = 0; j < cf.chi.size(); ++j) {
    quad += cf.chi.entries[j] * gd[j] * gd[j];
    shift += cf.chi.entries[j] * (after[j] * after[j] - before[j] * before[j]);
  }
  return std::abs(remainder + df + 0.5 * problem.beta * quad + 0.5 * problem.beta * shift);
}

enum class Method { fixed_point, line_search, newton };

// Shared driver for the three descent-style iterations. The per-iterate
// records carry the objective, gradient norm, active-set size and the step's
// energy-identity residual when it is defined.
SolveReport run_descent_iteration(Vector x, const PenaltyProblem& problem,
                                  const SolverConfig& config, Method method,
                                  const LineSearchControl& control) {
  validate_config(config);
  if (x.size() != problem.dimension())
    throw std::invalid_argument("solver: x0 dimension mismatch");

  StepContext ctx;
  if (method != Method::newton) ctx = make_step_context(problem, config);
  const bool identity_available = method != Method::newton && !ctx.custom &&
                                  problem.objective.is_quadratic();

  SolveReport report;
  double prev_j = 0.0;
  int k = 0;
  while (true) {
    const Vector grad = j_eps_gradient(x, problem, config.epsilon);
    const double gnorm = inf_norm(grad);
    const double j = j_eps_value(x, problem, config.epsilon);
    const ChiF cf = chi_f_weights(x, problem, config.epsilon);
    const Index active = cf.chi.active_count();
    if (config.record_iterates) report.iterates.push_back(x);

    bool guard_hit = false;
    if (k > 0 && j > prev_j + 1e-12 * tolerance_scale(prev_j)) {
      ++report.nonmonotone_steps;
      guard_hit = config.stop_on_nonmonotone;
    }
    prev_j = j;

    report.grad_inf = gnorm;
    if (gnorm < config.tol) {
      report.trace.append({k, j, gnorm, active, 0.0, 0.0, kNan});
      report.converged = true;
      report.termination = Termination::tolerance;
      break;
    }
    if (guard_hit) {
      report.trace.append({k, j, gnorm, active, 0.0, 0.0, kNan});
      report.termination = Termination::nonmonotone_guard;
      report.message = "objective increased beyond the monotonicity slack";
      break;
    }
    if (k >= config.max_iter) {
      report.trace.append({k, j, gnorm, active, 0.0, 0.0, kNan});
      report.termination = Termination::max_iter;
      break;
    }

    Vector d;
    double alpha_k = 1.0;
    try {
      if (method == Method::newton) {
        d = semismooth_newton_step(x, problem, config.epsilon);
      } else {
        d = solve_step_system(ctx, problem, x, cf.chi, -grad);
        if (method == Method::line_search)
          alpha_k = armijo_line_search(x, d, problem, config.epsilon, control);
      }
    } catch (const SolveError& err) {
      report.trace.append({k, j, gnorm, active, 0.0, 0.0, kNan});
      report.termination = Termination::solver_failure;
      report.message = err.what();
      break;
    }

    const Vector x_next = x + alpha_k * d;
    double energy = kNan;
    if (identity_available && alpha_k == 1.0)
      energy = energy_identity_with(*ctx.P, x, x_next, problem, config.alpha, config.epsilon);
    report.trace.append({k, j, gnorm, active, d.norm(), alpha_k, energy});
    x = x_next;
    ++k;
  }

  report.x = std::move(x);
  report.iterations = k;
  return report;
}

}  // namespace

void IterateTrace::append(TraceRecord rec) {
  const int expected = records_.empty() ? 0 : records_.back().k + 1;
  if (rec.k != expected)
    throw std::invalid_argument("trace records must be appended with consecutive k");
  records_.push_back(rec);
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::tolerance: return "tolerance";
    case Termination::max_iter: return "max_iter";
    case Termination::solver_failure: return "solver_failure";
    case Termination::nonmonotone_guard: return "nonmonotone_guard";
  }
  return "unknown";
}

SparseSymMatrix resolve_preconditioner(const PenaltyProblem& problem,
                                       const SolverConfig& config) {
  const Index n = problem.dimension();
  switch (config.preconditioner) {
    case PreconditionerChoice::identity:
      return SparseSymMatrix::identity(n);
    case PreconditionerChoice::supplied: {
      if (!config.preconditioner_matrix)
        throw std::invalid_argument("supplied preconditioner matrix is missing");
      if (config.preconditioner_matrix->size() != n)
        throw std::invalid_argument("supplied preconditioner has the wrong dimension");
      return *config.preconditioner_matrix;
    }
    case PreconditionerChoice::problem_recommended:
      break;
  }
  if (problem.objective.is_quadratic()) {
    const auto& A = problem.objective.quadratic_matrix();
    Eigen::SimplicialLDLT<SparseMatrix> probe(A.matrix());
    if (probe.info() == Eigen::Success && probe.vectorD().minCoeff() > 0.0) return A;
  }
  return SparseSymMatrix::identity(n);
}

std::pair<Vector, StepDiagnostics> fixed_point_step(const Vector& x,
                                                    const PenaltyProblem& problem,
                                                    const SolverConfig& config) {
  validate_config(config);
  if (x.size() != problem.dimension())
    throw std::invalid_argument("fixed_point_step: dimension mismatch");

  const StepContext ctx = make_step_context(problem, config);
  const Vector grad = j_eps_gradient(x, problem, config.epsilon);
  const ChiF cf = chi_f_weights(x, problem, config.epsilon);

  StepDiagnostics diag;
  diag.active_size = cf.chi.active_count();
  Vector d = solve_step_system(ctx, problem, x, cf.chi, -grad, &diag.linear);
  diag.descent_inner = d.dot(grad);
  return {std::move(d), diag};
}

SolveReport solve_fixed_point(Vector x0, const PenaltyProblem& problem,
                              const SolverConfig& config) {
  return run_descent_iteration(std::move(x0), problem, config, Method::fixed_point, {});
}

double armijo_line_search(const Vector& x, const Vector& d, const PenaltyProblem& problem,
                          double eps, const LineSearchControl& control) {
  const Vector grad = j_eps_gradient(x, problem, eps);
  const double slope = grad.dot(d);
  if (!(slope < 0.0))
    throw std::invalid_argument("armijo_line_search: d is not a descent direction");

  const double j0 = j_eps_value(x, problem, eps);
  double alpha = 1.0;
  double last_value = j0;
  for (int t = 0; t <= control.max_backtracks; ++t) {
    last_value = j_eps_value(x + alpha * d, problem, eps);
    if (last_value <= j0 + control.c1 * alpha * slope) return alpha;
    alpha *= control.shrink;
  }
  throw LineSearchError("armijo_line_search: backtrack budget exhausted", alpha / control.shrink,
                        last_value);
}

SolveReport solve_line_search(Vector x0, const PenaltyProblem& problem,
                              const SolverConfig& config, const LineSearchControl& control) {
  return run_descent_iteration(std::move(x0), problem, config, Method::line_search, control);
}

DiagonalWeights newton_weight_matrix(const Vector& x, const PenaltyProblem& problem,
                                     double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  const Vector r = problem.constraints.residual(x);
  DiagonalWeights w;
  w.entries = Vector::Zero(r.size());
  w.active.assign(static_cast<std::size_t>(r.size()), false);
  for (Index j = 0; j < r.size(); ++j) {
    if (r[j] > 0.0 && r[j] < eps) {
      w.entries[j] = 1.0 / eps;
      w.active[static_cast<std::size_t>(j)] = true;
    }
  }
  return w;
}

Vector semismooth_newton_step(const Vector& x, const PenaltyProblem& problem, double eps) {
  if (!problem.objective.has_hessian())
    throw std::invalid_argument("semismooth Newton requires a Hessian-apply evaluator");

  const DiagonalWeights weights = newton_weight_matrix(x, problem, eps);
  const Vector rhs = -j_eps_gradient(x, problem, eps);
  const SparseMatrix& G = problem.constraints.G;
  const double beta = problem.beta;

  if (problem.objective.is_quadratic()) {
    const SparseSymMatrix& A = problem.objective.quadratic_matrix();
    SparseSymMatrix M = assemble_step_matrix(0.0, A, beta, G, weights, &A);
    auto [d, rep] = spd_solve(M, rhs);
    if (!rep.success) throw SolveError("semismooth Newton matrix is singular or indefinite");
    return std::move(d);
  }

  LinearOperator op(
      x.size(), x.size(),
      [&](const Vector& v) {
        Vector gv = G * v;
        gv.array() *= weights.entries.array();
        return Vector(problem.objective.hessian_apply(x, v) + beta * (G.transpose() * gv));
      },
      [&](const Vector& v) {
        Vector gv = G * v;
        gv.array() *= weights.entries.array();
        return Vector(problem.objective.hessian_apply(x, v) + beta * (G.transpose() * gv));
      });
  auto [d, rep] = spd_solve(op, rhs, SpdSolveOptions{});
  if (!rep.success) throw SolveError("semismooth Newton solve did not converge");
  return std::move(d);
}

SolveReport solve_semismooth_newton(Vector x0, const PenaltyProblem& problem,
                                    const SolverConfig& config) {
  return run_descent_iteration(std::move(x0), problem, config, Method::newton, {});
}

namespace {

SparseSymMatrix materialize_hessian(const PenaltyProblem& problem, const Vector& x) {
  const Index n = problem.dimension();
  if (n > 4096)
    throw SolveError("active-set solve with an apply-only Hessian is limited to 4096 unknowns");
  std::vector<Triplet> trips;
  Vector e = Vector::Zero(n);
  for (Index j = 0; j < n; ++j) {
    e[j] = 1.0;
    Vector col = problem.objective.hessian_apply(x, e);
    e[j] = 0.0;
    for (Index i = 0; i < n; ++i)
      if (col[i] != 0.0) trips.emplace_back(i, j, col[i]);
  }
  SparseMatrix H(n, n);
  H.setFromTriplets(trips.begin(), trips.end());
  return SparseSymMatrix::from_eigen(std::move(H));
}

SparseMatrix select_rows(const SparseMatrix& G, const std::vector<Index>& rows) {
  std::vector<Index> row_map(static_cast<std::size_t>(G.rows()), -1);
  for (std::size_t out = 0; out < rows.size(); ++out)
    row_map[static_cast<std::size_t>(rows[out])] = static_cast<Index>(out);

  std::vector<Triplet> trips;
  for (Index c = 0; c < G.outerSize(); ++c) {
    for (SparseMatrix::InnerIterator it(G, c); it; ++it) {
      const Index out = row_map[static_cast<std::size_t>(it.row())];
      if (out >= 0) trips.emplace_back(out, c, it.value());
    }
  }
  SparseMatrix sel(static_cast<Index>(rows.size()), G.cols());
  sel.setFromTriplets(trips.begin(), trips.end());
  return sel;
}

}  // namespace

std::vector<Index> PdasState::inactive(Index rows) const {
  std::vector<bool> is_active(static_cast<std::size_t>(rows), false);
  for (Index j : active) is_active[static_cast<std::size_t>(j)] = true;
  std::vector<Index> out;
  for (Index j = 0; j < rows; ++j)
    if (!is_active[static_cast<std::size_t>(j)]) out.push_back(j);
  return out;
}

PdasResult solve_pdas(Vector x0, Vector mu0, const PenaltyProblem& problem,
                      const PdasOptions& options) {
  if (!(options.gamma > 0.0)) throw std::invalid_argument("pdas: gamma must be positive");
  if (options.reg < 0.0) throw std::invalid_argument("pdas: reg must be nonnegative");
  if (!problem.objective.has_hessian())
    throw std::invalid_argument(
        "pdas requires a quadratic objective or a Hessian-apply evaluator");
  const Index n = problem.dimension();
  const Index m = problem.constraints.rows();
  if (x0.size() != n || mu0.size() != m)
    throw std::invalid_argument("pdas: initial point dimension mismatch");

  const bool quadratic = problem.objective.is_quadratic();
  const SparseMatrix& G = problem.constraints.G;
  const Vector& g = problem.constraints.g;

  PdasResult result;
  SolveReport& report = result.report;
  Vector x = std::move(x0);
  Vector mu = std::move(mu0);

  auto kkt_residual = [&](const Vector& xv, const Vector& muv) {
    const double stationarity =
        inf_norm(problem.objective.gradient(xv) + G.transpose() * muv);
    const Vector w = muv + options.gamma * (G * xv - g);
    double complementarity = 0.0;
    for (Index j = 0; j < m; ++j)
      complementarity = std::max(complementarity, std::abs(muv[j] - std::max(0.0, w[j])));
    return std::max(stationarity, complementarity);
  };

  std::vector<Index> prev_active;
  bool have_prev = false;
  int k = 0;
  while (true) {
    const Vector w = mu + options.gamma * (G * x - g);
    std::vector<Index> active;
    for (Index j = 0; j < m; ++j)
      if (w[j] > 0.0) active.push_back(j);

    const double jval = problem.objective.value(x);
    const double residual = kkt_residual(x, mu);
    report.grad_inf = residual;

    if (have_prev && active == prev_active) {
      report.trace.append({k, jval, residual, static_cast<Index>(active.size()), 0.0, kNan, kNan});
      const double scale = std::max(tolerance_scale(inf_norm(problem.objective.gradient(x))),
                                    tolerance_scale(inf_norm(g)));
      report.converged = residual <= options.kkt_tol * scale;
      report.termination = report.converged ? Termination::tolerance : Termination::max_iter;
      if (!report.converged)
        report.message = "active set repeated but the KKT residual is above tolerance";
      break;
    }
    if (k >= options.max_iter) {
      report.trace.append({k, jval, residual, static_cast<Index>(active.size()), 0.0, kNan, kNan});
      report.termination = Termination::max_iter;
      report.message = "active-set cycling: iteration cap reached without a repeated set";
      break;
    }

    Vector x_next;
    Vector mu_next = Vector::Zero(m);
    try {
      const SparseMatrix G_active = select_rows(G, active);
      Vector g_active(static_cast<Index>(active.size()));
      for (std::size_t i = 0; i < active.size(); ++i) g_active[static_cast<Index>(i)] = g[active[i]];

      SaddleResult saddle;
      if (quadratic) {
        saddle = saddle_solve(problem.objective.quadratic_matrix(), G_active,
                              problem.objective.linear_term(), g_active, options.reg);
      } else {
        const SparseSymMatrix H = materialize_hessian(problem, x);
        const Vector rhs = H.apply(x) - problem.objective.gradient(x);
        saddle = saddle_solve(H, G_active, rhs, g_active, options.reg);
      }
      x_next = std::move(saddle.x);
      for (std::size_t i = 0; i < active.size(); ++i)
        mu_next[active[i]] = saddle.mu[static_cast<Index>(i)];
    } catch (const SolveError& err) {
      report.trace.append({k, jval, residual, static_cast<Index>(active.size()), 0.0, kNan, kNan});
      report.termination = Termination::solver_failure;
      report.message = err.what();
      break;
    }

    report.trace.append({k, jval, residual, static_cast<Index>(active.size()),
                         (x_next - x).norm(), kNan, kNan});
    x = std::move(x_next);
    mu = std::move(mu_next);
    prev_active = std::move(active);
    have_prev = true;
    ++k;
  }

  report.x = x;
  report.iterations = k;
  result.state.x = std::move(x);
  result.state.mu = std::move(mu);
  result.state.gamma = options.gamma;
  result.state.active = std::move(prev_active);
  return result;
}

double energy_identity_residual(const Vector& x_k, const Vector& x_k1,
                                const PenaltyProblem& problem, const SolverConfig& config) {
  if (!problem.objective.is_quadratic())
    throw std::invalid_argument("energy identity requires a quadratic objective");
  const SparseSymMatrix P = resolve_preconditioner(problem, config);
  return energy_identity_with(P, x_k, x_k1, problem, config.alpha, config.epsilon);
}

std::vector<SweepEntry> consistency_sweep(const PenaltyProblem& problem,
                                          const std::vector<double>& eps_list,
                                          const SolverConfig& config, Vector x0) {
  if (eps_list.empty()) throw std::invalid_argument("consistency sweep: empty eps list");
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    if (!(eps_list[i] > 0.0))
      throw std::invalid_argument("consistency sweep: eps values must be positive");
    if (i > 0 && !(eps_list[i] < eps_list[i - 1]))
      throw std::invalid_argument("consistency sweep: eps values must be strictly decreasing");
  }

  std::vector<SweepEntry> entries;
  Vector warm = std::move(x0);
  for (double eps : eps_list) {
    SweepEntry entry;
    entry.eps = eps;
    SolverConfig cfg = config;
    cfg.epsilon = eps;
    try {
      SolveReport rep = solve_fixed_point(warm, problem, cfg);
      entry.x = rep.x;
      entry.converged = rep.converged;
      entry.iterations = rep.iterations;
      entry.j_exact = j_exact_value(rep.x, problem);
      if (!rep.converged) entry.error = to_string(rep.termination) + ": " + rep.message;
      warm = rep.x;
    } catch (const std::exception& err) {
      entry.error = err.what();
      entry.x = warm;
      entry.j_exact = j_exact_value(warm, problem);
    }
    entries.push_back(std::move(entry));
  }
  return entries;
}

double scalar_fixed_point_map(double x, double g, double beta, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  const double t = x - g;
  const double sign = t >= 0.0 ? 1.0 : 0.0;
  const double numer = x + beta * (std::max(t, 0.0) / std::max(t, eps));
  const double denom = 1.0 + beta * (sign / std::max(t, eps));
  return x - numer / denom;
}

double scalar_newton_map(double x, double g, double beta, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  const double t = x - g;
  const double sign = t >= 0.0 ? 1.0 : 0.0;
  const double numer = x + beta * (std::max(t, 0.0) / std::max(t, eps));
  const double denom = 1.0 + beta * (sign / eps);
  return x - numer / denom;
}

void write_trace_csv(std::ostream& out, const IterateTrace& trace) {
  out << "k,J_eps,grad_inf,active_size,step_norm,alpha_k,lemma2_residual\n";
  for (const TraceRecord& rec : trace.records()) {
    out << rec.k << ',' << format_full(rec.j_eps) << ',' << format_full(rec.grad_inf) << ','
        << rec.active_size << ',' << format_full(rec.step_norm) << ','
        << format_full(rec.alpha_k) << ',' << format_full(rec.energy_identity) << '\n';
  }
}

void write_trace_csv(const std::string& path, const IterateTrace& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  write_trace_csv(out, trace);
}

std::string report_to_json(const SolveReport& report) {
  nlohmann::json j;
  j["converged"] = report.converged;
  j["iterations"] = report.iterations;
  j["grad_inf"] = report.grad_inf;
  j["termination"] = to_string(report.termination);
  j["message"] = report.message;
  j["nonmonotone_steps"] = report.nonmonotone_steps;
  j["trace_rows"] = report.trace.size();
  if (report.x.size() <= 100) {
    j["x"] = std::vector<double>(report.x.data(), report.x.data() + report.x.size());
  } else {
    j["x_size"] = report.x.size();
  }
  return j.dump(2);
}

void write_report_json(const std::string& path, const SolveReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << report_to_json(report) << "\n";
}

}  // namespace pforge
