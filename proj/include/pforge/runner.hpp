#pragma once

#include "pforge/problems.hpp"
#include "pforge/solvers.hpp"

#include <optional>
#include <string>
#include <vector>

namespace pforge {

/// Configuration error with the offending field named.
struct ConfigError : std::runtime_error {
  std::string field;
  ConfigError(std::string field_in, const std::string& what)
      : std::runtime_error(what), field(std::move(field_in)) {}
};

enum class ProblemKind { scalar, obstacle, inverse_source, inverse_medium, denoise };
enum class SolverKind { algorithm1, algorithm2, newton, pdas };

std::string to_string(ProblemKind p);
std::string to_string(SolverKind s);

/// Penalty smoothing width: an absolute value or the symbolic "h^2" that
/// resolves to (1/n)^2 once the grid is known.
struct EpsSpec {
  bool symbolic_h2 = false;
  double value = 1e-6;

  double resolve(double h) const { return symbolic_h2 ? h * h : value; }
};

struct RunConfig {
  ProblemKind problem = ProblemKind::scalar;
  SolverKind solver = SolverKind::algorithm1;

  // Problem parameters.
  Index n = 20;            // grid subdivisions per side
  double c = 10.0;         // obstacle source constant
  double eta = 1e-4;       // Tikhonov weight / first denoising weight
  double eta2 = 0.0;       // second denoising weight
  double delta = 0.0;      // noise level
  std::uint64_t seed = 1;
  double beta = 1.0;
  double scalar_g = -1.0;  // scalar model constraint bound
  double scalar_x0 = -1.2;
  double upper_bound = 1.0;  // medium bound U
  double f_const = 10.0;     // medium source value
  bool bilateral = false;  // obstacle two-sided bound
  // "additive" | "relative"; "auto" picks relative for the potential problem
  // (whose data noise scales with the state maximum) and additive otherwise.
  std::string noise_mode = "auto";

  // Solver parameters.
  double alpha = 1.0;
  EpsSpec eps;
  double tol = 1e-10;
  int max_iter = 100;
  std::string preconditioner = "problem";  // "problem" | "identity"
  double gamma = 1.0;  // PDAS active-set weight
  double reg = 0.0;    // PDAS saddle regularization
  double ls_c1 = 1e-4;
  double ls_shrink = 0.5;
  int ls_max_backtracks = 50;

  // Output.
  std::string out_dir = ".";
  bool export_trace = true;
  bool export_report = true;
  bool export_solution = true;
};

/// Parses a flat key = value document; '#' starts a comment. Unknown keys
/// are rejected with the offending key named; every field is validated
/// before any computation.
RunConfig parse_config(const std::string& text);
RunConfig parse_config_file(const std::string& path);

struct RunReport {
  RunConfig config;
  bool ok = false;
  std::string failure;
  SolveReport solve;
  double wall_seconds = 0.0;
  double feasibility_max_violation = 0.0;  // max(Gx - g) at the final iterate
  std::optional<double> error_l2;          // vs ground truth when available
  std::optional<double> error_inf;
  std::vector<std::string> output_files;
  int exit_code = 3;  // 0 converged, 2 max_iter, 3 solver failure
};

/// Assembles the configured problem, dispatches the solver, and writes the
/// trace, report and requested field exports. A report is written even when
/// the solver fails.
RunReport run(const RunConfig& config);

struct SweepSummaryRow {
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
  double final_j_eps = 0.0;
  double final_grad_inf = 0.0;
  double feasibility = 0.0;
  std::optional<double> error_l2;
  int exit_code = 3;
};

/// Independent runs over one numeric parameter; per-run failures are
/// isolated. Writes a combined summary CSV under out_dir.
std::vector<RunReport> sweep(const RunConfig& base, const std::string& parameter,
                             const std::vector<double>& values, int parallel,
                             const std::string& out_dir);

/// Assembles the configured problem and exports its matrices, vectors and
/// fields without solving.
std::vector<std::string> export_problem(const RunConfig& config, const std::string& out_dir);

/// Inner-solver thread cap from PENALTY_FORGE_THREADS (0: unset).
int solver_thread_cap();

}  // namespace pforge
