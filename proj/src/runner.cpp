#include "pforge/runner.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <random>
#include <sstream>

namespace pforge {

namespace fs = std::filesystem;

namespace {

std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key, key + ": not a number: '" + value + "'");
  }
}

long long parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key, key + ": not an integer: '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  throw ConfigError(key, key + ": not a boolean: '" + value + "'");
}

ProblemKind parse_problem(const std::string& value) {
  if (value == "scalar") return ProblemKind::scalar;
  if (value == "obstacle") return ProblemKind::obstacle;
  if (value == "inverse_source") return ProblemKind::inverse_source;
  if (value == "inverse_medium") return ProblemKind::inverse_medium;
  if (value == "denoise") return ProblemKind::denoise;
  throw ConfigError("problem", "problem: unknown value '" + value + "'");
}

SolverKind parse_solver(const std::string& value) {
  if (value == "algorithm1") return SolverKind::algorithm1;
  if (value == "algorithm2") return SolverKind::algorithm2;
  if (value == "newton") return SolverKind::newton;
  if (value == "pdas") return SolverKind::pdas;
  throw ConfigError("solver", "solver: unknown value '" + value + "'");
}

// Synthetic piecewise-constant test image for the denoising problem.
Vector synthetic_image(Index rows, Index cols) {
  Vector img = Vector::Constant(rows * cols, 0.2);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      const double x = (c + 0.5) / static_cast<double>(cols);
      const double y = (r + 0.5) / static_cast<double>(rows);
      if (std::abs(x - 0.35) < 0.2 && std::abs(y - 0.4) < 0.25) img[r * cols + c] = 0.8;
      if (x > 0.7) img[r * cols + c] = 0.5;
    }
  }
  return img;
}

}  // namespace

std::string to_string(ProblemKind p) {
  switch (p) {
    case ProblemKind::scalar: return "scalar";
    case ProblemKind::obstacle: return "obstacle";
    case ProblemKind::inverse_source: return "inverse_source";
    case ProblemKind::inverse_medium: return "inverse_medium";
    case ProblemKind::denoise: return "denoise";
  }
  return "unknown";
}

std::string to_string(SolverKind s) {
  switch (s) {
    case SolverKind::algorithm1: return "algorithm1";
    case SolverKind::algorithm2: return "algorithm2";
    case SolverKind::newton: return "newton";
    case SolverKind::pdas: return "pdas";
  }
  return "unknown";
}

int solver_thread_cap() {
  const char* env = std::getenv("PENALTY_FORGE_THREADS");
  if (!env) return 0;
  const int v = std::atoi(env);
  return v > 0 ? v : 0;
}

RunConfig parse_config(const std::string& text) {
  RunConfig config;
  bool have_problem = false;
  bool have_solver = false;

  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("", "parse error at line " + std::to_string(line_no) +
                                ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError(key, "parse error at line " + std::to_string(line_no) +
                                 ": empty key or value");

    if (key == "problem") {
      config.problem = parse_problem(value);
      have_problem = true;
    } else if (key == "solver") {
      config.solver = parse_solver(value);
      have_solver = true;
    } else if (key == "n") {
      config.n = parse_int(key, value);
    } else if (key == "C") {
      config.c = parse_double(key, value);
    } else if (key == "eta") {
      config.eta = parse_double(key, value);
    } else if (key == "eta2") {
      config.eta2 = parse_double(key, value);
    } else if (key == "delta") {
      config.delta = parse_double(key, value);
    } else if (key == "seed") {
      config.seed = static_cast<std::uint64_t>(parse_int(key, value));
    } else if (key == "beta") {
      config.beta = parse_double(key, value);
    } else if (key == "g") {
      config.scalar_g = parse_double(key, value);
    } else if (key == "x0") {
      config.scalar_x0 = parse_double(key, value);
    } else if (key == "U") {
      config.upper_bound = parse_double(key, value);
    } else if (key == "f") {
      config.f_const = parse_double(key, value);
    } else if (key == "bilateral") {
      config.bilateral = parse_bool(key, value);
    } else if (key == "noise_mode") {
      if (value != "additive" && value != "relative")
        throw ConfigError(key, "noise_mode: expected 'additive' or 'relative'");
      config.noise_mode = value;
    } else if (key == "alpha") {
      config.alpha = parse_double(key, value);
    } else if (key == "eps") {
      if (value == "h^2" || value == "h2") {
        config.eps.symbolic_h2 = true;
      } else {
        config.eps.symbolic_h2 = false;
        config.eps.value = parse_double(key, value);
      }
    } else if (key == "tol") {
      config.tol = parse_double(key, value);
    } else if (key == "max_iter") {
      config.max_iter = static_cast<int>(parse_int(key, value));
    } else if (key == "preconditioner") {
      if (value != "problem" && value != "identity")
        throw ConfigError(key, "preconditioner: expected 'problem' or 'identity'");
      config.preconditioner = value;
    } else if (key == "gamma") {
      config.gamma = parse_double(key, value);
    } else if (key == "reg") {
      config.reg = parse_double(key, value);
    } else if (key == "ls_c1") {
      config.ls_c1 = parse_double(key, value);
    } else if (key == "ls_shrink") {
      config.ls_shrink = parse_double(key, value);
    } else if (key == "ls_max_backtracks") {
      config.ls_max_backtracks = static_cast<int>(parse_int(key, value));
    } else if (key == "out") {
      config.out_dir = value;
    } else if (key == "export_trace") {
      config.export_trace = parse_bool(key, value);
    } else if (key == "export_report") {
      config.export_report = parse_bool(key, value);
    } else if (key == "export_solution") {
      config.export_solution = parse_bool(key, value);
    } else {
      throw ConfigError(key, "unknown key '" + key + "'");
    }
  }

  if (!have_problem) throw ConfigError("problem", "missing required key 'problem'");
  if (!have_solver) throw ConfigError("solver", "missing required key 'solver'");

  // Validate every field before any computation.
  if (config.n < 3 && config.problem != ProblemKind::scalar)
    throw ConfigError("n", "n must be at least 3");
  if (!(config.beta > 0.0)) throw ConfigError("beta", "beta must be positive");
  if (!(config.alpha > 0.0)) throw ConfigError("alpha", "alpha must be positive");
  if (!(config.tol > 0.0)) throw ConfigError("tol", "tol must be positive");
  if (config.max_iter < 1) throw ConfigError("max_iter", "max_iter must be >= 1");
  if (config.delta < 0.0) throw ConfigError("delta", "delta must be nonnegative");
  if (!(config.gamma > 0.0)) throw ConfigError("gamma", "gamma must be positive");
  if (config.reg < 0.0) throw ConfigError("reg", "reg must be nonnegative");
  if (!(config.ls_shrink > 0.0 && config.ls_shrink < 1.0))
    throw ConfigError("ls_shrink", "ls_shrink must lie in (0, 1)");
  if (config.ls_max_backtracks < 0)
    throw ConfigError("ls_max_backtracks", "ls_max_backtracks must be nonnegative");
  if (config.eps.symbolic_h2 && config.problem == ProblemKind::scalar)
    throw ConfigError("eps", "eps = h^2 requires a grid problem");
  if (!config.eps.symbolic_h2 && !(config.eps.value > 0.0))
    throw ConfigError("eps", "eps must be positive");
  if ((config.problem == ProblemKind::inverse_source ||
       config.problem == ProblemKind::inverse_medium) &&
      !(config.eta > 0.0))
    throw ConfigError("eta", "eta must be positive for the inverse problems");
  if (config.problem == ProblemKind::denoise && config.solver != SolverKind::algorithm1)
    throw ConfigError("solver", "problem denoise supports only solver algorithm1");
  if (config.problem == ProblemKind::inverse_medium &&
      (config.solver == SolverKind::newton || config.solver == SolverKind::pdas))
    throw ConfigError("solver",
                      "inverse_medium provides gradients only; use algorithm1 or algorithm2");
  if (config.eta2 < 0.0) throw ConfigError("eta2", "eta2 must be nonnegative");
  if (!(config.upper_bound > 0.0)) throw ConfigError("U", "U must be positive");
  return config;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

namespace {

std::string resolved_noise_mode(const RunConfig& config) {
  if (config.noise_mode != "auto") return config.noise_mode;
  return config.problem == ProblemKind::inverse_medium ? "relative" : "additive";
}

struct AssembledRun {
  std::optional<PenaltyProblem> problem;
  Vector x0;
  std::optional<StepSolver> step_solver;
  std::optional<Vector> ground_truth;
  Index field_rows = 0;  // nonzero when the solution is a grid field
  Index field_cols = 0;
  std::optional<DenoiseInstance> denoise;
  double resolved_eps = 0.0;
};

AssembledRun assemble(const RunConfig& config) {
  AssembledRun run;
  const GridSpec grid(config.n);
  const double eps = config.eps.resolve(config.problem == ProblemKind::scalar
                                            ? 1.0
                                            : grid.h());
  run.resolved_eps = eps;

  NoiseSpec noise;
  noise.level = config.delta;
  noise.seed = config.seed;
  noise.mode = resolved_noise_mode(config) == "relative"
                   ? NoiseSpec::Mode::relative_max
                   : NoiseSpec::Mode::additive_uniform;

  switch (config.problem) {
    case ProblemKind::scalar: {
      SparseSymMatrix a = SparseSymMatrix::identity(1);
      SparseMatrix g_mat(1, 1);
      g_mat.insert(0, 0) = 1.0;
      run.problem.emplace(Objective::quadratic(std::move(a), Vector::Zero(1)),
                          ConstraintSystem(std::move(g_mat), Vector::Constant(1, config.scalar_g)),
                          config.beta);
      run.x0 = Vector::Constant(1, config.scalar_x0);
      break;
    }
    case ProblemKind::obstacle: {
      ObstacleInstance inst = assemble_obstacle(grid, config.c, config.bilateral);
      run.problem.emplace(inst.make_problem(config.beta));
      run.x0 = inst.initial_point();
      run.field_rows = grid.interior_per_side();
      run.field_cols = grid.interior_per_side();
      break;
    }
    case ProblemKind::inverse_source: {
      InverseSourceInstance inst = assemble_inverse_source(grid, config.eta, noise);
      run.problem.emplace(inst.make_problem(config.beta));
      run.x0 = inst.initial_point();
      if (config.preconditioner == "problem")
        run.step_solver = inst.make_step_solver(config.alpha, config.beta);
      run.ground_truth = inst.u_star;
      run.field_rows = grid.interior_per_side();
      run.field_cols = grid.interior_per_side();
      break;
    }
    case ProblemKind::inverse_medium: {
      InverseMediumInstance inst = assemble_inverse_medium(grid, config.eta, config.upper_bound,
                                                           noise, {}, config.f_const);
      run.problem.emplace(inst.make_problem(config.beta));
      run.x0 = inst.initial_point();
      if (config.preconditioner == "problem")
        run.step_solver = inst.make_step_solver(config.alpha, config.beta);
      run.ground_truth = inst.u_star;
      run.field_rows = grid.interior_per_side();
      run.field_cols = grid.interior_per_side();
      break;
    }
    case ProblemKind::denoise: {
      const Index rows = config.n;
      const Index cols = config.n;
      Vector truth = synthetic_image(rows, cols);
      Vector noisy = add_noise(truth, noise);
      run.denoise = make_denoise(rows, cols, std::move(noisy), config.eta, config.eta2);
      run.x0 = run.denoise->noisy;
      run.ground_truth = std::move(truth);
      run.field_rows = rows;
      run.field_cols = cols;
      break;
    }
  }
  return run;
}

SolverConfig make_solver_config(const RunConfig& config, const AssembledRun& run) {
  SolverConfig sc;
  sc.alpha = config.alpha;
  sc.epsilon = run.resolved_eps;
  sc.tol = config.tol;
  sc.max_iter = config.max_iter;
  sc.preconditioner = config.preconditioner == "identity"
                          ? PreconditionerChoice::identity
                          : PreconditionerChoice::problem_recommended;
  sc.step_solver = run.step_solver;
  return sc;
}

nlohmann::json config_echo(const RunConfig& c) {
  nlohmann::json j;
  j["problem"] = to_string(c.problem);
  j["solver"] = to_string(c.solver);
  j["n"] = c.n;
  j["C"] = c.c;
  j["eta"] = c.eta;
  j["eta2"] = c.eta2;
  j["delta"] = c.delta;
  j["seed"] = c.seed;
  j["beta"] = c.beta;
  j["g"] = c.scalar_g;
  j["x0"] = c.scalar_x0;
  j["U"] = c.upper_bound;
  j["f"] = c.f_const;
  j["bilateral"] = c.bilateral;
  j["noise_mode"] = resolved_noise_mode(c);
  j["alpha"] = c.alpha;
  j["eps"] = c.eps.symbolic_h2 ? nlohmann::json("h^2") : nlohmann::json(c.eps.value);
  j["tol"] = c.tol;
  j["max_iter"] = c.max_iter;
  j["preconditioner"] = c.preconditioner;
  j["gamma"] = c.gamma;
  j["reg"] = c.reg;
  return j;
}

}  // namespace

RunReport run(const RunConfig& config) {
  RunReport report;
  report.config = config;

  const auto t0 = std::chrono::steady_clock::now();
  fs::create_directories(config.out_dir);

  AssembledRun assembled;
  try {
    assembled = assemble(config);
  } catch (const std::exception& err) {
    report.failure = std::string("assembly failed: ") + err.what();
    report.exit_code = 3;
  }

  if (report.failure.empty()) {
    try {
      if (config.problem == ProblemKind::denoise) {
        report.solve = solve_denoise(assembled.x0, *assembled.denoise, config.alpha,
                                     assembled.resolved_eps, config.tol, config.max_iter);
      } else {
        const PenaltyProblem& problem = *assembled.problem;
        const SolverConfig sc = make_solver_config(config, assembled);
        switch (config.solver) {
          case SolverKind::algorithm1:
            report.solve = solve_fixed_point(assembled.x0, problem, sc);
            break;
          case SolverKind::algorithm2: {
            LineSearchControl control{config.ls_c1, config.ls_shrink, config.ls_max_backtracks};
            report.solve = solve_line_search(assembled.x0, problem, sc, control);
            break;
          }
          case SolverKind::newton:
            report.solve = solve_semismooth_newton(assembled.x0, problem, sc);
            break;
          case SolverKind::pdas: {
            PdasOptions options;
            options.gamma = config.gamma;
            options.reg = config.reg;
            options.max_iter = config.max_iter;
            PdasResult result = solve_pdas(assembled.x0,
                                           Vector::Zero(problem.constraints.rows()), problem,
                                           options);
            report.solve = std::move(result.report);
            break;
          }
        }
      }
      report.ok = true;
    } catch (const std::exception& err) {
      report.failure = std::string("solver failed: ") + err.what();
      report.exit_code = 3;
    }
  }

  if (report.ok) {
    if (config.problem == ProblemKind::denoise) {
      report.feasibility_max_violation = 0.0;
    } else {
      const Vector residual = assembled.problem->constraints.residual(report.solve.x);
      report.feasibility_max_violation = residual.size() ? residual.maxCoeff() : 0.0;
    }
    if (assembled.ground_truth) {
      report.error_l2 = (report.solve.x - *assembled.ground_truth).norm();
      report.error_inf = inf_norm(report.solve.x - *assembled.ground_truth);
    }
    switch (report.solve.termination) {
      case Termination::tolerance: report.exit_code = 0; break;
      case Termination::max_iter: report.exit_code = 2; break;
      case Termination::nonmonotone_guard: report.exit_code = 2; break;
      case Termination::solver_failure: report.exit_code = 3; break;
    }
  }

  // Exports; the report is written even when the solver failed.
  try {
    if (config.export_trace && report.ok) {
      const std::string path = (fs::path(config.out_dir) / "trace.csv").string();
      write_trace_csv(path, report.solve.trace);
      report.output_files.push_back(path);
    }
    if (config.export_solution && report.ok) {
      if (assembled.field_rows > 0) {
        const std::string path = (fs::path(config.out_dir) / "solution.txt").string();
        write_grid_text(path, report.solve.x, assembled.field_rows, assembled.field_cols);
        report.output_files.push_back(path);
        if (config.problem == ProblemKind::denoise) {
          const std::string pgm = (fs::path(config.out_dir) / "solution.pgm").string();
          write_pgm(pgm, report.solve.x, assembled.field_rows, assembled.field_cols);
          report.output_files.push_back(pgm);
        }
      } else {
        const std::string path = (fs::path(config.out_dir) / "solution.mm").string();
        write_matrix_market_vector(path, report.solve.x);
        report.output_files.push_back(path);
      }
    }
  } catch (const std::exception& err) {
    if (report.failure.empty()) {
      report.failure = std::string("export failed: ") + err.what();
      report.exit_code = 3;
      report.ok = false;
    }
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (config.export_report) {
    nlohmann::json j;
    j["config"] = config_echo(config);
    j["ok"] = report.ok;
    j["failure"] = report.failure;
    j["wall_seconds"] = report.wall_seconds;
    j["exit_code"] = report.exit_code;
    j["feasibility_max_violation"] = report.feasibility_max_violation;
    if (report.error_l2) j["error_l2"] = *report.error_l2;
    if (report.error_inf) j["error_inf"] = *report.error_inf;
    j["output_files"] = report.output_files;
    if (report.ok) j["solve"] = nlohmann::json::parse(report_to_json(report.solve));
    const std::string path = (fs::path(config.out_dir) / "report.json").string();
    std::ofstream out(path);
    if (out) {
      out << j.dump(2) << "\n";
      report.output_files.push_back(path);
    }
  }
  return report;
}

namespace {

void set_parameter(RunConfig& config, const std::string& parameter, double value) {
  if (parameter == "eps") {
    config.eps.symbolic_h2 = false;
    config.eps.value = value;
  } else if (parameter == "beta") {
    config.beta = value;
  } else if (parameter == "eta") {
    config.eta = value;
  } else if (parameter == "eta2") {
    config.eta2 = value;
  } else if (parameter == "delta") {
    config.delta = value;
  } else if (parameter == "alpha") {
    config.alpha = value;
  } else if (parameter == "tol") {
    config.tol = value;
  } else if (parameter == "n") {
    config.n = static_cast<Index>(value);
  } else if (parameter == "seed") {
    config.seed = static_cast<std::uint64_t>(value);
  } else if (parameter == "gamma") {
    config.gamma = value;
  } else if (parameter == "reg") {
    config.reg = value;
  } else if (parameter == "C") {
    config.c = value;
  } else if (parameter == "g") {
    config.scalar_g = value;
  } else if (parameter == "x0") {
    config.scalar_x0 = value;
  } else if (parameter == "max_iter") {
    config.max_iter = static_cast<int>(value);
  } else {
    throw ConfigError(parameter, "sweep: unknown numeric parameter '" + parameter + "'");
  }
}

std::string value_tag(double v) {
  std::ostringstream ss;
  ss << v;
  std::string tag = ss.str();
  for (char& c : tag)
    if (c == '.' || c == '+') c = '_';
  return tag;
}

}  // namespace

std::vector<RunReport> sweep(const RunConfig& base, const std::string& parameter,
                             const std::vector<double>& values, int parallel,
                             const std::string& out_dir) {
  if (values.empty()) throw ConfigError(parameter, "sweep: empty value list");
  fs::create_directories(out_dir);

  std::vector<RunConfig> configs;
  configs.reserve(values.size());
  for (double v : values) {
    RunConfig c = base;
    set_parameter(c, parameter, v);
    c.out_dir = (fs::path(out_dir) / (parameter + "_" + value_tag(v))).string();
    configs.push_back(std::move(c));
  }

  std::vector<RunReport> reports(configs.size());
  const int workers = std::max(1, parallel);
  std::size_t next = 0;
  while (next < configs.size()) {
    const std::size_t batch = std::min<std::size_t>(workers, configs.size() - next);
    std::vector<std::future<RunReport>> futures;
    futures.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i) {
      const RunConfig& cfg = configs[next + i];
      futures.push_back(std::async(std::launch::async, [&cfg] {
        try {
          return run(cfg);
        } catch (const std::exception& err) {
          RunReport failed;
          failed.config = cfg;
          failed.failure = err.what();
          failed.exit_code = 3;
          return failed;
        }
      }));
    }
    for (std::size_t i = 0; i < batch; ++i) reports[next + i] = futures[i].get();
    next += batch;
  }

  std::ofstream summary(fs::path(out_dir) / "sweep_summary.csv");
  summary << "parameter,value,converged,iterations,final_J_eps,final_grad_inf,"
             "feasibility,error_l2,exit_code\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const RunReport& r = reports[i];
    const double final_j =
        r.ok && !r.solve.trace.empty() ? r.solve.trace.back().j_eps : 0.0;
    summary << parameter << ',' << format_full(values[i]) << ','
            << (r.ok && r.solve.converged ? 1 : 0) << ',' << r.solve.iterations << ','
            << format_full(final_j) << ',' << format_full(r.solve.grad_inf) << ','
            << format_full(r.feasibility_max_violation) << ','
            << (r.error_l2 ? format_full(*r.error_l2) : "nan") << ',' << r.exit_code << '\n';
  }
  return reports;
}

std::vector<std::string> export_problem(const RunConfig& config, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::vector<std::string> files;
  auto emit_matrix = [&](const std::string& name, const SparseSymMatrix& m) {
    const std::string path = (fs::path(out_dir) / name).string();
    write_matrix_market(path, m);
    files.push_back(path);
  };
  auto emit_vector = [&](const std::string& name, const Vector& v) {
    const std::string path = (fs::path(out_dir) / name).string();
    write_matrix_market_vector(path, v);
    files.push_back(path);
  };

  const GridSpec grid(config.problem == ProblemKind::scalar ? 3 : config.n);
  NoiseSpec noise;
  noise.level = config.delta;
  noise.seed = config.seed;
  noise.mode = resolved_noise_mode(config) == "relative"
                   ? NoiseSpec::Mode::relative_max
                   : NoiseSpec::Mode::additive_uniform;

  switch (config.problem) {
    case ProblemKind::scalar: {
      emit_vector("g.mm", Vector::Constant(1, config.scalar_g));
      break;
    }
    case ProblemKind::obstacle: {
      ObstacleInstance inst = assemble_obstacle(grid, config.c, config.bilateral);
      emit_matrix("stiffness.mm", inst.stiffness);
      emit_vector("load.mm", inst.load);
      emit_vector("obstacle.mm", inst.obstacle);
      break;
    }
    case ProblemKind::inverse_source: {
      InverseSourceInstance inst = assemble_inverse_source(grid, config.eta, noise);
      emit_matrix("laplacian.mm", inst.laplacian);
      emit_vector("y_delta.mm", inst.y_delta);
      emit_vector("u_star.mm", inst.u_star);
      const std::string path = (fs::path(out_dir) / "u_star.txt").string();
      write_grid_text(path, inst.u_star, grid.interior_per_side(), grid.interior_per_side());
      files.push_back(path);
      break;
    }
    case ProblemKind::inverse_medium: {
      InverseMediumInstance inst = assemble_inverse_medium(grid, config.eta, config.upper_bound,
                                                           noise, {}, config.f_const);
      emit_matrix("laplacian.mm", inst.laplacian);
      emit_vector("y_delta.mm", inst.y_delta);
      emit_vector("u_star.mm", inst.u_star);
      break;
    }
    case ProblemKind::denoise: {
      Vector truth = synthetic_image(config.n, config.n);
      Vector noisy = add_noise(truth, noise);
      const std::string truth_path = (fs::path(out_dir) / "truth.pgm").string();
      const std::string noisy_path = (fs::path(out_dir) / "noisy.pgm").string();
      write_pgm(truth_path, truth, config.n, config.n);
      write_pgm(noisy_path, noisy, config.n, config.n);
      files.push_back(truth_path);
      files.push_back(noisy_path);
      emit_vector("noisy.mm", noisy);
      break;
    }
  }
  return files;
}

}  // namespace pforge
