#include "pforge/runner.hpp"

#include "support/oracles.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace pforge;

namespace {

namespace fs = std::filesystem;

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("config parsing") {
  SUBCASE("symbolic eps resolves from the grid") {
    const RunConfig config = parse_config(
        "problem = obstacle\n"
        "solver = algorithm1\n"
        "n = 50\n"
        "beta = 0.01\n"
        "eps = h^2\n");
    CHECK(config.eps.symbolic_h2);
    CHECK(config.eps.resolve(1.0 / 50.0) == doctest::Approx(4e-4).epsilon(1e-15));
  }
  SUBCASE("missing solver is named") {
    try {
      parse_config("problem = scalar\n");
      FAIL("expected ConfigError");
    } catch (const ConfigError& err) {
      CHECK(err.field == "solver");
    }
  }
  SUBCASE("nonpositive tol is named") {
    try {
      parse_config("problem = scalar\nsolver = algorithm1\ntol = -1\n");
      FAIL("expected ConfigError");
    } catch (const ConfigError& err) {
      CHECK(err.field == "tol");
      CHECK(std::string(err.what()).find("positive") != std::string::npos);
    }
  }
  SUBCASE("unknown keys are rejected by name") {
    try {
      parse_config("problem = scalar\nsolver = algorithm1\nfoo = 1\n");
      FAIL("expected ConfigError");
    } catch (const ConfigError& err) {
      CHECK(std::string(err.what()).find("foo") != std::string::npos);
    }
  }
  SUBCASE("comments and blank lines are ignored") {
    const RunConfig config = parse_config(
        "# scalar check\n"
        "problem = scalar\n"
        "\n"
        "solver = algorithm2  # with line search\n"
        "beta = 2\n");
    CHECK(config.solver == SolverKind::algorithm2);
    CHECK(config.beta == 2.0);
  }
  SUBCASE("symbolic eps needs a grid") {
    CHECK_THROWS_AS(parse_config("problem = scalar\nsolver = algorithm1\neps = h^2\n"),
                    ConfigError);
  }
}

TEST_CASE("scalar run writes trace, report and solution") {
  TempDir dir("pforge_run_scalar");
  RunConfig config = parse_config(
      "problem = scalar\n"
      "solver = algorithm1\n"
      "g = -1\n"
      "beta = 2\n"
      "eps = 0.1\n"
      "x0 = -1.2\n");
  config.out_dir = dir.path.string();

  const RunReport report = run(config);
  CHECK(report.exit_code == 0);
  REQUIRE(report.ok);
  CHECK(report.solve.converged);
  CHECK(report.solve.iterations == 5);
  CHECK(std::abs(report.solve.x[0] - (-20.0 / 21.0)) <= 1e-12);

  CHECK(fs::exists(dir.path / "trace.csv"));
  CHECK(fs::exists(dir.path / "report.json"));
  CHECK(fs::exists(dir.path / "solution.mm"));
  const std::string json = slurp((dir.path / "report.json").string());
  CHECK(json.find("\"converged\": true") != std::string::npos);
  CHECK(json.find("\"problem\": \"scalar\"") != std::string::npos);
}

TEST_CASE("identical config and seed give a bit-identical trace") {
  TempDir dir1("pforge_det_1");
  TempDir dir2("pforge_det_2");
  RunConfig config = parse_config(
      "problem = inverse_source\n"
      "solver = algorithm1\n"
      "n = 8\n"
      "eta = 1e-4\n"
      "delta = 1e-3\n"
      "seed = 9\n"
      "beta = 1\n"
      "eps = h^2\n"
      "max_iter = 40\n");
  config.out_dir = dir1.path.string();
  const RunReport first = run(config);
  config.out_dir = dir2.path.string();
  const RunReport second = run(config);
  REQUIRE(first.ok);
  REQUIRE(second.ok);
  CHECK(slurp((dir1.path / "trace.csv").string()) ==
        slurp((dir2.path / "trace.csv").string()));
}

TEST_CASE("objective column never increases on a convex run") {
  TempDir dir("pforge_monotone");
  RunConfig config = parse_config(
      "problem = obstacle\n"
      "solver = algorithm1\n"
      "n = 10\n"
      "beta = 0.01\n"
      "eps = h^2\n"
      "max_iter = 60\n");
  config.out_dir = dir.path.string();
  const RunReport report = run(config);
  REQUIRE(report.ok);
  CHECK(report.solve.converged);
  double previous = 1e100;
  for (const TraceRecord& rec : report.solve.trace.records()) {
    CHECK(rec.j_eps <= previous + 1e-12 * tolerance_scale(previous));
    previous = rec.j_eps;
  }
}

TEST_CASE("solver failure still writes the report with its reason") {
  TempDir dir("pforge_fail");
  RunConfig config = parse_config(
      "problem = scalar\n"
      "solver = algorithm2\n"
      "g = -1\n"
      "beta = 2\n"
      "eps = 0.1\n"
      "x0 = -1.2\n"
      "ls_max_backtracks = 0\n");
  config.out_dir = dir.path.string();
  const RunReport report = run(config);
  CHECK(report.exit_code == 3);
  CHECK(report.solve.termination == Termination::solver_failure);
  CHECK(fs::exists(dir.path / "report.json"));
  const std::string json = slurp((dir.path / "report.json").string());
  CHECK(json.find("solver_failure") != std::string::npos);
}

TEST_CASE("every solver dispatches on the scalar problem") {
  for (const std::string solver : {"algorithm1", "algorithm2", "newton", "pdas"}) {
    TempDir dir("pforge_dispatch_" + solver);
    RunConfig config = parse_config("problem = scalar\nsolver = " + solver +
                                    "\ng = -1\nbeta = 2\neps = 0.1\nx0 = -0.95\n");
    config.out_dir = dir.path.string();
    const RunReport report = run(config);
    INFO("solver ", solver);
    CHECK(report.exit_code == 0);
    REQUIRE(report.ok);
    // The penalty solvers land on the smoothed solution, the active-set
    // method on the constrained one.
    if (solver == "pdas")
      CHECK(std::abs(report.solve.x[0] + 1.0) <= 1e-10);
    else
      CHECK(std::abs(report.solve.x[0] + 20.0 / 21.0) <= 1e-9);
  }
}

TEST_CASE("sweep isolates runs and writes the summary") {
  SUBCASE("eps sweep reproduces the closed-form scalar solutions") {
    TempDir dir("pforge_sweep_eps");
    RunConfig base = parse_config(
        "problem = scalar\n"
        "solver = algorithm1\n"
        "g = -1\n"
        "beta = 2\n"
        "eps = 0.1\n"
        "x0 = -1.2\n"
        "max_iter = 400\n");
    base.export_solution = false;
    const auto reports = sweep(base, "eps", {1e-1, 1e-2, 1e-3}, 1, dir.path.string());
    REQUIRE(reports.size() == 3);
    const double expected[] = {2.0 * (-1.0) / 2.1, 2.0 * (-1.0) / 2.01, 2.0 * (-1.0) / 2.001};
    for (int i = 0; i < 3; ++i) {
      REQUIRE(reports[i].ok);
      CHECK(std::abs(reports[i].solve.x[0] - expected[i]) <= 1e-12);
    }
    CHECK(fs::exists(dir.path / "sweep_summary.csv"));
    const std::string summary = slurp((dir.path / "sweep_summary.csv").string());
    CHECK(summary.find("parameter,value,converged,iterations") == 0);
  }
  SUBCASE("seed sweep varies the data but not the structure") {
    TempDir dir("pforge_sweep_seed");
    RunConfig base = parse_config(
        "problem = inverse_source\n"
        "solver = algorithm1\n"
        "n = 8\n"
        "eta = 1e-4\n"
        "delta = 1e-2\n"
        "beta = 1\n"
        "eps = h^2\n"
        "max_iter = 60\n");
    base.export_solution = false;
    base.export_trace = false;
    const auto reports = sweep(base, "seed", {1, 2, 3, 4, 5}, 2, dir.path.string());
    REQUIRE(reports.size() == 5);
    for (const auto& r : reports) REQUIRE(r.ok);
    // Distinct noise draws give distinct solutions of the same dimension.
    for (int i = 1; i < 5; ++i) {
      CHECK(reports[i].solve.x.size() == reports[0].solve.x.size());
      CHECK(inf_norm(reports[i].solve.x - reports[0].solve.x) > 0.0);
    }
  }
  SUBCASE("beta sweep crosses the exactness threshold") {
    const oracle::RandomQp qp = oracle::make_random_qp(211, 4, 3, 1);
    const oracle::QpSolution reference =
        oracle::enumerate_qp(qp.a_dense, qp.b, qp.g_dense, qp.g_rhs);
    REQUIRE(reference.found);
    const double mu_max = inf_norm(reference.mu);
    REQUIRE(mu_max > 1e-8);

    SolverConfig config;
    config.epsilon = 1e-6;
    config.tol = 1e-8;
    config.max_iter = 400;
    double weak_violation = 0.0;
    double strong_violation = 0.0;
    for (double beta : {mu_max / 100.0, 2.0 * mu_max, 100.0 * mu_max}) {
      const PenaltyProblem p = qp.problem(beta);
      const SolveReport report = solve_fixed_point(Vector::Zero(4), p, config);
      REQUIRE(report.converged);
      const double violation = std::max(0.0, p.constraints.residual(report.x).maxCoeff());
      if (beta < mu_max)
        weak_violation = violation;
      else
        strong_violation = std::max(strong_violation, violation);
    }
    CHECK(weak_violation > config.epsilon);
    CHECK(strong_violation <= config.epsilon + 1e-12);
  }
}

TEST_CASE("export emits problem data without solving") {
  TempDir dir("pforge_export");
  const RunConfig config = parse_config(
      "problem = obstacle\n"
      "solver = algorithm1\n"
      "n = 6\n");
  const auto files = export_problem(config, dir.path.string());
  CHECK(files.size() == 3);
  CHECK(fs::exists(dir.path / "stiffness.mm"));
  CHECK(fs::exists(dir.path / "load.mm"));
  CHECK(fs::exists(dir.path / "obstacle.mm"));
  const SparseMatrix stiffness = read_matrix_market((dir.path / "stiffness.mm").string());
  CHECK(stiffness.rows() == 25);
}

TEST_CASE("thread cap reads the environment variable") {
  CHECK(solver_thread_cap() >= 0);
}
