// Batch front-end for the penalty-forge solvers: parses run configurations,
// assembles the benchmark problems, dispatches the solvers and emits traces,
// reports and solution fields.

#include "pforge/runner.hpp"
#include "pforge/solvers.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

std::vector<double> parse_value_list(const std::string& csv) {
  std::vector<double> values;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    values.push_back(std::stod(item));
  }
  return values;
}

int run_selftest() {
  using namespace pforge;

  // Built-in one-dimensional problem: min 1/2 x^2 + beta phi_eps(x - g)
  // with g = -1, beta = 2, eps = 0.1, started at -1.2.
  SparseSymMatrix a = SparseSymMatrix::identity(1);
  SparseMatrix g_mat(1, 1);
  g_mat.insert(0, 0) = 1.0;
  PenaltyProblem problem(Objective::quadratic(std::move(a), Vector::Zero(1)),
                         ConstraintSystem(std::move(g_mat), Vector::Constant(1, -1.0)), 2.0);
  SolverConfig sc;
  sc.epsilon = 0.1;
  sc.record_iterates = true;
  SolveReport report = solve_fixed_point(Vector::Constant(1, -1.2), problem, sc);

  const double expected[] = {-1.2, 0.0, -2.0 / 3.0, -6.0 / 7.0, -14.0 / 15.0, -20.0 / 21.0};
  bool ok = report.converged && report.iterations == 5;
  for (int k = 0; k <= 5 && ok; ++k)
    ok = std::abs(report.iterates[static_cast<std::size_t>(k)][0] - expected[k]) <= 1e-12;

  std::printf("selftest: iterates");
  for (const auto& x : report.iterates) std::printf(" %.12g", x[0]);
  std::printf("\nselftest: fixed point %.12g (expected %.12g) after %d iterations\n",
              report.x[0], -20.0 / 21.0, report.iterations);
  std::printf("selftest: %s\n", ok ? "PASS" : "FAIL");
  return ok ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"penalty_forge: inequality-constrained optimization via exact penalization"};
  app.require_subcommand(1);

  const int thread_cap = pforge::solver_thread_cap();
  if (thread_cap > 0) Eigen::setNbThreads(thread_cap);

  std::string config_path;
  std::string out_dir;
  std::string param_name;
  std::string values_csv;
  int parallel = 1;

  auto* cmd_run = app.add_subcommand("run", "run one configuration");
  cmd_run->add_option("--config", config_path, "configuration file")->required();
  cmd_run->add_option("--out", out_dir, "output directory override");

  auto* cmd_sweep = app.add_subcommand("sweep", "independent runs over one parameter");
  cmd_sweep->add_option("--config", config_path, "configuration template")->required();
  cmd_sweep->add_option("--param", param_name, "numeric parameter to vary")->required();
  cmd_sweep->add_option("--values", values_csv, "comma-separated values")->required();
  cmd_sweep->add_option("--out", out_dir, "output directory");
  cmd_sweep->add_option("--parallel", parallel, "concurrent runs");

  auto* cmd_selftest = app.add_subcommand("selftest", "run the built-in scalar check");

  auto* cmd_export = app.add_subcommand("export", "export problem data without solving");
  cmd_export->add_option("--config", config_path, "configuration file")->required();
  cmd_export->add_option("--out", out_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_selftest->parsed()) return run_selftest();

    if (cmd_run->parsed()) {
      pforge::RunConfig config = pforge::parse_config_file(config_path);
      if (!out_dir.empty()) config.out_dir = out_dir;
      const pforge::RunReport report = pforge::run(config);
      if (!report.failure.empty()) std::cerr << report.failure << "\n";
      std::cout << "converged=" << (report.solve.converged ? "true" : "false")
                << " iterations=" << report.solve.iterations
                << " grad_inf=" << report.solve.grad_inf
                << " feasibility=" << report.feasibility_max_violation << "\n";
      return report.exit_code;
    }

    if (cmd_sweep->parsed()) {
      pforge::RunConfig config = pforge::parse_config_file(config_path);
      const std::vector<double> values = parse_value_list(values_csv);
      if (out_dir.empty()) out_dir = "sweep_out";
      const auto reports = pforge::sweep(config, param_name, values, parallel, out_dir);
      int worst = 0;
      for (const auto& r : reports) {
        std::cout << param_name << "=" << r.config.out_dir << " exit=" << r.exit_code << "\n";
        worst = std::max(worst, r.exit_code);
      }
      std::cout << "summary: " << out_dir << "/sweep_summary.csv\n";
      return worst;
    }

    if (cmd_export->parsed()) {
      const pforge::RunConfig config = pforge::parse_config_file(config_path);
      const auto files = pforge::export_problem(config, out_dir);
      for (const auto& f : files) std::cout << f << "\n";
      return 0;
    }
  } catch (const pforge::ConfigError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return 4;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 3;
  }
  return 0;
}
