#include "pforge/problems.hpp"

#include "support/oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace pforge;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("distance to the boundary of the unit square") {
  CHECK(distance_to_boundary(0.5, 0.5) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(distance_to_boundary(0.25, 0.5) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(distance_to_boundary(0.0, 0.3) == 0.0);
  CHECK(distance_to_boundary(0.7, 1.0) == 0.0);
  CHECK_THROWS_AS(distance_to_boundary(-0.1, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(distance_to_boundary(0.5, 1.2), std::invalid_argument);
}

TEST_CASE("obstacle assembly") {
  SUBCASE("interior stencil of the bilinear stiffness matrix") {
    const ObstacleInstance inst = assemble_obstacle(GridSpec(4), 10.0);
    // 3x3 interior nodes; the center node sees four full elements.
    const Index center = 4;  // (i, j) = (2, 2)
    CHECK(inst.stiffness.matrix().coeff(center, center) ==
          doctest::Approx(8.0 / 3.0).epsilon(1e-14));
    // Edge and corner neighbors both carry -1/3.
    CHECK(inst.stiffness.matrix().coeff(center, 3) == doctest::Approx(-1.0 / 3.0));
    CHECK(inst.stiffness.matrix().coeff(center, 0) == doctest::Approx(-1.0 / 3.0));
    CHECK(inst.stiffness.symmetry_error() == 0.0);
  }
  SUBCASE("load is C h^2 at interior nodes") {
    const double c = 10.0;
    const ObstacleInstance inst = assemble_obstacle(GridSpec(8), c);
    const double h = 1.0 / 8.0;
    CHECK(inst.load.minCoeff() == doctest::Approx(c * h * h).epsilon(1e-14));
    CHECK(inst.load.maxCoeff() == doctest::Approx(c * h * h).epsilon(1e-14));
  }
  SUBCASE("stiffness annihilates the linear function away from the boundary") {
    const GridSpec grid(8);
    const ObstacleInstance inst = assemble_obstacle(grid, 10.0);
    const Index m = grid.interior_per_side();
    Vector linear(m * m);
    for (Index j = 1; j <= m; ++j)
      for (Index i = 1; i <= m; ++i) linear[(j - 1) * m + (i - 1)] = i * grid.h();
    const Vector applied = inst.stiffness.apply(linear);
    for (Index j = 2; j < m; ++j)  // rows with a full interior stencil
      for (Index i = 2; i < m; ++i)
        CHECK(std::abs(applied[(j - 1) * m + (i - 1)]) <= 1e-13);
  }
  SUBCASE("obstacle values and the penalty problem") {
    const GridSpec grid(4);
    const ObstacleInstance inst = assemble_obstacle(grid, 10.0);
    CHECK(inst.obstacle.minCoeff() > 0.0);
    CHECK(inst.obstacle[4] == doctest::Approx(0.5));  // center node
    const PenaltyProblem p = inst.make_problem(0.01);
    CHECK(p.constraints.rows() == 9);
    const PenaltyProblem bi = assemble_obstacle(grid, 10.0, true).make_problem(0.01);
    CHECK(bi.constraints.rows() == 18);
  }
}

TEST_CASE("finite difference Laplacian") {
  const GridSpec grid(12);
  const SparseSymMatrix lap = assemble_fd_laplacian(grid);
  const double h = grid.h();
  const double w = 1.0 / (h * h);
  const Index m = grid.interior_per_side();

  SUBCASE("five-point stencil rows") {
    const Index center = (m / 2) * m + m / 2;
    CHECK(lap.matrix().coeff(center, center) == doctest::Approx(4.0 * w));
    CHECK(lap.matrix().coeff(center, center + 1) == doctest::Approx(-w));
    CHECK(lap.matrix().coeff(center, center + m) == doctest::Approx(-w));
  }
  SUBCASE("discrete sine mode is an exact eigenvector") {
    Vector mode(m * m);
    for (Index j = 1; j <= m; ++j)
      for (Index i = 1; i <= m; ++i)
        mode[(j - 1) * m + (i - 1)] = std::sin(M_PI * i * h) * std::sin(M_PI * j * h);
    const double lambda = 2.0 * (4.0 / (h * h)) * std::sin(M_PI * h / 2.0) *
                          std::sin(M_PI * h / 2.0);
    CHECK(inf_norm(lap.apply(mode) - lambda * mode) <= 1e-10 * lambda);
    // The discrete eigenvalue approaches the continuous one at rate h^2.
    CHECK(lambda == doctest::Approx(2.0 * M_PI * M_PI).epsilon(0.01));
  }
  SUBCASE("positive definite") {
    CHECK_NOTHROW(SpdFactorization{lap});
  }
}

TEST_CASE("noise generation") {
  Vector y(5);
  y << 1.0, 2.0, 3.0, 2.0, 1.0;

  NoiseSpec none;
  none.level = 0.0;
  CHECK(inf_norm(add_noise(y, none) - y) == 0.0);

  NoiseSpec spec;
  spec.level = 0.1;
  spec.seed = 42;
  const Vector once = add_noise(y, spec);
  const Vector twice = add_noise(y, spec);
  CHECK(inf_norm(once - twice) == 0.0);  // bit-identical under a fixed seed
  CHECK(inf_norm(once - y) <= 0.1 + 1e-15);
  CHECK(inf_norm(once - y) > 0.0);

  NoiseSpec relative;
  relative.level = 0.25;
  relative.mode = NoiseSpec::Mode::relative_max;
  relative.seed = 7;
  const Vector constant = Vector::Constant(200, 4.0);
  const Vector noisy = add_noise(constant, relative);
  CHECK(noisy.minCoeff() >= 4.0 - 1.0 - 1e-12);  // c - delta c
  CHECK(noisy.maxCoeff() <= 4.0 + 1.0 + 1e-12);
  CHECK((noisy - constant).cwiseAbs().maxCoeff() > 0.5);  // noise spans the band
}

TEST_CASE("inverse source instance") {
  const GridSpec grid(10);
  NoiseSpec none;

  SUBCASE("zero source gives zero data and a zero solution") {
    InverseSourceInstance inst =
        assemble_inverse_source(grid, 1e-4, none, Vector::Zero(grid.interior_count()));
    CHECK(inf_norm(inst.y_delta) == 0.0);
    const PenaltyProblem p = inst.make_problem(1.0);
    SolverConfig config;
    config.epsilon = 1e-4;
    config.step_solver = inst.make_step_solver(1.0, 1.0);
    const SolveReport report = solve_fixed_point(inst.initial_point(), p, config);
    REQUIRE(report.converged);
    CHECK(inf_norm(report.x) <= 1e-8);
  }
  SUBCASE("adjoint gradient matches finite differences") {
    InverseSourceInstance inst = assemble_inverse_source(grid, 1e-3, none);
    const Objective obj = inst.make_objective();
    std::mt19937_64 rng(5);
    Vector u(grid.interior_count());
    for (Index i = 0; i < u.size(); ++i) u[i] = 0.2 + 0.6 * oracle::uniform01(rng);
    const Vector grad = obj.gradient(u);
    const Vector fd = oracle::fd_gradient([&](const Vector& v) { return obj.value(v); }, u);
    CHECK(inf_norm(grad - fd) <= 1e-6 * tolerance_scale(inf_norm(grad)));
  }
  SUBCASE("recovery error decreases with the regularization weight at zero noise") {
    double previous = 1e100;
    for (double eta : {1e-2, 1e-4, 1e-6}) {
      InverseSourceInstance inst = assemble_inverse_source(grid, eta, none);
      // Unconstrained normal equation oracle: (I + eta K^2) u = K y_delta.
      SparseMatrix normal = inst.laplacian_squared.matrix() * eta;
      for (Index i = 0; i < normal.rows(); ++i) normal.coeffRef(i, i) += 1.0;
      const auto [u, rep] =
          spd_solve(SparseSymMatrix::from_eigen(std::move(normal)),
                    inst.laplacian.apply(inst.y_delta));
      REQUIRE(rep.success);
      const double err = (u - inst.u_star).norm();
      CHECK(err < previous);
      previous = err;
    }
  }
  SUBCASE("data misfit at the solution stays below its value at zero") {
    NoiseSpec noise;
    noise.level = 1e-3;
    noise.seed = 4;
    InverseSourceInstance inst = assemble_inverse_source(grid, 1e-6, noise);
    const PenaltyProblem p = inst.make_problem(1.0);
    SolverConfig config;
    config.epsilon = grid.h() * grid.h();
    config.max_iter = 60;
    config.step_solver = inst.make_step_solver(1.0, 1.0);
    const SolveReport report = solve_fixed_point(inst.initial_point(), p, config);
    REQUIRE(report.converged);
    const double misfit =
        (inst.laplacian_solver->solve(report.x) - inst.y_delta).norm();
    const double misfit_at_zero = inst.y_delta.norm();
    CHECK(misfit <= misfit_at_zero);
  }
  SUBCASE("step solver realizes the recommended preconditioner") {
    InverseSourceInstance inst = assemble_inverse_source(grid, 1e-3, none);
    const PenaltyProblem p = inst.make_problem(1.0);
    const StepSolver step = inst.make_step_solver(1.0, 1.0);
    std::mt19937_64 rng(9);
    Vector u(grid.interior_count());
    for (Index i = 0; i < u.size(); ++i) u[i] = 1.2 * oracle::uniform_pm1(rng);

    const ChiF cf = chi_f_weights(u, p, 1e-3);
    const Vector rhs = -j_eps_gradient(u, p, 1e-3);
    const Vector d = step(u, cf.chi, rhs);

    // Verify (P + beta G^t chi G) d = rhs with P = K^{-2} + eta I applied.
    const Vector combined = cf.chi.entries.head(u.size()) + cf.chi.entries.tail(u.size());
    const Vector p_apply = inst.laplacian_solver->solve(inst.laplacian_solver->solve(d)) +
                           inst.eta * d;
    const Vector residual = p_apply + combined.cwiseProduct(d) - rhs;
    CHECK(inf_norm(residual) <= 1e-9 * tolerance_scale(inf_norm(rhs)));
  }
}

TEST_CASE("inverse medium instance") {
  const GridSpec grid(10);
  NoiseSpec none;

  SUBCASE("zero potential reduces to the Laplace solve") {
    InverseMediumInstance inst =
        assemble_inverse_medium(grid, 1e-3, 1.0, none, Vector::Zero(grid.interior_count()));
    const SpdFactorization lap(inst.laplacian);
    CHECK(inf_norm(inst.y_clean - lap.solve(inst.source)) <= 1e-12);
  }
  SUBCASE("adjoint gradient matches finite differences") {
    InverseMediumInstance inst = assemble_inverse_medium(grid, 1e-3, 1.0, none);
    const Objective obj = inst.make_objective();
    std::mt19937_64 rng(13);
    Vector u(grid.interior_count());
    for (Index i = 0; i < u.size(); ++i) u[i] = 0.2 + 0.6 * oracle::uniform01(rng);
    const Vector grad = obj.gradient(u);
    const Vector fd = oracle::fd_gradient([&](const Vector& v) { return obj.value(v); }, u);
    CHECK(inf_norm(grad - fd) <= 1e-4 * tolerance_scale(inf_norm(grad)));
  }
  SUBCASE("diagonal step solver matches the assembled system") {
    InverseMediumInstance inst = assemble_inverse_medium(grid, 1e-3, 1.0, none);
    const PenaltyProblem p = inst.make_problem(1.0);
    const StepSolver step = inst.make_step_solver(1.0, 1.0);
    std::mt19937_64 rng(17);
    Vector u(grid.interior_count());
    for (Index i = 0; i < u.size(); ++i) u[i] = 1.2 * oracle::uniform_pm1(rng);
    const ChiF cf = chi_f_weights(u, p, 1e-3);
    const Vector rhs = -j_eps_gradient(u, p, 1e-3);
    const Vector d = step(u, cf.chi, rhs);
    const Vector combined = cf.chi.entries.head(u.size()) + cf.chi.entries.tail(u.size());
    for (Index i = 0; i < u.size(); ++i)
      CHECK(d[i] == doctest::Approx(rhs[i] / (0.01 + inst.eta + combined[i])).epsilon(1e-13));
  }
  SUBCASE("strongly negative potential probes are rejected") {
    InverseMediumInstance inst = assemble_inverse_medium(grid, 1e-3, 1.0, none);
    CHECK_THROWS_AS(inst.forward(Vector::Constant(grid.interior_count(), -1e4)), SolveError);
    CHECK_THROWS_AS(assemble_inverse_medium(grid, 1e-3, 1.0, none,
                                            Vector::Constant(grid.interior_count(), -0.5)),
                    std::invalid_argument);
  }
}

TEST_CASE("multi-parameter denoising iteration") {
  SUBCASE("zero weights make the data the minimizer") {
    Vector f(9);
    for (Index i = 0; i < 9; ++i) f[i] = 0.1 * i;
    const DenoiseInstance inst = make_denoise(3, 3, f, 0.0, 0.0);
    const Vector next = denoise_step_multiparam(f, inst, 1.0, 1e-3);
    CHECK(inf_norm(next - f) <= 1e-14);
  }
  SUBCASE("constant images are fixed points of the regularizers") {
    const Vector f = Vector::Constant(16, 0.6);
    const DenoiseInstance inst = make_denoise(4, 4, f, 0.5, 0.2);
    const Vector next = denoise_step_multiparam(f, inst, 1.0, 1e-3);
    CHECK(inf_norm(next - f) <= 1e-12);
  }
  SUBCASE("objective decreases monotonically on a noisy image") {
    NoiseSpec noise;
    noise.level = 0.1;
    noise.seed = 3;
    Vector truth = Vector::Constant(64, 0.3);
    for (Index i = 24; i < 40; ++i) truth[i] = 0.8;
    const Vector noisy = add_noise(truth, noise);
    const DenoiseInstance inst = make_denoise(8, 8, noisy, 0.05, 0.01);
    const SolveReport report = solve_denoise(noisy, inst, 1.0, 1e-4, 1e-10, 60);
    CHECK(report.nonmonotone_steps == 0);
    double previous = 1e100;
    for (const TraceRecord& rec : report.trace.records()) {
      CHECK(rec.j_eps <= previous + 1e-12 * tolerance_scale(previous));
      previous = rec.j_eps;
    }
  }
  SUBCASE("single jump magnitude shrinks monotonically") {
    Vector f = Vector::Zero(16);
    for (Index i = 8; i < 16; ++i) f[i] = 1.0;
    const DenoiseInstance inst = make_denoise_1d(f, 0.15);
    Vector u = f;
    double previous_jump = 1.0;
    for (int k = 0; k < 40; ++k) {
      u = denoise_step_multiparam(u, inst, 1.0, 1e-8);
      const double jump = std::abs(u[8] - u[7]);
      CHECK(jump <= previous_jump + 1e-12);
      previous_jump = jump;
    }
  }
  SUBCASE("1-D iteration matches the taut-string oracle") {
    NoiseSpec noise;
    noise.level = 0.15;
    noise.seed = 21;
    Vector truth(16);
    for (Index i = 0; i < 16; ++i) truth[i] = i < 8 ? 0.2 : 0.9;
    const Vector f = add_noise(truth, noise);
    const double lambda = 0.2;

    // The smoothed minimizer deviates from the exact one by at most about
    // m * eps on flat segments, and the gradient evaluation floor sits near
    // eta / eps times machine precision; eps = 1e-8 leaves margin on both.
    const DenoiseInstance inst = make_denoise_1d(f, lambda);
    const SolveReport report = solve_denoise(f, inst, 1.0, 1e-8, 1e-8, 5000);
    REQUIRE(report.converged);

    const Vector reference = oracle::tv1d_taut_string(f, lambda);
    CHECK(inf_norm(report.x - reference) <= 1e-6);
  }
}

TEST_CASE("isotropic TV weights") {
  const Index n = 8;
  NoiseSpec noise;
  noise.level = 0.2;
  noise.seed = 31;
  const Vector u0 = add_noise(Vector::Constant(n * n, 0.5), noise);
  DenoiseInstance inst = make_denoise(n, n, u0, 0.1, 0.0);

  SUBCASE("constant field saturates every weight at 1/eps") {
    const DiagonalWeights w =
        tv_weights(Vector::Constant(n * n, 0.4), inst.diff_x, inst.diff_y, 1e-2);
    CHECK(w.entries.minCoeff() == doctest::Approx(100.0));
    CHECK(w.entries.maxCoeff() == doctest::Approx(100.0));
  }
  SUBCASE("unit gradient magnitude gives unit weight") {
    Vector ramp(n * n);
    for (Index r = 0; r < n; ++r)
      for (Index c = 0; c < n; ++c) ramp[r * n + c] = static_cast<double>(c);
    const DiagonalWeights w = tv_weights(ramp, inst.diff_x, inst.diff_y, 1e-3);
    CHECK(w.entries[0] == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("gradient of the smoothed TV term matches finite differences") {
    const double eps = 1e-2;
    const Vector grad = tv_gradient(u0, inst, eps);
    const Vector fd =
        oracle::fd_gradient([&](const Vector& v) { return tv_value(v, inst, eps); }, u0, 1e-7);
    CHECK(inf_norm(grad - fd) <= 1e-5 * tolerance_scale(inf_norm(grad)));
  }
}

TEST_CASE("field import and export") {
  SUBCASE("plain-text grid round trip") {
    Vector field(6);
    field << 1.0, -2.5, 3.25, 0.0, 1e-17, 7.0;
    const std::string path = temp_path("pforge_grid.txt");
    write_grid_text(path, field, 2, 3);
    Index rows = 0, cols = 0;
    const Vector back = read_grid_text(path, rows, cols);
    CHECK(rows == 2);
    CHECK(cols == 3);
    CHECK(inf_norm(back - field) == 0.0);
    std::filesystem::remove(path);
  }
  SUBCASE("gray map spans the full range") {
    Vector image(4);
    image << 0.0, 1.0, 0.25, 0.75;
    const std::string path = temp_path("pforge_img.pgm");
    write_pgm(path, image, 2, 2);
    std::ifstream in(path);
    std::string magic;
    in >> magic;
    CHECK(magic == "P2");
    Index w = 0, h = 0;
    int maxval = 0;
    in >> w >> h >> maxval;
    CHECK(w == 2);
    CHECK(h == 2);
    CHECK(maxval == 255);
    int g0 = -1, g1 = -1;
    in >> g0 >> g1;
    CHECK(g0 == 0);
    CHECK(g1 == 255);
    std::filesystem::remove(path);
  }
}

TEST_CASE("obstacle solution is feasible and symmetric at a small scale") {
  const GridSpec grid(16);
  const ObstacleInstance inst = assemble_obstacle(grid, 10.0);
  // The contact multiplier scales like C h^2, so exactness at this coarse
  // mesh needs a larger penalty weight than the h = 0.02 runs use.
  const PenaltyProblem p = inst.make_problem(0.1);
  SolverConfig config;
  config.epsilon = grid.h() * grid.h();
  config.tol = 1e-10;
  config.max_iter = 60;
  const SolveReport report = solve_fixed_point(inst.initial_point(), p, config);
  REQUIRE(report.converged);

  // Feasibility up to the smoothing width.
  CHECK((report.x - inst.obstacle).maxCoeff() <= config.epsilon + 1e-12);

  // Eight-fold dihedral symmetry of the square.
  const Index m = grid.interior_per_side();
  auto at = [&](Index i, Index j) { return report.x[(j - 1) * m + (i - 1)]; };
  for (Index j = 1; j <= m; ++j) {
    for (Index i = 1; i <= m; ++i) {
      CHECK(at(i, j) == doctest::Approx(at(m + 1 - i, j)).epsilon(1e-10));
      CHECK(at(i, j) == doctest::Approx(at(j, i)).epsilon(1e-10));
    }
  }

  // The membrane rises toward the obstacle somewhere.
  CHECK(report.x.maxCoeff() > 0.0);
}
