#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tfbsde/errors.hpp"
#include "tfbsde/fbsde_problem.hpp"
#include "tfbsde/rng.hpp"

#include <cmath>
#include <limits>

using namespace tfbsde;

namespace {

FbsdeProblem constant_problem() {
    FbsdeProblem problem;
    problem.n_channels = 2;
    problem.f = [](double, double, double, ZView) { return 1.0; };
    problem.sigma = [](double, double, double, std::span<double> sig) {
        sig[0] = 3.0;
        sig[1] = 0.0;
    };
    problem.g = [](double, double, double, ZView) { return 2.0; };
    problem.phi = [](double) { return 4.0; };
    problem.T = 1.0;
    problem.x0_mean = 5.0;
    problem.x0_var = 0.0;
    problem.lambda = 0.0;
    problem.lambda0 = 0.0;
    return problem;
}

FbsdeProblem linear_problem() {
    FbsdeProblem problem;
    problem.n_channels = 1;
    problem.f = [](double, double x, double y, ZView z) { return 0.3 * x - 0.2 * y + 0.1 * z[0]; };
    problem.sigma = [](double, double x, double, std::span<double> sig) { sig[0] = 0.25 * x; };
    problem.g = [](double, double x, double y, ZView) { return 0.1 * x + 0.3 * y; };
    problem.phi = [](double x) { return 0.8 * x; };
    problem.T = 1.0;
    problem.lambda = 0.6;
    problem.lambda0 = 0.8;
    return problem;
}

} // namespace

TEST_CASE("data norm matches the closed-form constant case") {
    // V0^2 = E|X0|^2 + phi(0)^2 + int (f^2 + |sigma|^2 + g^2) dt
    //      = 25 + 16 + (1 + 9 + 4) = 55.
    const double v0 = check_V0(constant_problem());
    CHECK(v0 == doctest::Approx(std::sqrt(55.0)).epsilon(1e-12));
}

TEST_CASE("data norm rejects non-finite coefficients") {
    FbsdeProblem bad = constant_problem();
    bad.g = [](double, double, double, ZView) { return std::numeric_limits<double>::infinity(); };
    CHECK_THROWS_AS(check_V0(bad), NonFiniteData);
}

TEST_CASE("derivative structure check passes on decoupled coefficients") {
    // sigma free of y and f free of (y, z): both residuals vanish.
    FbsdeProblem problem;
    problem.n_channels = 2;
    problem.f = [](double, double x, double, ZView) { return 0.5 * x; };
    problem.sigma = [](double, double x, double, std::span<double> sig) {
        sig[0] = 1.0 + 0.3 * x;
        sig[1] = 0.2;
    };
    problem.g = [](double, double x, double y, ZView z) { return x + y + z[0] + z[1]; };
    problem.phi = [](double x) { return x; };
    problem.T = 1.0;
    const H2Report report = check_H2(problem);
    CHECK(report.pass);
    CHECK(report.max_product_residual <= report.tol);
    CHECK(report.max_sum_residual <= report.tol);
}

TEST_CASE("derivative structure check flags a coupled violation") {
    FbsdeProblem problem;
    problem.n_channels = 1;
    problem.f = [](double, double, double, ZView z) { return z[0]; };
    problem.sigma = [](double, double, double y, std::span<double> sig) { sig[0] = 1.0 + y; };
    problem.g = [](double, double, double, ZView) { return 0.0; };
    problem.phi = [](double x) { return x; };
    problem.T = 1.0;
    const H2Report report = check_H2(problem);
    CHECK_FALSE(report.pass);
    CHECK(report.max_product_residual > report.tol); // sigma_y f_z = 1
}

TEST_CASE("Lipschitz audit accepts honest constants and flags understated ones") {
    FbsdeProblem honest = linear_problem();
    CHECK(lipschitz_audit(honest) <= 1.0 + 1e-9);

    FbsdeProblem understated = linear_problem();
    understated.lambda = 0.05; // true constant is 0.6
    CHECK(lipschitz_audit(understated) > 1.0);
}

TEST_CASE("M2 distance basics") {
    const TimeGrid grid{1.0, 10};
    SolutionTriple a = zero_triple(grid, 8, 2);
    SolutionTriple b = a;
    CHECK(m2_distance(a, b) == 0.0);

    for (double& y : b.Y) y += 1.0;
    CHECK(m2_distance(a, b) == doctest::Approx(1.0).epsilon(1e-14));

    SolutionTriple c = zero_triple({1.0, 20}, 8, 2);
    CHECK_THROWS_AS(m2_distance(a, c), GridMismatch);
    SolutionTriple d = zero_triple(grid, 9, 2);
    CHECK_THROWS_AS(m2_distance(a, d), GridMismatch);
}

TEST_CASE("Z contributes through its time integral") {
    const TimeGrid grid{2.0, 4};
    SolutionTriple a = zero_triple(grid, 3, 1);
    SolutionTriple b = a;
    for (double& z : b.Z) z = 1.5;
    // int |dZ|^2 dt = 1.5^2 * 2 = 4.5 per path.
    CHECK(m2_distance(a, b) == doctest::Approx(std::sqrt(4.5)).epsilon(1e-14));
}

TEST_CASE("solution norm of a Brownian forward component matches the grid maximum oracle") {
    // E[max_k B_{t_k}^2] over the 100-step grid on [0, 1] is 1.6933 +- 0.0016
    // (independent Monte Carlo, 4e5 paths).
    const TimeGrid grid{1.0, 100};
    const int n_paths = 40000;
    SolutionTriple triple = zero_triple(grid, n_paths, 1);
    for (int p = 0; p < n_paths; ++p) {
        double b = 0.0;
        for (int k = 0; k < 100; ++k) {
            StreamRng rng(404, static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(k));
            b += 0.1 * rng.next_normal();
            triple.X[static_cast<std::size_t>(p) * 101 + static_cast<std::size_t>(k) + 1] = b;
        }
    }
    const double norm = solution_norm(triple);
    CHECK(norm * norm == doctest::Approx(1.6933).epsilon(0.02));
}

TEST_CASE("zero triple has zero norm exactly") {
    CHECK(solution_norm(zero_triple({1.0, 50}, 100, 3)) == 0.0);
}
