#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tfbsde/analysis.hpp"
#include "tfbsde/errors.hpp"

#include <cmath>

using namespace tfbsde;

namespace {

LevyModel brownian_model() {
    LevyModel model;
    model.gaussian_var = 1.0;
    return model;
}

TeugelsBasis basis_for(const LevyModel& model, int K) {
    return build_basis(moments(model, 2 * K), K);
}

FbsdeProblem oracle_problem(double T, double c) {
    FbsdeProblem problem;
    problem.n_channels = 1;
    problem.f = [](double, double, double, ZView) { return 0.0; };
    problem.sigma = [](double, double, double, std::span<double> sig) { sig[0] = 1.0; };
    problem.g = [c](double, double, double, ZView) { return c; };
    problem.phi = [](double x) { return x; };
    problem.T = T;
    problem.lambda = 0.0;
    problem.lambda0 = 1.0;
    return problem;
}

SolverConfig test_config() {
    SolverConfig cfg;
    cfg.n_paths = 4000;
    cfg.n_steps = 25;
    cfg.n_threads = 2;
    return cfg;
}

} // namespace

TEST_CASE("stability: terminal shift propagates with ratio near one") {
    const LevyModel model = brownian_model();
    const TeugelsBasis basis = basis_for(model, 1);
    PerturbationSpec spec;
    spec.which = "phi";
    spec.direction = "const";
    const StabilityResult result = stability_experiment(oracle_problem(1.0, 0.3), model, basis,
                                                        spec, test_config(), 101);
    CHECK(result.zero_exact);
    CHECK(result.pass);
    CHECK(result.ratio_spread <= 10.0);
    for (const auto& row : result.rows) {
        // A constant terminal shift eps moves Y by eps everywhere: the norm
        // ratio ||dPi||^2 / E|dphi|^2 is close to 1.
        CHECK(row.delta_norm == doctest::Approx(row.eps).epsilon(0.05));
        CHECK(row.c_hat == doctest::Approx(1.0).epsilon(0.1));
    }
}

TEST_CASE("stability: driver shift moves y0 by eps T") {
    const LevyModel model = brownian_model();
    const TeugelsBasis basis = basis_for(model, 1);
    const FbsdeProblem base = oracle_problem(1.0, 0.3);
    const SolverConfig cfg = test_config();
    PerturbationSpec spec;
    spec.which = "g";

    const PathBundle bundle = simulate(model, basis, {1.0, cfg.n_steps}, cfg.n_paths, 7,
                                       cfg.n_threads);
    const PicardResult base_run = picard_solve(base, bundle, cfg);
    for (double eps : {0.1, 0.01}) {
        const FbsdeProblem pert = perturbed_problem(base, spec, eps);
        const PicardResult pert_run = picard_solve(pert, bundle, cfg);
        CHECK(pert_run.sol.y0 - base_run.sol.y0 == doctest::Approx(eps * 1.0).epsilon(1e-6));
    }
}

TEST_CASE("convergence ladder decreases monotonically") {
    const LevyModel model = brownian_model();
    const TeugelsBasis basis = basis_for(model, 1);
    PerturbationSpec spec;
    spec.which = "g";
    const ConvergenceResult result = convergence_experiment(oracle_problem(1.0, 0.3), model,
                                                            basis, spec, test_config(), 11, 6);
    CHECK(result.pass);
    REQUIRE(result.rows.size() == 6);
    // The response is linear in eps: each level is within noise of halving.
    for (std::size_t i = 1; i < result.rows.size(); ++i)
        CHECK(result.rows[i].dist <=
              0.5 * result.rows[i - 1].dist + 2.0 * (result.rows[i].se + result.rows[i - 1].se) +
                  1e-9);
}

TEST_CASE("comparison: identical problems differ by exactly zero") {
    const LevyModel model = brownian_model();
    const TeugelsBasis basis = basis_for(model, 1);
    const FbsdeProblem problem = oracle_problem(1.0, 0.3);
    const ComparisonResult result =
        comparison_experiment(problem, problem, model, basis, test_config(), 13);
    CHECK(result.diff == 0.0);
    CHECK(result.pass);
}

TEST_CASE("comparison: g shift orders y0 and matches eps T") {
    const LevyModel model = brownian_model();
    const TeugelsBasis basis = basis_for(model, 1);
    const FbsdeProblem problem0 = oracle_problem(1.0, 0.3);
    PerturbationSpec shift;
    shift.which = "g";
    const FbsdeProblem problem1 = perturbed_problem(problem0, shift, 0.1);
    const ComparisonResult result =
        comparison_experiment(problem0, problem1, model, basis, test_config(), 13);
    CHECK(result.pass);
    CHECK(std::abs(result.diff - 0.1) <= 3.0 * std::max(result.se, 1e-6));
}

TEST_CASE("comparison: phi shift propagates to time zero") {
    const LevyModel model = brownian_model();
    const TeugelsBasis basis = basis_for(model, 1);
    const FbsdeProblem problem0 = oracle_problem(1.0, 0.3);
    PerturbationSpec shift;
    shift.which = "phi";
    const FbsdeProblem problem1 = perturbed_problem(problem0, shift, 0.05);
    const ComparisonResult result =
        comparison_experiment(problem0, problem1, model, basis, test_config(), 13);
    CHECK(result.pass);
    CHECK(std::abs(result.diff - 0.05) <= 3.0 * std::max(result.se, 1e-3) + 0.01);
}

TEST_CASE("comparison: violated ordering hypothesis throws") {
    const LevyModel model = brownian_model();
    const TeugelsBasis basis = basis_for(model, 1);
    const FbsdeProblem problem0 = oracle_problem(1.0, 0.3);
    PerturbationSpec shift;
    shift.which = "g";
    const FbsdeProblem lower = perturbed_problem(problem0, shift, -0.1);
    CHECK_THROWS_AS(
        comparison_experiment(problem0, lower, model, basis, test_config(), 13),
        HypothesisViolated);
}

TEST_CASE("linear check: constant terminal gives y0 = alpha exactly") {
    const LevyModel model = brownian_model();
    const TeugelsBasis basis = basis_for(model, 1);
    LinearProblemSpec spec;
    spec.alpha = 1.0;
    const LinearCheckResult result = linear_proposition_check(spec, model, basis, test_config(), 3);
    CHECK(result.pass);
    CHECK(result.y0 == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("linear check: pure driver integral gives y0 = beta T") {
    const LevyModel model = brownian_model();
    const TeugelsBasis basis = basis_for(model, 1);
    LinearProblemSpec spec;
    spec.beta = 1.0;
    spec.T = 1.0;
    const LinearCheckResult result = linear_proposition_check(spec, model, basis, test_config(), 3);
    CHECK(result.pass);
    CHECK(result.y0 == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("linear check: mixed nonnegative data keeps y0 nonnegative") {
    const LevyModel model = brownian_model();
    const TeugelsBasis basis = basis_for(model, 1);
    LinearProblemSpec spec;
    spec.a3 = 0.1;
    spec.b3 = 0.1;
    spec.beta = 0.5;
    spec.P = 0.1;
    spec.a2 = 0.5; // sigma has an x loading so X spreads
    const LinearCheckResult result = linear_proposition_check(spec, model, basis, test_config(), 3);
    CHECK(result.pass);
    CHECK(result.y0 >= -3.0 * result.se);
}

TEST_CASE("linear check: structural hypothesis violations throw") {
    const LevyModel model = brownian_model();
    const TeugelsBasis basis = basis_for(model, 1);
    const SolverConfig cfg = test_config();

    LinearProblemSpec neg_alpha;
    neg_alpha.alpha = -1.0;
    CHECK_THROWS_AS(linear_proposition_check(neg_alpha, model, basis, cfg, 3), HypothesisViolated);

    LinearProblemSpec product;
    product.b2 = 0.5;
    product.c1 = 0.5;
    product.b1 = -0.25; // keeps the sum identity, breaks b2 c1 = 0
    CHECK_THROWS_AS(linear_proposition_check(product, model, basis, cfg, 3), HypothesisViolated);

    LinearProblemSpec sum;
    sum.b1 = 0.4; // b1 + a2 c1 + b2 c3 != 0
    CHECK_THROWS_AS(linear_proposition_check(sum, model, basis, cfg, 3), HypothesisViolated);

    LinearProblemSpec too_big;
    too_big.a1 = 2.0;
    too_big.lambda = 1.0;
    CHECK_THROWS_AS(linear_proposition_check(too_big, model, basis, cfg, 3), HypothesisViolated);
}
