#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tfbsde/errors.hpp"
#include "tfbsde/levy_model.hpp"

#include <cmath>

using namespace tfbsde;

TEST_CASE("adaptive quadrature reproduces reference integrals") {
    const double v1 = adaptive_quadrature([](double z) { return std::exp(z + z * z); }, 1.0, 2.0);
    CHECK(v1 == doctest::Approx(86.834040471312075).epsilon(1e-9));
    const double v2 = adaptive_quadrature([](double z) { return std::exp(z * z); }, 1.0, 2.0);
    CHECK(v2 == doctest::Approx(14.989976019600049).epsilon(1e-9));
    CHECK(adaptive_quadrature([](double) { return 1.0; }, 2.0, 2.0) == 0.0);
}

TEST_CASE("adaptive quadrature rejects non-finite integrands") {
    CHECK_THROWS_AS(adaptive_quadrature([](double z) { return 1.0 / (z - 5.0); }, 1.0, 9.0),
                    QuadratureFailure);
}

TEST_CASE("atom moments are exact and include the drift in m_1") {
    LevyModel model;
    model.drift = 0.3;
    model.gaussian_var = 0.7;
    model.atoms = {{2.0, 0.5}};
    const MomentTable table = moments(model, 4);
    CHECK(table.m[1] == doctest::Approx(0.3 + 2.0 * 0.5).epsilon(1e-15));
    CHECK(table.m[2] == doctest::Approx(2.0 * 0.25).epsilon(1e-15));
    CHECK(table.m[3] == doctest::Approx(2.0 * 0.125).epsilon(1e-15));
    CHECK(table.m[4] == doctest::Approx(2.0 * 0.0625).epsilon(1e-15));
    CHECK(table.mu[0] == doctest::Approx(0.5 + 0.7).epsilon(1e-15));
    CHECK(table.mu[1] == table.m[3]);
    CHECK(table.mu[2] == table.m[4]);
}

TEST_CASE("exponential-tail density moments match reference values") {
    LevyModel model;
    model.gaussian_var = 0.0;
    model = with_exp_tail_density(std::move(model), 1.0, 0.1, 10.0);
    const MomentTable table = moments(model, 8);
    CHECK(table.m[2] == doctest::Approx(3.988303804856895).epsilon(1e-8));
    CHECK(table.m[4] == doctest::Approx(46.595867291761059).epsilon(1e-8));
    CHECK(table.m[6] == doctest::Approx(1252.5963539030452).epsilon(1e-8));
    CHECK(table.m[8] == doctest::Approx(53801.421105541824).epsilon(1e-8));
    CHECK(std::abs(table.m[1]) < 1e-8); // two-sided symmetric band
    CHECK(std::abs(table.m[3]) < 1e-8);
    CHECK(std::abs(table.m[5]) < 1e-7);
}

TEST_CASE("validation accepts the standard models") {
    LevyModel brownian;
    CHECK_NOTHROW(require_valid(brownian));

    LevyModel poisson;
    poisson.gaussian_var = 0.0;
    poisson.atoms = {{1.0, 1.0}};
    CHECK_NOTHROW(require_valid(poisson));

    LevyModel tail;
    tail = with_exp_tail_density(std::move(tail), 1.0, 0.1, 10.0);
    const ValidationReport report = validate_model(tail);
    CHECK(report.pass());
    CHECK(report.square_integral > 0.0);
}

TEST_CASE("validation rejects malformed atoms") {
    LevyModel bad;
    bad.atoms = {{-1.0, 1.0}};
    CHECK_FALSE(validate_model(bad).atoms_ok);
    CHECK_THROWS_AS(require_valid(bad), std::invalid_argument);

    LevyModel zero_loc;
    zero_loc.atoms = {{1.0, 0.0}};
    CHECK_FALSE(validate_model(zero_loc).atoms_ok);

    LevyModel dup;
    dup.atoms = {{1.0, 1.0}, {2.0, 1.0}};
    CHECK_FALSE(validate_model(dup).atoms_ok);
}

TEST_CASE("integrability conditions detected via divergence guard") {
    LevyModel heavy;
    heavy.atoms = {{1e101, 1.0}};
    CHECK_THROWS_AS(require_valid(heavy), NonIntegrableMeasure);

    LevyModel hot_tail;
    hot_tail = with_uniform_band_density(std::move(hot_tail), 1.0, 1.0, 300.0);
    hot_tail.exp_moment_alpha = 1.0;
    CHECK_THROWS_AS(require_valid(hot_tail), ExponentialTailViolation);
}

TEST_CASE("density support through zero is rejected") {
    LevyModel bad;
    bad = with_uniform_band_density(std::move(bad), 1.0, -1.0, 1.0);
    CHECK_FALSE(validate_model(bad).atoms_ok);
}
