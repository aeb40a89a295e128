#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tfbsde/errors.hpp"
#include "tfbsde/teugels_basis.hpp"

#include <cmath>
#include <cstdio>

using namespace tfbsde;

namespace {

LevyModel brownian_model() {
    LevyModel model;
    model.gaussian_var = 1.0;
    return model;
}

LevyModel poisson_model(double intensity) {
    LevyModel model;
    model.gaussian_var = 0.0;
    model.atoms = {{intensity, 1.0}};
    return model;
}

LevyModel two_atom_gaussian_model() {
    LevyModel model;
    model.gaussian_var = 1.0;
    model.atoms = {{1.0, 1.0}, {1.0, -1.0}};
    return model;
}

TeugelsBasis basis_for(const LevyModel& model, int K) {
    return build_basis(moments(model, 2 * K), K);
}

} // namespace

TEST_CASE("Brownian measure collapses to the single Brownian channel") {
    const TeugelsBasis basis = basis_for(brownian_model(), 5);
    CHECK(basis.K_eff == 1);
    REQUIRE(basis.q_polys.size() == 1);
    CHECK(basis.q_polys[0][0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(basis.a[0][0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(basis.q_at_zero[0] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("Poisson measure gives the normalized compensated Poisson channel") {
    const TeugelsBasis unit = basis_for(poisson_model(1.0), 3);
    CHECK(unit.K_eff == 1);
    CHECK(unit.a[0][0] == doctest::Approx(1.0).epsilon(1e-14));

    const TeugelsBasis scaled = basis_for(poisson_model(4.0), 3);
    CHECK(scaled.K_eff == 1);
    CHECK(scaled.q_polys[0][0] == doctest::Approx(0.5).epsilon(1e-14)); // 1/sqrt(intensity)
}

TEST_CASE("two-atom plus Gaussian basis matches the reference coefficients") {
    const TeugelsBasis basis = basis_for(two_atom_gaussian_model(), 3);
    REQUIRE(basis.K_eff == 3);
    CHECK(basis.q_polys[0][0] == doctest::Approx(0.5773502691896257).epsilon(1e-14));
    CHECK(basis.q_polys[1][0] == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(basis.q_polys[1][1] == doctest::Approx(0.7071067811865476).epsilon(1e-14));
    CHECK(basis.q_polys[2][0] == doctest::Approx(-0.816496580927726).epsilon(1e-13));
    CHECK(basis.q_polys[2][1] == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(basis.q_polys[2][2] == doctest::Approx(1.224744871391589).epsilon(1e-13));
}

TEST_CASE("rank termination caps K_eff at the support size") {
    // The orthogonalization measure has three support points, so requesting
    // five polynomials must terminate at three.
    const TeugelsBasis basis = basis_for(two_atom_gaussian_model(), 5);
    CHECK(basis.K_requested == 5);
    CHECK(basis.K_eff == 3);
}

TEST_CASE("orthonormality and the structural identity hold on the model set") {
    const LevyModel models[] = {brownian_model(), poisson_model(1.0), two_atom_gaussian_model()};
    for (const auto& model : models) {
        const int K = 5;
        const MomentTable table = moments(model, 2 * K);
        const TeugelsBasis basis = build_basis(table, K);
        CHECK(orthonormality_residual(basis, table) <= 1e-8);
        CHECK(check_lemma_identity(basis, model) <= 1e-8);
    }
}

TEST_CASE("density-driven basis stays orthonormal") {
    LevyModel model;
    model.gaussian_var = 0.5;
    model = with_exp_tail_density(std::move(model), 1.0, 0.1, 10.0);
    const int K = 4;
    const MomentTable table = moments(model, 2 * K);
    const TeugelsBasis basis = build_basis(table, K);
    CHECK(basis.K_eff == 4);
    CHECK(orthonormality_residual(basis, table) <= 1e-8);
}

TEST_CASE("degenerate and invalid inputs are rejected") {
    MomentTable empty;
    empty.m.assign(7, 0.0);
    empty.mu.assign(5, 0.0);
    CHECK_THROWS_AS(build_basis(empty, 3), DegenerateMeasure);

    MomentTable indefinite;
    indefinite.m.assign(7, 0.0);
    indefinite.mu = {1.0, 0.0, -5.0, 0.0, 1.0}; // not a moment sequence
    CHECK_THROWS_AS(build_basis(indefinite, 3), NumericalBreakdown);

    const MomentTable ok = moments(brownian_model(), 4);
    CHECK_THROWS_AS(build_basis(ok, 0), std::invalid_argument);
    CHECK_THROWS_AS(build_basis(ok, 11), std::invalid_argument);
}

TEST_CASE("basis files round-trip exactly") {
    const TeugelsBasis basis = basis_for(two_atom_gaussian_model(), 3);
    const std::string path = "basis_roundtrip.txt";
    write_basis(path, basis);
    const TeugelsBasis back = read_basis(path);
    std::remove(path.c_str());
    REQUIRE(back.K_eff == basis.K_eff);
    for (int i = 0; i < basis.K_eff; ++i) {
        REQUIRE(back.q_polys[i].size() == basis.q_polys[i].size());
        for (std::size_t j = 0; j < basis.q_polys[i].size(); ++j)
            CHECK(back.q_polys[i][j] == basis.q_polys[i][j]);
        for (std::size_t j = 0; j < basis.a[i].size(); ++j)
            CHECK(back.a[i][j] == basis.a[i][j]);
    }
}

TEST_CASE("polynomial evaluation uses ascending coefficients") {
    const double c[] = {1.0, -2.0, 3.0};
    CHECK(evaluate_poly(std::span<const double>(c, 3), 2.0) ==
          doctest::Approx(1.0 - 4.0 + 12.0));
}
