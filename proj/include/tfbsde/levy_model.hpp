#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace tfbsde {

struct Atom {
    double mass;     // alpha_j > 0
    double location; // beta_j != 0
};

/// Scalar Levy triplet with a finite set of jump atoms and an optional jump
/// density on intervals bounded away from zero. gaussian_var is the variance
/// rate of the Brownian part and doubles as the weight of the point mass at 0
/// in the orthogonalization measure mu(dx) = x^2 nu(dx) + sigma^2 delta_0(dx).
struct LevyModel {
    double drift = 0.0;
    double gaussian_var = 1.0;
    std::vector<Atom> atoms;
    std::function<double(double)> density;                 // nonneg, on `support`
    std::vector<std::pair<double, double>> support;        // disjoint intervals
    double exp_moment_alpha = 1.0;

    bool has_density() const { return static_cast<bool>(density); }
};

struct ValidationReport {
    bool atoms_ok = true;
    bool square_integrable = true;  // condition (i)
    bool exp_tail_ok = true;        // condition (ii) at the declared alpha
    double square_integral = 0.0;   // int (1 ^ z^2) nu(dz)
    double exp_tail_integral = 0.0; // int_{|z|>=eps} e^{alpha|z|} nu(dz)
    std::string detail;

    bool pass() const { return atoms_ok && square_integrable && exp_tail_ok; }
};

/// Power moments of nu and of the orthogonalization measure mu.
/// m[i] = int z^i nu(dz) for i >= 2, m[1] = E[L_1]; mu[k] = moment k of mu.
struct MomentTable {
    std::vector<double> m;  // index 1..order (slot 0 unused)
    std::vector<double> mu; // index 0..order-2
    double gaussian_var = 0.0;

    int order() const { return static_cast<int>(m.size()) - 1; }
};

/// Checks integrability conditions (i) and (ii). Returns a report; use
/// require_valid to turn failures into exceptions.
ValidationReport validate_model(const LevyModel& model);

/// Throws NonIntegrableMeasure / ExponentialTailViolation /
/// std::invalid_argument when validate_model fails.
void require_valid(const LevyModel& model);

/// Moment table m_1..m_order and mu_0..mu_{order-2}. Atom contributions are
/// exact; density contributions use adaptive quadrature at rel. tol 1e-10.
MomentTable moments(const LevyModel& model, int order);

/// Adaptive Simpson quadrature with a subdivision-depth divergence guard.
/// Throws QuadratureFailure when the tolerance is not met within max_depth.
double adaptive_quadrature(const std::function<double(double)>& f, double a, double b,
                           double rel_tol = 1e-10, int max_depth = 60);

/// Built-in density families for config files.
/// "exp_tail": scale * e^{-|z|} on |z| in [band_lo, band_hi] (two-sided).
/// "uniform_band": level on [lo, hi] (one-sided).
LevyModel with_exp_tail_density(LevyModel model, double scale, double band_lo, double band_hi);
LevyModel with_uniform_band_density(LevyModel model, double level, double lo, double hi);

} // namespace tfbsde
