#pragma once

#include "tfbsde/fbsde_problem.hpp"
#include "tfbsde/solver.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tfbsde {

/// Additive data perturbation h -> h + eps * direction(x) applied to one
/// coefficient of the system.
struct PerturbationSpec {
    std::string which = "g";         // one of: f, sigma, g, phi, x0
    std::string direction = "const"; // "const" or "tanh_x"
    std::vector<double> eps = {0.1, 0.01, 0.001};
};

/// Returns the perturbed copy of the problem. sigma perturbations act on
/// channel 1; x0 perturbations shift the initial mean.
FbsdeProblem perturbed_problem(const FbsdeProblem& base, const PerturbationSpec& spec,
                               double eps);

struct StabilityRow {
    double eps = 0.0;
    double delta_norm = 0.0; // M^2-distance between solutions
    double data_term = 0.0;  // E{|dX0|^2 + |dphi|^2 + int (|df|^2+|dsigma|^2+|dg|^2)}
    double c_hat = 0.0;      // delta_norm^2 / data_term
};

struct StabilityResult {
    std::vector<StabilityRow> rows;
    bool zero_exact = false;  // eps = 0 rerun bit-identical
    double ratio_spread = 0.0; // max c_hat / min c_hat
    bool pass = false;         // zero_exact && ratio_spread <= 10
};

/// Solves base and perturbed problems on one bundle (common random numbers)
/// for each eps and reports the empirical stability ratio.
StabilityResult stability_experiment(const FbsdeProblem& problem, const LevyModel& model,
                                     const TeugelsBasis& basis, const PerturbationSpec& spec,
                                     const SolverConfig& config, std::uint64_t seed);

struct ConvergenceRow {
    double eps = 0.0;
    double dist = 0.0;
    double se = 0.0; // Monte Carlo standard error of dist
};

struct ConvergenceResult {
    std::vector<ConvergenceRow> rows;
    bool pass = false; // distances nonincreasing within 2 SE along the ladder
};

/// Perturbation ladder eps_n = 2^{-n}, n = 1..n_levels; checks that the
/// solution distances decrease monotonically up to Monte Carlo noise.
ConvergenceResult convergence_experiment(const FbsdeProblem& problem, const LevyModel& model,
                                         const TeugelsBasis& basis, const PerturbationSpec& spec,
                                         const SolverConfig& config, std::uint64_t seed,
                                         int n_levels = 6);

struct ComparisonResult {
    double y0_0 = 0.0;
    double y0_1 = 0.0;
    double diff = 0.0;
    double se = 0.0;
    double z_score = 0.0;
    bool pass = false; // diff >= -3 se
};

/// Solves two problems sharing (f, sigma) with common random numbers and
/// checks the time-zero ordering of Y. Throws HypothesisViolated if a probe
/// point has phi0 > phi1 or g0 > g1.
ComparisonResult comparison_experiment(const FbsdeProblem& problem0,
                                       const FbsdeProblem& problem1, const LevyModel& model,
                                       const TeugelsBasis& basis, const SolverConfig& config,
                                       std::uint64_t seed, int hypothesis_probes = 10000);

/// Linear system: f = a1 x + b1 y + c1 z1, sigma^1 = a2 x + b2 y,
/// g = a3 x + b3 y + c3 z1 + beta, phi = P x + alpha, X_0 = 0.
struct LinearProblemSpec {
    double a1 = 0.0, b1 = 0.0, c1 = 0.0;
    double a2 = 0.0, b2 = 0.0;
    double a3 = 0.0, b3 = 0.0, c3 = 0.0;
    double P = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    double T = 1.0;
    double lambda = 1.0;  // declared coefficient bound
    double lambda0 = 1.0; // declared bound on |P|
};

FbsdeProblem make_linear_problem(const LinearProblemSpec& spec, int n_channels);

struct LinearCheckResult {
    double y0 = 0.0;
    double se = 0.0;
    bool pass = false; // y0 >= -3 se
};

/// Verifies the structural hypotheses (coefficient bounds, b2 c1 = 0, the
/// derivative-sum identity, alpha >= 0, beta >= 0) and the sign of y0.
LinearCheckResult linear_proposition_check(const LinearProblemSpec& spec, const LevyModel& model,
                                           const TeugelsBasis& basis, const SolverConfig& config,
                                           std::uint64_t seed);

} // namespace tfbsde
