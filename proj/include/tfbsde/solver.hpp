#pragma once

#include "tfbsde/fbsde_problem.hpp"
#include "tfbsde/path_engine.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace tfbsde {

struct SolverConfig {
    int n_paths = 10000;
    int n_steps = 50;          // per subinterval
    int regression_degree = 5; // polynomial degree in X
    double picard_tol = 1e-4;  // M^2-distance stopping threshold
    int picard_max_iter = 50;
    double delta_shrink = 0.5;
    int x_grid_points = 21;    // terminal-function sample points
    double x_grid_sds = 6.0;   // grid half-width in forward-state std devs
    double budget_c = 1.0;     // constant c in the Lipschitz budget
    int pilot_paths = 2000;    // horizon-selection and grid-stage path count
    int force_segments = 0;    // > 0: fixed segment count, skip horizon selection
    int n_threads = 1;

    void validate() const;
};

/// Piecewise-linear terminal condition x -> G(x) with linear extrapolation
/// beyond the sampled range.
struct TerminalFunction {
    std::vector<double> xs; // strictly increasing
    std::vector<double> ys;

    double operator()(double x) const;
    double lipschitz_estimate() const; // max slope magnitude between knots
};

/// Draws X_0 per path: constant when the initial law is deterministic,
/// otherwise normal with the declared mean and variance.
std::vector<double> sample_x0(const FbsdeProblem& problem, int n_paths, std::uint64_t seed);

/// One application of the contraction map: freeze (Y, Z) at the prior, run the
/// forward Euler scheme, then the regression-based backward induction.
/// prior == nullptr means the zero prior.
SolutionTriple decoupled_sweep(const FbsdeProblem& problem, const PathBundle& bundle,
                               const SolutionTriple* prior, const SolverConfig& config,
                               std::span<const double> x0);

struct PicardResult {
    SolutionTriple sol;
    int iterations = 0;
    std::vector<double> distances; // d(Pi_m, Pi_{m-1})
    std::vector<double> ratios;    // distances[m] / distances[m-1]
};

/// Picard iteration from the zero seed until the M^2-distance between
/// consecutive iterates drops below picard_tol.
PicardResult picard_solve(const FbsdeProblem& problem, const PathBundle& bundle,
                          const SolverConfig& config, std::span<const double> x0);
PicardResult picard_solve(const FbsdeProblem& problem, const PathBundle& bundle,
                          const SolverConfig& config);

/// Largest horizon <= min(T, 1) on which a pilot Picard run contracts with
/// observed ratios <= 0.9; shrinks geometrically on failure.
double estimate_delta(const FbsdeProblem& problem, const LevyModel& model,
                      const TeugelsBasis& basis, const SolverConfig& config,
                      std::uint64_t seed);

struct GlueResult {
    SolutionTriple sol;
    double delta = 0.0;
    int n_segments = 0;
    double lambda0_bar = 0.0;   // budget c([lambda0+1]e^{(2 lambda + lambda^2)T} - 1)
    double max_lipschitz = 0.0; // worst terminal-function Lipschitz estimate
    bool budget_ok = true;
    int total_iterations = 0;
    std::vector<double> distances; // single-segment case: the Picard distances
    std::vector<double> ratios;
};

/// Full-horizon solve: partitions [0, T] into n = ceil(T/delta) segments,
/// builds the intermediate terminal functions backward on an x-grid, then
/// stitches the path solution forward. n = 1 falls through to picard_solve.
GlueResult glue_solve(const FbsdeProblem& problem, const LevyModel& model,
                      const TeugelsBasis& basis, const SolverConfig& config,
                      std::uint64_t seed);

} // namespace tfbsde
