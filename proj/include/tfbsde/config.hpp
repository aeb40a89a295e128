#pragma once

#include "tfbsde/analysis.hpp"
#include "tfbsde/fbsde_problem.hpp"
#include "tfbsde/levy_model.hpp"
#include "tfbsde/solver.hpp"

#include <cstdint>
#include <string>

namespace tfbsde {

/// Coefficient description of the built-in problem families.
/// "affine":  f = f0 + fx x + fy y + fz z1, sigma^1 = s0 + sx x + sy y,
///            g = g0 + gx x + gy y + gz z1, phi = p0 + px x.
/// "tanh":    same constants applied through bounded tanh links:
///            f = f0 + fx tanh(x) + fy tanh(y) + fz tanh(z1), etc.
struct ProblemSpec {
    std::string family = "affine";
    double f0 = 0.0, fx = 0.0, fy = 0.0, fz = 0.0;
    double s0 = 0.0, sx = 0.0, sy = 0.0;
    double g0 = 0.0, gx = 0.0, gy = 0.0, gz = 0.0;
    double p0 = 0.0, px = 0.0;
    double lambda = -1.0;  // < 0: derive from the coefficients
    double lambda0 = -1.0; // < 0: derive from |px|
    double x0_mean = 0.0;
    double x0_var = 0.0;
};

FbsdeProblem make_problem(const ProblemSpec& spec, double T, int n_channels);

struct ExperimentSpec {
    std::string name = "stability"; // stability|convergence|comparison|linear|brackets|h2
    PerturbationSpec pert;
    double shift = 0.1;             // comparison experiments: additive shift size
    std::string shift_target = "g"; // comparison experiments: "g" or "phi"
    int n_levels = 6;               // convergence ladder length
    LinearProblemSpec linear;       // "linear" experiment coefficients
};

struct RunConfig {
    LevyModel model;
    int basis_K = 3;
    double rank_tol = 1e-12;
    double T = 1.0;
    int grid_steps = 50; // simulate command; solver uses solver.n_steps
    ProblemSpec problem;
    SolverConfig solver;
    ExperimentSpec experiment;
    std::uint64_t seed = 0;
    std::string out_dir = ".";
    bool dump_bundle = false;
};

/// Parses the JSON run configuration. Throws ConfigError with a dotted field
/// path on any missing or ill-typed entry.
RunConfig load_config(const std::string& path);

} // namespace tfbsde
