#pragma once

#include "tfbsde/path_engine.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace tfbsde {

using ZView = std::span<const double>;

/// Data of the coupled forward-backward system: coefficient functions, their
/// declared Lipschitz constants, the initial law of X_0, and the horizon.
/// sigma writes its K channels into the provided span.
struct FbsdeProblem {
    std::function<double(double, double, double, ZView)> f;
    std::function<void(double, double, double, std::span<double>)> sigma;
    std::function<double(double, double, double, ZView)> g;
    std::function<double(double)> phi;
    int n_channels = 1;

    double lambda = 0.0;   // Lipschitz constant of f, sigma, g
    double lambda0 = 0.0;  // Lipschitz constant of phi
    double T = 1.0;

    double x0_mean = 0.0;
    double x0_var = 0.0;   // 0 => deterministic X_0

    bool x0_deterministic() const { return x0_var == 0.0; }
};

/// Discrete-time solution triple on a path bundle's grid.
struct SolutionTriple {
    TimeGrid grid;
    int n_paths = 0;
    int n_channels = 0;
    std::vector<double> X; // [p * (n_steps + 1) + k]
    std::vector<double> Y; // [p * (n_steps + 1) + k]
    std::vector<double> Z; // [(p * n_steps + k) * n_channels + i]
    double y0 = 0.0;
    double y0_se = 0.0;
    // Per-path unsmoothed backward value phi(X_T) + sum g dt; its mean equals
    // y0 (regression preserves means), its spread gives the Monte Carlo SE.
    std::vector<double> rollout;

    double x_at(int p, int k) const { return X[static_cast<std::size_t>(p) * (grid.n_steps + 1) + k]; }
    double y_at(int p, int k) const { return Y[static_cast<std::size_t>(p) * (grid.n_steps + 1) + k]; }
    double z_at(int p, int k, int i) const {
        return Z[(static_cast<std::size_t>(p) * grid.n_steps + k) * n_channels + i];
    }
};

SolutionTriple zero_triple(const TimeGrid& grid, int n_paths, int n_channels);

/// Data norm V_0 = sqrt(E|X_0|^2 + |phi(0)|^2 + int_0^T [|f|^2 + ||sigma||^2 +
/// |g|^2](t,0,0,0) dt), time integral by composite Simpson with n_quad panels.
double check_V0(const FbsdeProblem& problem, int n_quad = 200);

struct H2Report {
    double max_product_residual = 0.0; // max |sigma_y^i f_z^j|
    double max_sum_residual = 0.0;     // max |f_y + <sigma_x, f_z> + <sigma_y, g_z>|
    double tol = 0.0;
    bool pass = false;
};

/// Finite-difference audit of the derivative conditions at random probe
/// points. Report-only; never throws on failure.
H2Report check_H2(const FbsdeProblem& problem, int probes = 64, double fd_step = 1e-5,
                  std::uint64_t seed = 0);

/// Max observed difference-quotient ratio against the declared constants over
/// random probe pairs; <= 1 + tolerance when the declaration is honest.
double lipschitz_audit(const FbsdeProblem& problem, int probes = 256, std::uint64_t seed = 0);

/// Monte Carlo estimate of (E[sup|X|^2 + sup|Y|^2] + E int ||Z||^2 dt)^{1/2}.
double solution_norm(const SolutionTriple& sol);

/// Same functional applied to the difference of two triples on one grid.
double m2_distance(const SolutionTriple& a, const SolutionTriple& b);

/// Per-path contributions of the M^2 functional of (a - b), for SE estimates.
std::vector<double> m2_per_path(const SolutionTriple& a, const SolutionTriple& b);

} // namespace tfbsde
