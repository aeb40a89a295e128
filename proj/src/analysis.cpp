#include "tfbsde/analysis.hpp"

#include "tfbsde/errors.hpp"
#include "tfbsde/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace tfbsde {

namespace {

std::function<double(double)> direction_fn(const std::string& name) {
    if (name == "const") return [](double) { return 1.0; };
    if (name == "tanh_x") return [](double x) { return std::tanh(x); };
    throw std::invalid_argument("perturbation: unknown direction '" + name + "'");
}

/// Mean and standard error of the M^2-distance between two triples.
void distance_with_se(const SolutionTriple& a, const SolutionTriple& b, double& dist,
                      double& se) {
    const std::vector<double> w = m2_per_path(a, b);
    const int n = static_cast<int>(w.size());
    double mean = 0.0;
    for (double v : w) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : w) var += (v - mean) * (v - mean);
    var = n > 1 ? var / (n - 1) : 0.0;
    dist = std::sqrt(mean);
    const double se_sq = std::sqrt(var / n); // SE of the squared distance
    se = dist > 0.0 ? se_sq / (2.0 * dist) : std::sqrt(se_sq);
}

} // namespace

FbsdeProblem perturbed_problem(const FbsdeProblem& base, const PerturbationSpec& spec,
                               double eps) {
    FbsdeProblem out = base;
    const auto dir = direction_fn(spec.direction);
    if (spec.which == "f") {
        out.f = [f = base.f, dir, eps](double t, double x, double y, ZView z) {
            return f(t, x, y, z) + eps * dir(x);
        };
    } else if (spec.which == "sigma") {
        out.sigma = [s = base.sigma, dir, eps](double t, double x, double y,
                                               std::span<double> sig) {
            s(t, x, y, sig);
            sig[0] += eps * dir(x);
        };
    } else if (spec.which == "g") {
        out.g = [g = base.g, dir, eps](double t, double x, double y, ZView z) {
            return g(t, x, y, z) + eps * dir(x);
        };
    } else if (spec.which == "phi") {
        out.phi = [p = base.phi, dir, eps](double x) { return p(x) + eps * dir(x); };
    } else if (spec.which == "x0") {
        out.x0_mean += eps;
    } else {
        throw std::invalid_argument("perturbation: unknown target '" + spec.which + "'");
    }
    // The additive bounded perturbation can only enlarge the Lipschitz
    // constants through the direction's slope; keep the declared values.
    return out;
}

namespace {

/// The data term of the stability estimate, evaluated along the perturbed
/// solution's paths. For our additive perturbations the coefficient
/// differences reduce to eps * direction(x).
double stability_data_term(const SolutionTriple& sol1, const PerturbationSpec& spec,
                           double eps) {
    const auto dir = direction_fn(spec.direction);
    if (spec.which == "x0") return eps * eps;
    const int n = sol1.n_paths;
    const int n_steps = sol1.grid.n_steps;
    const double dt = sol1.grid.dt();
    double acc = 0.0;
    if (spec.which == "phi") {
        for (int p = 0; p < n; ++p) {
            const double d = eps * dir(sol1.x_at(p, n_steps));
            acc += d * d;
        }
        return acc / n;
    }
    for (int p = 0; p < n; ++p) {
        double path = 0.0;
        for (int k = 0; k < n_steps; ++k) {
            const double d = eps * dir(sol1.x_at(p, k));
            path += d * d * dt;
        }
        acc += path;
    }
    return acc / n;
}

} // namespace

StabilityResult stability_experiment(const FbsdeProblem& problem, const LevyModel& model,
                                     const TeugelsBasis& basis, const PerturbationSpec& spec,
                                     const SolverConfig& config, std::uint64_t seed) {
    config.validate();
    const PathBundle bundle = simulate(model, basis, {problem.T, config.n_steps},
                                       config.n_paths, seed, config.n_threads);
    const std::vector<double> x0 = sample_x0(problem, config.n_paths, seed);
    const PicardResult base = picard_solve(problem, bundle, config, x0);

    StabilityResult result;
    // eps = 0: a freshly built identical problem must reproduce the base run
    // bit for bit under common random numbers.
    {
        const FbsdeProblem same = perturbed_problem(problem, spec, 0.0);
        const PicardResult rerun = picard_solve(same, bundle, config, x0);
        result.zero_exact = m2_distance(rerun.sol, base.sol) == 0.0;
    }

    double c_min = std::numeric_limits<double>::infinity();
    double c_max = 0.0;
    for (double eps : spec.eps) {
        const FbsdeProblem pert = perturbed_problem(problem, spec, eps);
        std::vector<double> x0p = x0;
        if (spec.which == "x0")
            for (auto& v : x0p) v += eps;
        const PicardResult solved = picard_solve(pert, bundle, config, x0p);
        StabilityRow row;
        row.eps = eps;
        row.delta_norm = m2_distance(solved.sol, base.sol);
        row.data_term = stability_data_term(solved.sol, spec, eps);
        row.c_hat = row.data_term > 0.0 ? row.delta_norm * row.delta_norm / row.data_term : 0.0;
        if (row.data_term > 0.0) {
            c_min = std::min(c_min, row.c_hat);
            c_max = std::max(c_max, row.c_hat);
        }
        result.rows.push_back(row);
    }
    result.ratio_spread = (c_min > 0.0 && std::isfinite(c_min)) ? c_max / c_min : 0.0;
    result.pass = result.zero_exact && result.ratio_spread <= 10.0 && result.ratio_spread > 0.0;
    return result;
}

ConvergenceResult convergence_experiment(const FbsdeProblem& problem, const LevyModel& model,
                                         const TeugelsBasis& basis, const PerturbationSpec& spec,
                                         const SolverConfig& config, std::uint64_t seed,
                                         int n_levels) {
    config.validate();
    const PathBundle bundle = simulate(model, basis, {problem.T, config.n_steps},
                                       config.n_paths, seed, config.n_threads);
    const std::vector<double> x0 = sample_x0(problem, config.n_paths, seed);
    const PicardResult base = picard_solve(problem, bundle, config, x0);

    ConvergenceResult result;
    for (int lvl = 1; lvl <= n_levels; ++lvl) {
        const double eps = std::ldexp(1.0, -lvl);
        const FbsdeProblem pert = perturbed_problem(problem, spec, eps);
        std::vector<double> x0p = x0;
        if (spec.which == "x0")
            for (auto& v : x0p) v += eps;
        const PicardResult solved = picard_solve(pert, bundle, config, x0p);
        ConvergenceRow row;
        row.eps = eps;
        distance_with_se(solved.sol, base.sol, row.dist, row.se);
        result.rows.push_back(row);
    }
    result.pass = true;
    for (std::size_t i = 1; i < result.rows.size(); ++i) {
        const auto& prev = result.rows[i - 1];
        const auto& cur = result.rows[i];
        if (cur.dist > prev.dist + 2.0 * (prev.se + cur.se)) result.pass = false;
    }
    return result;
}

ComparisonResult comparison_experiment(const FbsdeProblem& problem0,
                                       const FbsdeProblem& problem1, const LevyModel& model,
                                       const TeugelsBasis& basis, const SolverConfig& config,
                                       std::uint64_t seed, int hypothesis_probes) {
    config.validate();
    // Probe the ordering hypotheses over a generous state envelope.
    std::vector<double> z(static_cast<std::size_t>(problem0.n_channels), 0.0);
    for (int n = 0; n < hypothesis_probes; ++n) {
        StreamRng rng(seed, static_cast<std::uint64_t>(n), 0xC0339A12ULL);
        const double t = problem0.T * rng.next_uniform();
        const double x = 4.0 * rng.next_normal();
        const double y = 4.0 * rng.next_normal();
        for (auto& v : z) v = 4.0 * rng.next_normal();
        if (problem0.phi(x) > problem1.phi(x) + 1e-12)
            throw HypothesisViolated("comparison: phi0 > phi1 at a probe point");
        if (problem0.g(t, x, y, z) > problem1.g(t, x, y, z) + 1e-12)
            throw HypothesisViolated("comparison: g0 > g1 at a probe point");
    }

    const PathBundle bundle = simulate(model, basis, {problem0.T, config.n_steps},
                                       config.n_paths, seed, config.n_threads);
    const std::vector<double> x0 = sample_x0(problem0, config.n_paths, seed);
    const PicardResult r0 = picard_solve(problem0, bundle, config, x0);
    const PicardResult r1 = picard_solve(problem1, bundle, config, x0);

    ComparisonResult result;
    result.y0_0 = r0.sol.y0;
    result.y0_1 = r1.sol.y0;
    result.diff = result.y0_1 - result.y0_0;
    // Common random numbers: the per-path rollout differences carry the Monte
    // Carlo noise of the y0 difference estimate.
    const int n = config.n_paths;
    double mean = 0.0;
    for (int p = 0; p < n; ++p)
        mean += r1.sol.rollout[static_cast<std::size_t>(p)] - r0.sol.rollout[static_cast<std::size_t>(p)];
    mean /= n;
    double var = 0.0;
    for (int p = 0; p < n; ++p) {
        const double d = r1.sol.rollout[static_cast<std::size_t>(p)] -
                         r0.sol.rollout[static_cast<std::size_t>(p)] - mean;
        var += d * d;
    }
    result.se = n > 1 ? std::sqrt(var / (n - 1) / n) : 0.0;
    result.z_score = result.se > 0.0 ? result.diff / result.se : 0.0;
    result.pass = result.diff >= -3.0 * result.se;
    return result;
}

FbsdeProblem make_linear_problem(const LinearProblemSpec& spec, int n_channels) {
    FbsdeProblem problem;
    problem.n_channels = n_channels;
    problem.f = [spec](double, double x, double y, ZView z) {
        return spec.a1 * x + spec.b1 * y + spec.c1 * z[0];
    };
    problem.sigma = [spec](double, double x, double y, std::span<double> sig) {
        std::fill(sig.begin(), sig.end(), 0.0);
        sig[0] = spec.a2 * x + spec.b2 * y;
    };
    problem.g = [spec](double, double x, double y, ZView z) {
        return spec.a3 * x + spec.b3 * y + spec.c3 * z[0] + spec.beta;
    };
    problem.phi = [spec](double x) { return spec.P * x + spec.alpha; };
    problem.lambda = spec.lambda;
    problem.lambda0 = spec.lambda0;
    problem.T = spec.T;
    problem.x0_mean = 0.0;
    problem.x0_var = 0.0;
    return problem;
}

LinearCheckResult linear_proposition_check(const LinearProblemSpec& spec, const LevyModel& model,
                                           const TeugelsBasis& basis, const SolverConfig& config,
                                           std::uint64_t seed) {
    config.validate();
    if (spec.alpha < 0.0 || spec.beta < 0.0)
        throw HypothesisViolated("linear check: alpha and beta must be nonnegative");
    const double coeff_bound = std::max({std::abs(spec.a1), std::abs(spec.b1), std::abs(spec.c1),
                                         std::abs(spec.a2), std::abs(spec.b2), std::abs(spec.a3),
                                         std::abs(spec.b3), std::abs(spec.c3)});
    if (coeff_bound > spec.lambda + 1e-12)
        throw HypothesisViolated("linear check: coefficient exceeds the declared lambda");
    if (std::abs(spec.P) > spec.lambda0 + 1e-12)
        throw HypothesisViolated("linear check: |P| exceeds the declared lambda0");
    if (std::abs(spec.b2 * spec.c1) > 1e-12)
        throw HypothesisViolated("linear check: b2 c1 = 0 fails");
    if (std::abs(spec.b1 + spec.a2 * spec.c1 + spec.b2 * spec.c3) > 1e-12)
        throw HypothesisViolated("linear check: b1 + a2 c1 + b2 c3 = 0 fails");

    const FbsdeProblem problem = make_linear_problem(spec, basis.K_eff);
    const PathBundle bundle = simulate(model, basis, {spec.T, config.n_steps}, config.n_paths,
                                       seed, config.n_threads);
    const PicardResult solved = picard_solve(problem, bundle, config);
    LinearCheckResult result;
    result.y0 = solved.sol.y0;
    result.se = solved.sol.y0_se;
    result.pass = result.y0 >= -3.0 * result.se;
    return result;
}

} // namespace tfbsde
