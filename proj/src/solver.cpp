#include "tfbsde/solver.hpp"

#include "tfbsde/errors.hpp"
#include "tfbsde/parallel.hpp"
#include "tfbsde/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace tfbsde {

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    StreamRng rng(seed, a, b);
    return rng.next_u64();
}

/// Per-step least-squares projection onto centered/scaled polynomials of X.
/// The normal equations are assembled and factorized once; each conditional
/// expectation at the step reuses the factorization. Rank problems are handled
/// by degree fallback; only an empty cross-section is unrecoverable.
class StepRegression {
public:
    StepRegression(std::span<const double> x, int degree) : n_(x.size()) {
        if (n_ == 0) throw RegressionSingular("regression: empty cross-section");
        double mean = 0.0;
        for (double v : x) mean += v;
        mean /= static_cast<double>(n_);
        double var = 0.0;
        for (double v : x) var += (v - mean) * (v - mean);
        var /= static_cast<double>(n_);
        const double scale = std::sqrt(var);

        int deg = degree;
        if (!(scale > 1e-12)) deg = 0;
        deg = std::min<int>(deg, static_cast<int>(n_) - 1);
        deg = std::max(deg, 0);

        // Standardized feature matrix, highest degree we may need.
        features_.assign(n_ * static_cast<std::size_t>(deg + 1), 0.0);
        for (std::size_t p = 0; p < n_; ++p) {
            const double u = deg == 0 ? 1.0 : (x[p] - mean) / scale;
            double pw = 1.0;
            for (int d = 0; d <= deg; ++d) {
                features_[p * static_cast<std::size_t>(deg + 1) + static_cast<std::size_t>(d)] = pw;
                pw *= u;
            }
        }
        stride_ = static_cast<std::size_t>(deg + 1);

        // Try the requested degree first and walk down until the normal
        // equations are positive definite.
        for (; deg >= 0; --deg) {
            if (factorize(deg)) {
                degree_ = deg;
                return;
            }
        }
        throw RegressionSingular("regression: normal equations singular at degree 0");
    }

    /// Fitted values E-hat[y | X] at every sample point.
    std::vector<double> fit(std::span<const double> y) const {
        const int m = degree_ + 1;
        std::vector<double> b(static_cast<std::size_t>(m), 0.0);
        for (std::size_t p = 0; p < n_; ++p)
            for (int d = 0; d < m; ++d)
                b[static_cast<std::size_t>(d)] += features_[p * stride_ + static_cast<std::size_t>(d)] * y[p];
        // Solve L L^T c = b.
        for (int i = 0; i < m; ++i) {
            double s = b[static_cast<std::size_t>(i)];
            for (int j = 0; j < i; ++j) s -= chol_[at(i, j)] * b[static_cast<std::size_t>(j)];
            b[static_cast<std::size_t>(i)] = s / chol_[at(i, i)];
        }
        for (int i = m - 1; i >= 0; --i) {
            double s = b[static_cast<std::size_t>(i)];
            for (int j = i + 1; j < m; ++j) s -= chol_[at(j, i)] * b[static_cast<std::size_t>(j)];
            b[static_cast<std::size_t>(i)] = s / chol_[at(i, i)];
        }
        std::vector<double> out(n_, 0.0);
        for (std::size_t p = 0; p < n_; ++p) {
            double v = 0.0;
            for (int d = 0; d < m; ++d)
                v += features_[p * stride_ + static_cast<std::size_t>(d)] * b[static_cast<std::size_t>(d)];
            out[p] = v;
        }
        return out;
    }

private:
    std::size_t at(int i, int j) const {
        return static_cast<std::size_t>(i) * static_cast<std::size_t>(degree_max_ + 1) +
               static_cast<std::size_t>(j);
    }

    bool factorize(int deg) {
        const int m = deg + 1;
        degree_max_ = deg;
        std::vector<double> gram(static_cast<std::size_t>(m) * m, 0.0);
        for (std::size_t p = 0; p < n_; ++p)
            for (int i = 0; i < m; ++i)
                for (int j = 0; j <= i; ++j)
                    gram[static_cast<std::size_t>(i) * m + j] +=
                        features_[p * stride_ + static_cast<std::size_t>(i)] *
                        features_[p * stride_ + static_cast<std::size_t>(j)];
        chol_.assign(static_cast<std::size_t>(m) * m, 0.0);
        const double tol = 1e-10 * static_cast<double>(n_);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j <= i; ++j) {
                double s = gram[static_cast<std::size_t>(i) * m + j];
                for (int k = 0; k < j; ++k) s -= chol_[at(i, k)] * chol_[at(j, k)];
                if (i == j) {
                    if (s <= tol) return false;
                    chol_[at(i, i)] = std::sqrt(s);
                } else {
                    chol_[at(i, j)] = s / chol_[at(j, j)];
                }
            }
        }
        degree_ = deg;
        return true;
    }

    std::size_t n_;
    std::size_t stride_ = 1;
    int degree_ = 0;
    int degree_max_ = 0;
    std::vector<double> features_; // at the construction degree; lower fits use a prefix
    std::vector<double> chol_;
};

} // namespace

void SolverConfig::validate() const {
    if (n_paths < 2) throw std::invalid_argument("solver: n_paths must be >= 2");
    if (n_steps < 1) throw std::invalid_argument("solver: n_steps must be positive");
    if (regression_degree < 1) throw std::invalid_argument("solver: regression degree must be >= 1");
    if (!(picard_tol > 0.0)) throw std::invalid_argument("solver: picard_tol must be positive");
    if (picard_max_iter < 1) throw std::invalid_argument("solver: picard_max_iter must be positive");
    if (!(delta_shrink > 0.0 && delta_shrink < 1.0))
        throw std::invalid_argument("solver: delta_shrink must be in (0, 1)");
    if (x_grid_points < 2) throw std::invalid_argument("solver: x_grid_points must be >= 2");
    if (!(x_grid_sds > 0.0)) throw std::invalid_argument("solver: x_grid_sds must be positive");
    if (pilot_paths < 2) throw std::invalid_argument("solver: pilot_paths must be >= 2");
}

double TerminalFunction::operator()(double x) const {
    const std::size_t n = xs.size();
    if (n == 1) return ys[0];
    std::size_t hi = static_cast<std::size_t>(
        std::upper_bound(xs.begin(), xs.end(), x) - xs.begin());
    if (hi == 0) hi = 1;
    if (hi == n) hi = n - 1;
    const double w = (x - xs[hi - 1]) / (xs[hi] - xs[hi - 1]);
    return ys[hi - 1] + w * (ys[hi] - ys[hi - 1]);
}

double TerminalFunction::lipschitz_estimate() const {
    double worst = 0.0;
    for (std::size_t i = 1; i < xs.size(); ++i)
        worst = std::max(worst, std::abs((ys[i] - ys[i - 1]) / (xs[i] - xs[i - 1])));
    return worst;
}

std::vector<double> sample_x0(const FbsdeProblem& problem, int n_paths, std::uint64_t seed) {
    std::vector<double> x0(static_cast<std::size_t>(n_paths), problem.x0_mean);
    if (!problem.x0_deterministic()) {
        const double sd = std::sqrt(problem.x0_var);
        for (int p = 0; p < n_paths; ++p) {
            StreamRng rng(seed, static_cast<std::uint64_t>(p), 0x1234F0ULL);
            x0[static_cast<std::size_t>(p)] = problem.x0_mean + sd * rng.next_normal();
        }
    }
    return x0;
}

SolutionTriple decoupled_sweep(const FbsdeProblem& problem, const PathBundle& bundle,
                               const SolutionTriple* prior, const SolverConfig& config,
                               std::span<const double> x0) {
    const int K = bundle.K_eff;
    if (problem.n_channels != K)
        throw GridMismatch("decoupled_sweep: problem channel count differs from bundle K_eff");
    if (static_cast<int>(x0.size()) != bundle.n_paths)
        throw GridMismatch("decoupled_sweep: x0 size differs from bundle path count");
    if (prior && (!(prior->grid == bundle.grid) || prior->n_paths != bundle.n_paths ||
                  prior->n_channels != K))
        throw GridMismatch("decoupled_sweep: prior lives on a different bundle");

    const int n_steps = bundle.grid.n_steps;
    const int n_paths = bundle.n_paths;
    const double dt = bundle.grid.dt();
    SolutionTriple sol = zero_triple(bundle.grid, n_paths, K);

    parallel_chunks(static_cast<std::size_t>(n_paths), config.n_threads,
                    [&](std::size_t p0, std::size_t p1) {
        std::vector<double> sig(static_cast<std::size_t>(K), 0.0);
        const std::vector<double> zero_z(static_cast<std::size_t>(K), 0.0);
        for (std::size_t p = p0; p < p1; ++p) {
            double x = x0[p];
            sol.X[p * (static_cast<std::size_t>(n_steps) + 1)] = x;
            for (int k = 0; k < n_steps; ++k) {
                const double t = bundle.grid.t(k);
                const double yp = prior ? prior->y_at(static_cast<int>(p), k) : 0.0;
                ZView zp = prior
                    ? ZView(&prior->Z[(p * static_cast<std::size_t>(n_steps) + static_cast<std::size_t>(k)) * K],
                            static_cast<std::size_t>(K))
                    : ZView(zero_z);
                double dx = problem.f(t, x, yp, zp) * dt;
                problem.sigma(t, x, yp, sig);
                for (int i = 0; i < K; ++i)
                    dx += sig[static_cast<std::size_t>(i)] * bundle.dH_at(static_cast<int>(p), k, i);
                x += dx;
                sol.X[p * (static_cast<std::size_t>(n_steps) + 1) + static_cast<std::size_t>(k) + 1] = x;
            }
            sol.Y[p * (static_cast<std::size_t>(n_steps) + 1) + static_cast<std::size_t>(n_steps)] =
                problem.phi(x);
        }
    });

    for (int p = 0; p < n_paths; ++p)
        if (!std::isfinite(sol.x_at(p, n_steps)) || !std::isfinite(sol.y_at(p, n_steps)))
            throw NonFiniteData("decoupled_sweep: forward pass produced non-finite state");

    // Backward induction; regression is serial so results are independent of
    // the thread count.
    std::vector<double> xs(static_cast<std::size_t>(n_paths));
    std::vector<double> target(static_cast<std::size_t>(n_paths));
    std::vector<double> zrow(static_cast<std::size_t>(K));
    for (int p = 0; p < n_paths; ++p)
        sol.rollout[static_cast<std::size_t>(p)] = sol.y_at(p, n_steps);
    for (int k = n_steps - 1; k >= 0; --k) {
        for (int p = 0; p < n_paths; ++p) xs[static_cast<std::size_t>(p)] = sol.x_at(p, k);
        StepRegression reg(xs, config.regression_degree);

        for (int p = 0; p < n_paths; ++p) target[static_cast<std::size_t>(p)] = sol.y_at(p, k + 1);
        const std::vector<double> cond_y = reg.fit(target);

        for (int i = 0; i < K; ++i) {
            for (int p = 0; p < n_paths; ++p)
                target[static_cast<std::size_t>(p)] =
                    sol.y_at(p, k + 1) * bundle.dH_at(p, k, i);
            const std::vector<double> zfit = reg.fit(target);
            for (int p = 0; p < n_paths; ++p)
                sol.Z[(static_cast<std::size_t>(p) * n_steps + static_cast<std::size_t>(k)) * K +
                      static_cast<std::size_t>(i)] = zfit[static_cast<std::size_t>(p)] / dt;
        }

        const double t = bundle.grid.t(k);
        for (int p = 0; p < n_paths; ++p) {
            for (int i = 0; i < K; ++i) zrow[static_cast<std::size_t>(i)] = sol.z_at(p, k, i);
            const double proxy = cond_y[static_cast<std::size_t>(p)];
            const double gv = problem.g(t, xs[static_cast<std::size_t>(p)], proxy, zrow);
            sol.Y[static_cast<std::size_t>(p) * (n_steps + 1) + static_cast<std::size_t>(k)] =
                proxy + gv * dt;
            sol.rollout[static_cast<std::size_t>(p)] += gv * dt;
        }
    }

    double mean0 = 0.0;
    for (int p = 0; p < n_paths; ++p) mean0 += sol.y_at(p, 0);
    sol.y0 = mean0 / n_paths;
    // SE from the per-path rollouts: their mean telescopes to y0 because the
    // regression fits preserve cross-sectional means.
    double m = 0.0, v = 0.0;
    for (double r : sol.rollout) m += r;
    m /= n_paths;
    for (double r : sol.rollout) v += (r - m) * (r - m);
    sol.y0_se = n_paths > 1 ? std::sqrt(v / (n_paths - 1) / n_paths) : 0.0;
    return sol;
}

PicardResult picard_solve(const FbsdeProblem& problem, const PathBundle& bundle,
                          const SolverConfig& config, std::span<const double> x0) {
    config.validate();
    PicardResult result;
    SolutionTriple prev = zero_triple(bundle.grid, bundle.n_paths, bundle.K_eff);
    int bad_streak = 0;
    for (int m = 1; m <= config.picard_max_iter; ++m) {
        SolutionTriple cur =
            decoupled_sweep(problem, bundle, m == 1 ? nullptr : &prev, config, x0);
        const double d = m2_distance(cur, prev);
        if (!result.distances.empty()) {
            const double prev_d = result.distances.back();
            const double r = prev_d > 0.0 ? d / prev_d : 0.0;
            result.ratios.push_back(r);
            if (r >= 1.0) {
                if (++bad_streak >= 3)
                    throw NoContraction("picard_solve: ratio >= 1 for 3 consecutive iterations");
            } else {
                bad_streak = 0;
            }
        }
        result.distances.push_back(d);
        result.iterations = m;
        prev = std::move(cur);
        if (d < config.picard_tol) {
            result.sol = std::move(prev);
            return result;
        }
    }
    throw MaxIterExceeded("picard_solve: no convergence within picard_max_iter iterations");
}

PicardResult picard_solve(const FbsdeProblem& problem, const PathBundle& bundle,
                          const SolverConfig& config) {
    const std::vector<double> x0 = sample_x0(problem, bundle.n_paths, bundle.seed);
    return picard_solve(problem, bundle, config, x0);
}

double estimate_delta(const FbsdeProblem& problem, const LevyModel& model,
                      const TeugelsBasis& basis, const SolverConfig& config,
                      std::uint64_t seed) {
    config.validate();
    SolverConfig pilot = config;
    pilot.n_paths = std::min(config.n_paths, config.pilot_paths);

    double t_try = std::min(problem.T, 1.0);
    for (;;) {
        if (t_try < 1e-4 * problem.T)
            throw DeltaUnderflow("estimate_delta: no contracting horizon above 1e-4 T");
        FbsdeProblem sub = problem;
        sub.T = t_try;
        const PathBundle bundle = simulate(model, basis, {t_try, pilot.n_steps}, pilot.n_paths,
                                           derive_seed(seed, 0xDE17A, 0), pilot.n_threads);
        bool ok = false;
        try {
            const PicardResult pr = picard_solve(sub, bundle, pilot);
            double worst = 0.0;
            for (double r : pr.ratios) worst = std::max(worst, r);
            ok = pr.ratios.empty() || worst <= 0.9;
        } catch (const NoContraction&) {
        } catch (const MaxIterExceeded&) {
        }
        if (ok) return t_try;
        t_try *= config.delta_shrink;
    }
}

namespace {

/// Time-shifted copy of the problem restricted to one gluing segment, with a
/// replaced terminal condition.
FbsdeProblem segment_problem(const FbsdeProblem& problem, double t_begin, double seg_T,
                             std::function<double(double)> terminal, double lambda0) {
    FbsdeProblem sub;
    sub.f = [f = problem.f, t_begin](double t, double x, double y, ZView z) {
        return f(t_begin + t, x, y, z);
    };
    sub.sigma = [s = problem.sigma, t_begin](double t, double x, double y, std::span<double> out) {
        s(t_begin + t, x, y, out);
    };
    sub.g = [g = problem.g, t_begin](double t, double x, double y, ZView z) {
        return g(t_begin + t, x, y, z);
    };
    sub.phi = std::move(terminal);
    sub.n_channels = problem.n_channels;
    sub.lambda = problem.lambda;
    sub.lambda0 = lambda0;
    sub.T = seg_T;
    return sub;
}

} // namespace

GlueResult glue_solve(const FbsdeProblem& problem, const LevyModel& model,
                      const TeugelsBasis& basis, const SolverConfig& config,
                      std::uint64_t seed) {
    config.validate();
    GlueResult result;
    int n;
    if (config.force_segments > 0) {
        n = config.force_segments;
        result.delta = problem.T / n;
    } else {
        result.delta = estimate_delta(problem, model, basis, config, seed);
        n = static_cast<int>(std::ceil(problem.T / result.delta - 1e-12));
        n = std::max(n, 1);
    }
    result.n_segments = n;
    result.lambda0_bar =
        config.budget_c *
        ((problem.lambda0 + 1.0) *
             std::exp((2.0 * problem.lambda + problem.lambda * problem.lambda) * problem.T) -
         1.0);

    if (n == 1) {
        const PathBundle bundle = simulate(model, basis, {problem.T, config.n_steps},
                                           config.n_paths, seed, config.n_threads);
        PicardResult pr = picard_solve(problem, bundle, config);
        result.sol = std::move(pr.sol);
        result.total_iterations = pr.iterations;
        result.distances = std::move(pr.distances);
        result.ratios = std::move(pr.ratios);
        result.max_lipschitz = problem.lambda0;
        result.budget_ok = true;
        return result;
    }

    const double seg_T = problem.T / n;
    const TimeGrid seg_grid{seg_T, config.n_steps};
    const int pilot_paths = std::min(config.n_paths, config.pilot_paths);

    // Pilot forward pass with the zero prior: estimate the location and spread
    // of the forward state at each partition time for the x-grids.
    std::vector<double> part_mean(static_cast<std::size_t>(n) + 1, problem.x0_mean);
    std::vector<double> part_sd(static_cast<std::size_t>(n) + 1, std::sqrt(problem.x0_var));
    {
        const TimeGrid full{problem.T, n * config.n_steps};
        const PathBundle pilot = simulate(model, basis, full, pilot_paths,
                                          derive_seed(seed, 0x9107, 0), config.n_threads);
        const std::vector<double> x0 =
            sample_x0(problem, pilot_paths, derive_seed(seed, 0x9107, 1));
        std::vector<double> zero_triple_prior; // zero prior
        SolverConfig sweep_cfg = config;
        sweep_cfg.n_paths = pilot_paths;
        const SolutionTriple fwd = decoupled_sweep(
            segment_problem(problem, 0.0, problem.T, problem.phi, problem.lambda0), pilot,
            nullptr, sweep_cfg, x0);
        for (int i = 1; i <= n; ++i) {
            const int k = i * config.n_steps;
            double m = 0.0, v = 0.0;
            for (int p = 0; p < pilot_paths; ++p) m += fwd.x_at(p, k);
            m /= pilot_paths;
            for (int p = 0; p < pilot_paths; ++p) {
                const double d = fwd.x_at(p, k) - m;
                v += d * d;
            }
            part_mean[static_cast<std::size_t>(i)] = m;
            part_sd[static_cast<std::size_t>(i)] = std::sqrt(v / (pilot_paths - 1));
        }
    }

    // Backward stage: intermediate terminal functions G_{n-1}, ..., G_1.
    SolverConfig grid_cfg = config;
    grid_cfg.n_paths = pilot_paths;
    std::vector<TerminalFunction> g_funcs(static_cast<std::size_t>(n) + 1);
    std::function<double(double)> current_terminal = problem.phi;
    double current_lambda0 = problem.lambda0;
    for (int i = n; i >= 2; --i) {
        const double t_begin = problem.T * (i - 1) / n;
        const double half =
            config.x_grid_sds * part_sd[static_cast<std::size_t>(i - 1)] + 0.5;
        const double center = part_mean[static_cast<std::size_t>(i - 1)];
        TerminalFunction g_prev;
        g_prev.xs.resize(static_cast<std::size_t>(config.x_grid_points));
        g_prev.ys.resize(static_cast<std::size_t>(config.x_grid_points));
        const PathBundle seg_bundle =
            simulate(model, basis, seg_grid, pilot_paths,
                     derive_seed(seed, 0xB5EC, static_cast<std::uint64_t>(i)), config.n_threads);
        const FbsdeProblem sub =
            segment_problem(problem, t_begin, seg_T, current_terminal, current_lambda0);
        for (int j = 0; j < config.x_grid_points; ++j) {
            const double x =
                center - half + 2.0 * half * j / (config.x_grid_points - 1);
            const std::vector<double> x0(static_cast<std::size_t>(pilot_paths), x);
            PicardResult pr = picard_solve(sub, seg_bundle, grid_cfg, x0);
            result.total_iterations += pr.iterations;
            g_prev.xs[static_cast<std::size_t>(j)] = x;
            g_prev.ys[static_cast<std::size_t>(j)] = pr.sol.y0;
        }
        const double lip = g_prev.lipschitz_estimate();
        result.max_lipschitz = std::max(result.max_lipschitz, lip);
        if (lip > result.lambda0_bar) result.budget_ok = false;
        g_funcs[static_cast<std::size_t>(i - 1)] = g_prev;
        current_terminal = g_prev;
        current_lambda0 = std::max(lip, 1e-12);
    }

    // Forward stage: stitch the full-horizon solution segment by segment.
    result.sol = zero_triple({problem.T, n * config.n_steps}, config.n_paths,
                             problem.n_channels);
    std::vector<double> x0 = sample_x0(problem, config.n_paths, seed);
    const int K = problem.n_channels;
    for (int i = 1; i <= n; ++i) {
        const double t_begin = problem.T * (i - 1) / n;
        std::function<double(double)> terminal =
            i == n ? problem.phi : std::function<double(double)>(g_funcs[static_cast<std::size_t>(i)]);
        const double lam0 = i == n
            ? problem.lambda0
            : std::max(g_funcs[static_cast<std::size_t>(i)].lipschitz_estimate(), 1e-12);
        const FbsdeProblem sub = segment_problem(problem, t_begin, seg_T, terminal, lam0);
        const PathBundle seg_bundle =
            simulate(model, basis, seg_grid, config.n_paths,
                     derive_seed(seed, 0xF02D, static_cast<std::uint64_t>(i)), config.n_threads);
        PicardResult pr = picard_solve(sub, seg_bundle, config, x0);
        result.total_iterations += pr.iterations;
        if (i == 1) {
            result.sol.y0 = pr.sol.y0;
            result.sol.y0_se = pr.sol.y0_se;
            result.distances = pr.distances;
            result.ratios = pr.ratios;
        }
        const int off = (i - 1) * config.n_steps;
        for (int p = 0; p < config.n_paths; ++p) {
            for (int k = 0; k <= config.n_steps; ++k) {
                // Interior partition knots: keep the later segment's values for
                // X (continuity) and the earlier segment's for Y start points.
                result.sol.X[static_cast<std::size_t>(p) * (n * config.n_steps + 1) + off + k] =
                    pr.sol.x_at(p, k);
                result.sol.Y[static_cast<std::size_t>(p) * (n * config.n_steps + 1) + off + k] =
                    pr.sol.y_at(p, k);
            }
            for (int k = 0; k < config.n_steps; ++k)
                for (int c = 0; c < K; ++c)
                    result.sol.Z[(static_cast<std::size_t>(p) * (n * config.n_steps) + off + k) * K + c] =
                        pr.sol.z_at(p, k, c);
            x0[static_cast<std::size_t>(p)] = pr.sol.x_at(p, config.n_steps);
        }
    }
    return result;
}

} // namespace tfbsde
