#include "tfbsde/fbsde_problem.hpp"

#include "tfbsde/errors.hpp"
#include "tfbsde/rng.hpp"

#include <algorithm>
#include <cmath>

namespace tfbsde {

SolutionTriple zero_triple(const TimeGrid& grid, int n_paths, int n_channels) {
    SolutionTriple sol;
    sol.grid = grid;
    sol.n_paths = n_paths;
    sol.n_channels = n_channels;
    sol.X.assign(static_cast<std::size_t>(n_paths) * (grid.n_steps + 1), 0.0);
    sol.Y.assign(static_cast<std::size_t>(n_paths) * (grid.n_steps + 1), 0.0);
    sol.Z.assign(static_cast<std::size_t>(n_paths) * grid.n_steps * n_channels, 0.0);
    sol.rollout.assign(static_cast<std::size_t>(n_paths), 0.0);
    return sol;
}

double check_V0(const FbsdeProblem& problem, int n_quad) {
    if (n_quad < 2) n_quad = 2;
    if (n_quad % 2 != 0) ++n_quad;
    const int K = problem.n_channels;
    std::vector<double> zero_z(static_cast<std::size_t>(K), 0.0);
    std::vector<double> sig(static_cast<std::size_t>(K), 0.0);

    auto integrand = [&](double t) {
        const double fv = problem.f(t, 0.0, 0.0, zero_z);
        const double gv = problem.g(t, 0.0, 0.0, zero_z);
        std::fill(sig.begin(), sig.end(), 0.0);
        problem.sigma(t, 0.0, 0.0, sig);
        double s2 = 0.0;
        for (double s : sig) s2 += s * s;
        return fv * fv + s2 + gv * gv;
    };

    const double h = problem.T / n_quad;
    double integral = integrand(0.0) + integrand(problem.T);
    for (int k = 1; k < n_quad; ++k) integral += (k % 2 ? 4.0 : 2.0) * integrand(k * h);
    integral *= h / 3.0;

    const double ex0_sq = problem.x0_mean * problem.x0_mean + problem.x0_var;
    const double phi0 = problem.phi(0.0);
    const double v0_sq = ex0_sq + phi0 * phi0 + integral;
    if (!std::isfinite(v0_sq)) throw NonFiniteData("check_V0: non-finite data norm");
    return std::sqrt(v0_sq);
}

namespace {

struct Probe {
    double t, x, y;
    std::vector<double> z;
};

Probe make_probe(StreamRng& rng, double T, int K) {
    Probe p;
    p.t = T * rng.next_uniform();
    p.x = 2.0 * rng.next_normal();
    p.y = 2.0 * rng.next_normal();
    p.z.resize(static_cast<std::size_t>(K));
    for (auto& v : p.z) v = 2.0 * rng.next_normal();
    return p;
}

} // namespace

H2Report check_H2(const FbsdeProblem& problem, int probes, double fd_step, std::uint64_t seed) {
    const int K = problem.n_channels;
    H2Report report;
    report.tol = 1e-6 + 10.0 * fd_step * fd_step;

    std::vector<double> sig_plus(static_cast<std::size_t>(K)), sig_minus(static_cast<std::size_t>(K));
    for (int n = 0; n < probes; ++n) {
        StreamRng rng(seed, static_cast<std::uint64_t>(n), 0x48320000ULL);
        Probe p = make_probe(rng, problem.T, K);

        auto central_f = [&](auto&& bump) {
            auto hi = p, lo = p;
            bump(hi, fd_step);
            bump(lo, -fd_step);
            return (problem.f(hi.t, hi.x, hi.y, hi.z) - problem.f(lo.t, lo.x, lo.y, lo.z)) /
                   (2.0 * fd_step);
        };
        auto central_g = [&](auto&& bump) {
            auto hi = p, lo = p;
            bump(hi, fd_step);
            bump(lo, -fd_step);
            return (problem.g(hi.t, hi.x, hi.y, hi.z) - problem.g(lo.t, lo.x, lo.y, lo.z)) /
                   (2.0 * fd_step);
        };

        const double f_y = central_f([](Probe& q, double h) { q.y += h; });
        std::vector<double> f_z(static_cast<std::size_t>(K)), g_z(static_cast<std::size_t>(K));
        for (int i = 0; i < K; ++i) {
            f_z[static_cast<std::size_t>(i)] =
                central_f([i](Probe& q, double h) { q.z[static_cast<std::size_t>(i)] += h; });
            g_z[static_cast<std::size_t>(i)] =
                central_g([i](Probe& q, double h) { q.z[static_cast<std::size_t>(i)] += h; });
        }

        std::vector<double> sigma_x(static_cast<std::size_t>(K)), sigma_y(static_cast<std::size_t>(K));
        problem.sigma(p.t, p.x + fd_step, p.y, sig_plus);
        problem.sigma(p.t, p.x - fd_step, p.y, sig_minus);
        for (int i = 0; i < K; ++i)
            sigma_x[static_cast<std::size_t>(i)] =
                (sig_plus[static_cast<std::size_t>(i)] - sig_minus[static_cast<std::size_t>(i)]) /
                (2.0 * fd_step);
        problem.sigma(p.t, p.x, p.y + fd_step, sig_plus);
        problem.sigma(p.t, p.x, p.y - fd_step, sig_minus);
        for (int i = 0; i < K; ++i)
            sigma_y[static_cast<std::size_t>(i)] =
                (sig_plus[static_cast<std::size_t>(i)] - sig_minus[static_cast<std::size_t>(i)]) /
                (2.0 * fd_step);

        // Conservative componentwise reading of sigma_y f_z = 0.
        for (int i = 0; i < K; ++i)
            for (int j = 0; j < K; ++j)
                report.max_product_residual =
                    std::max(report.max_product_residual,
                             std::abs(sigma_y[static_cast<std::size_t>(i)] * f_z[static_cast<std::size_t>(j)]));

        double sum = f_y;
        for (int i = 0; i < K; ++i)
            sum += sigma_x[static_cast<std::size_t>(i)] * f_z[static_cast<std::size_t>(i)] +
                   sigma_y[static_cast<std::size_t>(i)] * g_z[static_cast<std::size_t>(i)];
        report.max_sum_residual = std::max(report.max_sum_residual, std::abs(sum));
    }
    report.pass =
        report.max_product_residual <= report.tol && report.max_sum_residual <= report.tol;
    return report;
}

double lipschitz_audit(const FbsdeProblem& problem, int probes, std::uint64_t seed) {
    const int K = problem.n_channels;
    double worst = 0.0;
    std::vector<double> s1(static_cast<std::size_t>(K)), s2(static_cast<std::size_t>(K));
    for (int n = 0; n < probes; ++n) {
        StreamRng rng(seed, static_cast<std::uint64_t>(n), 0x11958000ULL);
        Probe a = make_probe(rng, problem.T, K);
        Probe b = make_probe(rng, problem.T, K);
        b.t = a.t; // (H1) is uniform in t; compare at a common time

        double dx = std::abs(a.x - b.x), dy = std::abs(a.y - b.y), dz2 = 0.0;
        for (int i = 0; i < K; ++i) {
            const double d = a.z[static_cast<std::size_t>(i)] - b.z[static_cast<std::size_t>(i)];
            dz2 += d * d;
        }
        const double lin = dx + dy + std::sqrt(dz2);
        if (lin > 0.0 && problem.lambda > 0.0) {
            const double df = std::abs(problem.f(a.t, a.x, a.y, a.z) - problem.f(b.t, b.x, b.y, b.z));
            const double dg = std::abs(problem.g(a.t, a.x, a.y, a.z) - problem.g(b.t, b.x, b.y, b.z));
            worst = std::max(worst, df / (problem.lambda * lin));
            worst = std::max(worst, dg / (problem.lambda * lin));
        }
        const double quad = dx * dx + dy * dy;
        if (quad > 0.0 && problem.lambda > 0.0) {
            problem.sigma(a.t, a.x, a.y, s1);
            problem.sigma(a.t, b.x, b.y, s2);
            double ds2 = 0.0;
            for (int i = 0; i < K; ++i) {
                const double d = s1[static_cast<std::size_t>(i)] - s2[static_cast<std::size_t>(i)];
                ds2 += d * d;
            }
            worst = std::max(worst, std::sqrt(ds2 / (problem.lambda * problem.lambda * quad)));
        }
        if (dx > 0.0 && problem.lambda0 > 0.0) {
            const double dphi = std::abs(problem.phi(a.x) - problem.phi(b.x));
            worst = std::max(worst, dphi / (problem.lambda0 * dx));
        }
    }
    return worst;
}

double solution_norm(const SolutionTriple& sol) {
    const auto per_path = m2_per_path(sol, zero_triple(sol.grid, sol.n_paths, sol.n_channels));
    double mean = 0.0;
    for (double v : per_path) mean += v;
    return std::sqrt(mean / sol.n_paths);
}

std::vector<double> m2_per_path(const SolutionTriple& a, const SolutionTriple& b) {
    if (!(a.grid == b.grid) || a.n_paths != b.n_paths || a.n_channels != b.n_channels)
        throw GridMismatch("m2: triples live on different grids");
    const int n_steps = a.grid.n_steps;
    const double dt = a.grid.dt();
    std::vector<double> out(static_cast<std::size_t>(a.n_paths), 0.0);
    for (int p = 0; p < a.n_paths; ++p) {
        double sup_x = 0.0, sup_y = 0.0, z_int = 0.0;
        for (int k = 0; k <= n_steps; ++k) {
            const double dx = a.x_at(p, k) - b.x_at(p, k);
            const double dy = a.y_at(p, k) - b.y_at(p, k);
            sup_x = std::max(sup_x, dx * dx);
            sup_y = std::max(sup_y, dy * dy);
        }
        for (int k = 0; k < n_steps; ++k) {
            double z2 = 0.0;
            for (int i = 0; i < a.n_channels; ++i) {
                const double dz = a.z_at(p, k, i) - b.z_at(p, k, i);
                z2 += dz * dz;
            }
            z_int += z2 * dt;
        }
        out[static_cast<std::size_t>(p)] = sup_x + sup_y + z_int;
    }
    return out;
}

double m2_distance(const SolutionTriple& a, const SolutionTriple& b) {
    const auto per_path = m2_per_path(a, b);
    double mean = 0.0;
    for (double v : per_path) mean += v;
    return std::sqrt(mean / a.n_paths);
}

} // namespace tfbsde
