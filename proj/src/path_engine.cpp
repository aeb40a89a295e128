#include "tfbsde/path_engine.hpp"

#include "tfbsde/errors.hpp"
#include "tfbsde/parallel.hpp"
#include "tfbsde/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <tuple>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>

namespace tfbsde {

PathBundle simulate(const LevyModel& model, const TeugelsBasis& basis, const TimeGrid& grid,
                    int n_paths, std::uint64_t seed, int n_threads, bool keep_jump_log) {
    if (model.has_density())
        throw UnsupportedMeasure("simulate: density jump measures cannot be simulated; "
                                 "use an atom approximation");
    if (n_paths < 1) throw std::invalid_argument("simulate: n_paths must be positive");
    if (grid.n_steps < 1 || !(grid.horizon > 0.0))
        throw std::invalid_argument("simulate: invalid time grid");

    const int K = basis.K_eff;
    const int n_steps = grid.n_steps;
    const double dt = grid.dt();
    const double sigma = std::sqrt(model.gaussian_var);

    // Jump-measure moments m_j = sum alpha_j beta_j^j, exact for atoms.
    std::vector<double> nu_m(static_cast<std::size_t>(K) + 1, 0.0);
    for (const auto& atom : model.atoms) {
        double p = atom.location;
        for (int j = 1; j <= K; ++j) {
            nu_m[static_cast<std::size_t>(j)] += atom.mass * p;
            p *= atom.location;
        }
    }

    PathBundle bundle;
    bundle.grid = grid;
    bundle.n_paths = n_paths;
    bundle.K_eff = K;
    bundle.seed = seed;
    bundle.dB.assign(static_cast<std::size_t>(n_paths) * n_steps, 0.0);
    bundle.dH.assign(static_cast<std::size_t>(n_paths) * n_steps * K, 0.0);

    std::mutex log_mutex;

    parallel_chunks(static_cast<std::size_t>(n_paths), n_threads, [&](std::size_t p0, std::size_t p1) {
        std::vector<double> power_sum(static_cast<std::size_t>(K) + 1, 0.0);
        std::vector<double> dY(static_cast<std::size_t>(K) + 1, 0.0);
        std::vector<JumpEvent> local_log;
        for (std::size_t p = p0; p < p1; ++p) {
            for (int k = 0; k < n_steps; ++k) {
                StreamRng rng(seed, p, static_cast<std::uint64_t>(k));
                double db = 0.0;
                if (model.gaussian_var > 0.0) db = std::sqrt(dt) * rng.next_normal();
                std::fill(power_sum.begin(), power_sum.end(), 0.0);
                for (const auto& atom : model.atoms) {
                    const long count = rng.next_poisson(atom.mass * dt);
                    if (count == 0) continue;
                    double power = atom.location;
                    for (int j = 1; j <= K; ++j) {
                        power_sum[static_cast<std::size_t>(j)] += count * power;
                        power *= atom.location;
                    }
                    if (keep_jump_log) {
                        for (long c = 0; c < count; ++c)
                            local_log.push_back({static_cast<int>(p), grid.t(k + 1), atom.location});
                    }
                }
                // Compensated power jump increments; the drift of L cancels in
                // Y^(1) because m_1 already contains it.
                for (int j = 1; j <= K; ++j)
                    dY[static_cast<std::size_t>(j)] =
                        power_sum[static_cast<std::size_t>(j)] - dt * nu_m[static_cast<std::size_t>(j)];
                dY[1] += sigma * db;

                const std::size_t base = (p * n_steps + static_cast<std::size_t>(k)) * K;
                bundle.dB[p * n_steps + static_cast<std::size_t>(k)] = db;
                for (int i = 0; i < K; ++i) {
                    double h = 0.0;
                    for (int j = 0; j <= i; ++j)
                        h += basis.a[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] *
                             dY[static_cast<std::size_t>(j) + 1];
                    bundle.dH[base + static_cast<std::size_t>(i)] = h;
                }
            }
        }
        if (keep_jump_log && !local_log.empty()) {
            const std::lock_guard<std::mutex> lock(log_mutex);
            bundle.jump_log.insert(bundle.jump_log.end(), local_log.begin(), local_log.end());
        }
    });

    if (keep_jump_log) {
        std::sort(bundle.jump_log.begin(), bundle.jump_log.end(), [](const JumpEvent& a, const JumpEvent& b) {
            return std::tie(a.path, a.time, a.size) < std::tie(b.path, b.time, b.size);
        });
    }
    return bundle;
}

std::vector<double> terminal_values(const PathBundle& bundle) {
    const int K = bundle.K_eff;
    const int n_steps = bundle.grid.n_steps;
    std::vector<double> hT(static_cast<std::size_t>(bundle.n_paths) * K, 0.0);
    for (int p = 0; p < bundle.n_paths; ++p) {
        for (int k = 0; k < n_steps; ++k) {
            const std::size_t base = (static_cast<std::size_t>(p) * n_steps + k) * K;
            for (int i = 0; i < K; ++i)
                hT[static_cast<std::size_t>(p) * K + i] += bundle.dH[base + static_cast<std::size_t>(i)];
        }
    }
    return hT;
}

BracketReport martingale_diagnostics(const PathBundle& bundle) {
    const int K = bundle.K_eff;
    const int n = bundle.n_paths;
    const double T = bundle.grid.horizon;
    BracketReport report;
    report.K_eff = K;
    report.cov_error.assign(static_cast<std::size_t>(K) * K, 0.0);
    report.z_score.assign(static_cast<std::size_t>(K) * K,
                          std::numeric_limits<double>::quiet_NaN());

    const auto hT = terminal_values(bundle);
    std::vector<double> mean(static_cast<std::size_t>(K), 0.0);
    for (int p = 0; p < n; ++p)
        for (int i = 0; i < K; ++i) mean[static_cast<std::size_t>(i)] += hT[static_cast<std::size_t>(p) * K + i];
    for (auto& v : mean) v /= n;

    for (int i = 0; i < K; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = 0.0, s2 = 0.0;
            for (int p = 0; p < n; ++p) {
                const double u = hT[static_cast<std::size_t>(p) * K + i] - mean[static_cast<std::size_t>(i)];
                const double v = hT[static_cast<std::size_t>(p) * K + j] - mean[static_cast<std::size_t>(j)];
                s += u * v;
                s2 += u * v * u * v;
            }
            const double target = (i == j) ? T : 0.0;
            double cov = std::numeric_limits<double>::quiet_NaN();
            double z = std::numeric_limits<double>::quiet_NaN();
            if (n > 1) {
                cov = s / (n - 1);
                const double var_uv = s2 / n - (s / n) * (s / n);
                const double se = std::sqrt(std::max(var_uv, 0.0) / n);
                if (se > 0.0) z = (cov - target) / se;
            }
            const double err = cov - target;
            report.cov_error[static_cast<std::size_t>(i) * K + j] = err;
            report.cov_error[static_cast<std::size_t>(j) * K + i] = err;
            report.z_score[static_cast<std::size_t>(i) * K + j] = z;
            report.z_score[static_cast<std::size_t>(j) * K + i] = z;
            if (std::isfinite(z)) report.max_abs_z = std::max(report.max_abs_z, std::abs(z));
        }
    }
    return report;
}

void write_bundle(const std::string& path, const PathBundle& bundle) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_bundle: cannot open " + path);
    char buf[96];
    std::snprintf(buf, sizeof(buf), "# tfbsde-bundle v1 seed=%llu T=%.17g n_steps=%d n_paths=%d K_eff=%d\n",
                  static_cast<unsigned long long>(bundle.seed), bundle.grid.horizon,
                  bundle.grid.n_steps, bundle.n_paths, bundle.K_eff);
    out << buf;
    out << "path,step,channel,value\n";
    for (int p = 0; p < bundle.n_paths; ++p) {
        for (int k = 0; k < bundle.grid.n_steps; ++k) {
            std::snprintf(buf, sizeof(buf), "%d,%d,0,%.17g\n", p, k,
                          bundle.dB[static_cast<std::size_t>(p) * bundle.grid.n_steps + k]);
            out << buf;
            for (int i = 0; i < bundle.K_eff; ++i) {
                std::snprintf(buf, sizeof(buf), "%d,%d,%d,%.17g\n", p, k, i + 1, bundle.dH_at(p, k, i));
                out << buf;
            }
        }
    }
}

PathBundle read_bundle(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_bundle: cannot open " + path);
    std::string header;
    std::getline(in, header);
    PathBundle bundle;
    {
        unsigned long long seed = 0;
        double T = 0;
        int n_steps = 0, n_paths = 0, k_eff = 0;
        if (std::sscanf(header.c_str(), "# tfbsde-bundle v1 seed=%llu T=%lg n_steps=%d n_paths=%d K_eff=%d",
                        &seed, &T, &n_steps, &n_paths, &k_eff) != 5)
            throw std::runtime_error("read_bundle: bad header '" + header + "'");
        bundle.seed = seed;
        bundle.grid = {T, n_steps};
        bundle.n_paths = n_paths;
        bundle.K_eff = k_eff;
    }
    bundle.dB.assign(static_cast<std::size_t>(bundle.n_paths) * bundle.grid.n_steps, 0.0);
    bundle.dH.assign(static_cast<std::size_t>(bundle.n_paths) * bundle.grid.n_steps * bundle.K_eff, 0.0);
    std::string line;
    std::getline(in, line); // column names
    while (std::getline(in, line)) {
        int p, k, ch;
        double v;
        if (std::sscanf(line.c_str(), "%d,%d,%d,%lg", &p, &k, &ch, &v) != 4) continue;
        if (ch == 0)
            bundle.dB[static_cast<std::size_t>(p) * bundle.grid.n_steps + k] = v;
        else
            bundle.dH[(static_cast<std::size_t>(p) * bundle.grid.n_steps + k) * bundle.K_eff + ch - 1] = v;
    }
    return bundle;
}

PathBundle slice_bundle(const PathBundle& bundle, int step_begin, int step_count) {
    if (step_begin < 0 || step_begin + step_count > bundle.grid.n_steps)
        throw std::invalid_argument("slice_bundle: step range out of bounds");
    PathBundle out;
    out.grid = {bundle.grid.dt() * step_count, step_count};
    out.n_paths = bundle.n_paths;
    out.K_eff = bundle.K_eff;
    out.seed = bundle.seed;
    out.step_offset = bundle.step_offset + step_begin;
    out.dB.resize(static_cast<std::size_t>(out.n_paths) * step_count);
    out.dH.resize(static_cast<std::size_t>(out.n_paths) * step_count * out.K_eff);
    for (int p = 0; p < out.n_paths; ++p) {
        for (int k = 0; k < step_count; ++k) {
            out.dB[static_cast<std::size_t>(p) * step_count + k] =
                bundle.dB[static_cast<std::size_t>(p) * bundle.grid.n_steps + step_begin + k];
            const std::size_t src = (static_cast<std::size_t>(p) * bundle.grid.n_steps + step_begin + k) *
                                    bundle.K_eff;
            const std::size_t dst = (static_cast<std::size_t>(p) * step_count + k) * out.K_eff;
            for (int i = 0; i < out.K_eff; ++i)
                out.dH[dst + static_cast<std::size_t>(i)] = bundle.dH[src + static_cast<std::size_t>(i)];
        }
    }
    return out;
}

} // namespace tfbsde
