#pragma once

#include "tfbsde/levy_model.hpp"
#include "tfbsde/teugels_basis.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tfbsde {

struct TimeGrid {
    double horizon = 1.0;
    int n_steps = 100;

    double dt() const { return horizon / n_steps; }
    double t(int k) const { return horizon * k / n_steps; }
    bool operator==(const TimeGrid&) const = default;
};

struct JumpEvent {
    int path;
    double time;
    double size;
};

/// Per-path, per-step increments of the driving Brownian motion and of the
/// orthonormal martingales H^i. Compensators are subtracted analytically, so
/// every increment has mean zero by construction.
struct PathBundle {
    TimeGrid grid;
    int n_paths = 0;
    int K_eff = 0;
    std::uint64_t seed = 0;
    int step_offset = 0; // provenance when sliced from a longer bundle

    std::vector<double> dB; // [p * n_steps + k]
    std::vector<double> dH; // [(p * n_steps + k) * K_eff + i]
    std::vector<JumpEvent> jump_log; // populated only when requested

    double dH_at(int p, int k, int i) const {
        return dH[(static_cast<std::size_t>(p) * grid.n_steps + k) * K_eff + i];
    }
};

/// Simulates n_paths Levy paths and their Teugels increments. Finite-activity
/// models only (Gaussian part + atoms); density jumps are not simulatable.
/// Deterministic in (model, basis, grid, n_paths, seed) for any thread count.
PathBundle simulate(const LevyModel& model, const TeugelsBasis& basis, const TimeGrid& grid,
                    int n_paths, std::uint64_t seed, int n_threads = 1,
                    bool keep_jump_log = false);

/// Terminal values H^i_T per path (row-major [p * K_eff + i]).
std::vector<double> terminal_values(const PathBundle& bundle);

struct BracketReport {
    int K_eff = 0;
    std::vector<double> cov_error; // [i * K_eff + j]: Cov(H^i_T, H^j_T) - delta_ij T
    std::vector<double> z_score;   // same layout; NaN when undefined
    double max_abs_z = 0.0;
};

/// Sample covariance of the terminal martingale values against delta_ij * T.
BracketReport martingale_diagnostics(const PathBundle& bundle);

/// Flat CSV export (path, step, channel, value) with a replay header.
/// Channel 0 is dB, channels 1..K_eff are dH^i.
void write_bundle(const std::string& path, const PathBundle& bundle);
PathBundle read_bundle(const std::string& path);

/// View of steps [step_begin, step_begin + step_count) as a standalone bundle.
PathBundle slice_bundle(const PathBundle& bundle, int step_begin, int step_count);

} // namespace tfbsde
