#include "tfbsde/levy_model.hpp"

#include "tfbsde/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace tfbsde {

namespace {

double simpson(const std::function<double(double)>& f, double a, double b, double fa,
               double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive_step(const std::function<double(double)>& f, double a, double b, double fa,
                     double fm, double fb, double whole, double tol, int depth, int max_depth) {
    if (depth >= max_depth)
        throw QuadratureFailure("adaptive quadrature: subdivision depth exceeded on [" +
                                std::to_string(a) + ", " + std::to_string(b) + "]");
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    if (!std::isfinite(flm) || !std::isfinite(frm))
        throw QuadratureFailure("adaptive quadrature: non-finite integrand");
    const double left = simpson(f, a, m, fa, flm, fm);
    const double right = simpson(f, m, b, fm, frm, fb);
    const double err = left + right - whole;
    if (std::abs(err) <= 15.0 * tol) return left + right + err / 15.0;
    return adaptive_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1, max_depth) +
           adaptive_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1, max_depth);
}

double density_integral(const LevyModel& model, const std::function<double(double)>& g,
                        double rel_tol = 1e-10) {
    if (!model.has_density()) return 0.0;
    double total = 0.0;
    for (const auto& [lo, hi] : model.support) {
        auto integrand = [&](double z) { return g(z) * model.density(z); };
        // Absolute tolerance seeded from a coarse scale estimate of the piece.
        const double coarse =
            std::abs(integrand(lo) + 4.0 * integrand(0.5 * (lo + hi)) + integrand(hi)) *
            (hi - lo) / 6.0;
        const double tol = std::max(coarse, 1.0) * rel_tol;
        total += adaptive_quadrature(integrand, lo, hi, tol > 0 ? tol : rel_tol, 60);
    }
    return total;
}

} // namespace

double adaptive_quadrature(const std::function<double(double)>& f, double a, double b,
                           double rel_tol, int max_depth) {
    if (!(b > a)) return 0.0;
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    if (!std::isfinite(fa) || !std::isfinite(fm) || !std::isfinite(fb))
        throw QuadratureFailure("adaptive quadrature: non-finite integrand at endpoints");
    const double whole = simpson(f, a, b, fa, fm, fb);
    return adaptive_step(f, a, b, fa, fm, fb, whole, rel_tol, 0, max_depth);
}

ValidationReport validate_model(const LevyModel& model) {
    ValidationReport report;
    std::ostringstream detail;

    if (model.gaussian_var < 0.0) {
        report.atoms_ok = false;
        detail << "gaussian_var must be nonnegative; ";
    }
    if (model.exp_moment_alpha <= 0.0) {
        report.atoms_ok = false;
        detail << "exp_moment_alpha must be positive; ";
    }
    std::set<double> locations;
    for (const auto& atom : model.atoms) {
        if (atom.mass <= 0.0) {
            report.atoms_ok = false;
            detail << "atom mass must be strictly positive; ";
        }
        if (atom.location == 0.0) {
            report.atoms_ok = false;
            detail << "atom location must be nonzero; ";
        }
        if (!locations.insert(atom.location).second) {
            report.atoms_ok = false;
            detail << "atom locations must be distinct; ";
        }
    }
    if (model.has_density()) {
        for (const auto& [lo, hi] : model.support) {
            if (!(hi > lo)) {
                report.atoms_ok = false;
                detail << "density support interval must be nondegenerate; ";
            }
            if (lo <= 0.0 && hi >= 0.0) {
                report.atoms_ok = false;
                detail << "density support must exclude a neighborhood of 0; ";
            }
        }
    }

    const double alpha = model.exp_moment_alpha;
    for (const auto& atom : model.atoms) {
        const double z = atom.location;
        report.square_integral += atom.mass * std::min(1.0, z * z);
        report.exp_tail_integral += atom.mass * std::exp(alpha * std::abs(z));
    }
    constexpr double kDivergenceGuard = 1e100;
    try {
        report.square_integral +=
            density_integral(model, [](double z) { return std::min(1.0, z * z); });
        report.exp_tail_integral += density_integral(
            model, [alpha](double z) { return std::exp(alpha * std::abs(z)); });
    } catch (const QuadratureFailure& e) {
        report.square_integrable = false;
        report.exp_tail_ok = false;
        detail << e.what() << "; ";
    }
    if (!std::isfinite(report.square_integral) || report.square_integral >= kDivergenceGuard) {
        report.square_integrable = false;
        detail << "int (1 ^ z^2) nu(dz) diverges; ";
    }
    if (!std::isfinite(report.exp_tail_integral) || report.exp_tail_integral >= kDivergenceGuard) {
        report.exp_tail_ok = false;
        detail << "int e^{alpha|z|} nu(dz) diverges at alpha=" << alpha << "; ";
    }
    report.detail = detail.str();
    return report;
}

void require_valid(const LevyModel& model) {
    const auto report = validate_model(model);
    if (!report.atoms_ok) throw std::invalid_argument("invalid Levy model: " + report.detail);
    if (!report.square_integrable)
        throw NonIntegrableMeasure("condition (i) fails: " + report.detail);
    if (!report.exp_tail_ok)
        throw ExponentialTailViolation("condition (ii) fails: " + report.detail);
}

MomentTable moments(const LevyModel& model, int order) {
    if (order < 2) throw std::invalid_argument("moments: order must be >= 2");
    MomentTable table;
    table.gaussian_var = model.gaussian_var;
    table.m.assign(static_cast<std::size_t>(order) + 1, 0.0);

    for (const auto& atom : model.atoms) {
        double p = atom.location;
        for (int i = 1; i <= order; ++i) {
            table.m[static_cast<std::size_t>(i)] += atom.mass * p;
            p *= atom.location;
        }
    }
    if (model.has_density()) {
        for (int i = 1; i <= order; ++i) {
            table.m[static_cast<std::size_t>(i)] +=
                density_integral(model, [i](double z) { return std::pow(z, i); });
        }
    }
    // m_1 is E[L_1] = drift + int z nu(dz); higher moments are pure nu moments.
    table.m[1] += model.drift;

    table.mu.assign(static_cast<std::size_t>(order) - 1, 0.0);
    table.mu[0] = table.m[2] + model.gaussian_var;
    for (int k = 1; k <= order - 2; ++k)
        table.mu[static_cast<std::size_t>(k)] = table.m[static_cast<std::size_t>(k) + 2];
    return table;
}

LevyModel with_exp_tail_density(LevyModel model, double scale, double band_lo, double band_hi) {
    if (!(band_hi > band_lo) || band_lo <= 0.0)
        throw std::invalid_argument("exp_tail: need 0 < band_lo < band_hi");
    model.density = [scale](double z) { return scale * std::exp(-std::abs(z)); };
    model.support = {{-band_hi, -band_lo}, {band_lo, band_hi}};
    return model;
}

LevyModel with_uniform_band_density(LevyModel model, double level, double lo, double hi) {
    if (!(hi > lo)) throw std::invalid_argument("uniform_band: need lo < hi");
    model.density = [level](double) { return level; };
    model.support = {{lo, hi}};
    return model;
}

} // namespace tfbsde
