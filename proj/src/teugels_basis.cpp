#include "tfbsde/teugels_basis.hpp"

#include "tfbsde/errors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace tfbsde {

namespace {
constexpr int kMaxK = 10;
}

double evaluate_poly(std::span<const double> coeffs, double x) {
    double acc = 0.0;
    for (std::size_t i = coeffs.size(); i-- > 0;) acc = acc * x + coeffs[i];
    return acc;
}

TeugelsBasis build_basis(const MomentTable& moments, int K, double rank_tol) {
    if (K < 1 || K > kMaxK)
        throw std::invalid_argument("build_basis: K must be in [1, " + std::to_string(kMaxK) + "]");
    if (!(rank_tol > 0.0 && rank_tol < 1.0))
        throw std::invalid_argument("build_basis: rank_tol must be in (0, 1)");
    if (static_cast<int>(moments.mu.size()) < 2 * K - 1)
        throw std::invalid_argument("build_basis: moment table too short for requested K");

    const double mu0 = moments.mu[0];
    if (mu0 <= 0.0) throw DegenerateMeasure("build_basis: mu has no mass (mu_0 <= 0)");

    auto gram = [&](int i, int j) { return moments.mu[static_cast<std::size_t>(i + j)]; };

    // Incremental Cholesky of the Hankel matrix G_ij = mu_{i+j}. The pivot at
    // row i is the squared residual norm of x^i against span{1..x^{i-1}}.
    std::vector<std::vector<double>> L;
    int K_eff = K;
    for (int i = 0; i < K; ++i) {
        std::vector<double> row(static_cast<std::size_t>(i) + 1, 0.0);
        for (int j = 0; j < i; ++j) {
            double s = gram(i, j);
            for (int k = 0; k < j; ++k)
                s -= row[static_cast<std::size_t>(k)] * L[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
            row[static_cast<std::size_t>(j)] = s / L[static_cast<std::size_t>(j)][static_cast<std::size_t>(j)];
        }
        double d = gram(i, i);
        for (int k = 0; k < i; ++k) d -= row[static_cast<std::size_t>(k)] * row[static_cast<std::size_t>(k)];
        if (d < rank_tol * mu0) {
            if (d < -rank_tol * mu0)
                throw NumericalBreakdown("build_basis: Hankel matrix indefinite beyond tolerance");
            K_eff = i; // residual within -rank_tol: rank termination, not error
            break;
        }
        row[static_cast<std::size_t>(i)] = std::sqrt(d);
        L.push_back(std::move(row));
    }
    if (K_eff == 0) throw DegenerateMeasure("build_basis: no nondegenerate direction found");

    TeugelsBasis basis;
    basis.K_requested = K;
    basis.K_eff = K_eff;

    // q_i coefficients: rows of L^{-1} by forward substitution, so that
    // q_i(x) = sum_j C_ij x^j with C G C^T = I.
    for (int i = 0; i < K_eff; ++i) {
        std::vector<double> c(static_cast<std::size_t>(i) + 1, 0.0);
        // Row i of L^{-1}: back-substitution on c * L = e_i.
        for (int j = i; j >= 0; --j) {
            double s = (j == i) ? 1.0 : 0.0;
            for (int k = j + 1; k <= i; ++k)
                s -= c[static_cast<std::size_t>(k)] * L[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
            c[static_cast<std::size_t>(j)] = s / L[static_cast<std::size_t>(j)][static_cast<std::size_t>(j)];
        }
        basis.q_polys.push_back(std::move(c));
    }

    for (int i = 0; i < K_eff; ++i) {
        const auto& q = basis.q_polys[static_cast<std::size_t>(i)];
        std::vector<double> p(q.size() + 1, 0.0);
        for (std::size_t j = 0; j < q.size(); ++j) p[j + 1] = q[j];
        basis.p_polys.push_back(std::move(p));
        basis.q_at_zero.push_back(q[0]);
    }

    // a_{i+1, j+1} = coefficient of x^{j+1} in p_{i+1} = coefficient j of q_i.
    basis.a.assign(static_cast<std::size_t>(K_eff),
                   std::vector<double>(static_cast<std::size_t>(K_eff), 0.0));
    for (int i = 0; i < K_eff; ++i)
        for (int j = 0; j <= i; ++j)
            basis.a[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                basis.q_polys[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];

    return basis;
}

double orthonormality_residual(const TeugelsBasis& basis, const MomentTable& moments) {
    double worst = 0.0;
    for (int i = 0; i < basis.K_eff; ++i) {
        for (int j = 0; j <= i; ++j) {
            const auto& qi = basis.q_polys[static_cast<std::size_t>(i)];
            const auto& qj = basis.q_polys[static_cast<std::size_t>(j)];
            double inner = 0.0;
            for (std::size_t k = 0; k < qi.size(); ++k)
                for (std::size_t l = 0; l < qj.size(); ++l)
                    inner += qi[k] * qj[l] * moments.mu[k + l];
            worst = std::max(worst, std::abs(inner - (i == j ? 1.0 : 0.0)));
        }
    }
    return worst;
}

double check_lemma_identity(const TeugelsBasis& basis, const LevyModel& model) {
    const int order = std::max(2 * basis.K_eff + 2, 2);
    const MomentTable table = moments(model, order);
    // Pure nu moments: strip the drift convention from m_1.
    std::vector<double> nu_m = table.m;
    nu_m[1] -= model.drift;

    double worst = 0.0;
    for (int i = 1; i <= basis.K_eff; ++i) {
        for (int j = 1; j <= i; ++j) {
            double inner = 0.0;
            for (int k = 1; k <= i; ++k) {
                const double aik = basis.a[static_cast<std::size_t>(i) - 1][static_cast<std::size_t>(k) - 1];
                if (aik == 0.0) continue;
                for (int l = 1; l <= j; ++l) {
                    const double ajl = basis.a[static_cast<std::size_t>(j) - 1][static_cast<std::size_t>(l) - 1];
                    inner += aik * ajl * nu_m[static_cast<std::size_t>(k + l)];
                }
            }
            // q-orthonormality under mu = x^2 nu + sigma^2 delta_0 leaves the
            // point-mass contribution sigma^2 q_{i-1}(0) q_{j-1}(0) behind.
            const double expected = (i == j ? 1.0 : 0.0) -
                                    model.gaussian_var *
                                        basis.q_at_zero[static_cast<std::size_t>(i) - 1] *
                                        basis.q_at_zero[static_cast<std::size_t>(j) - 1];
            worst = std::max(worst, std::abs(inner - expected));
        }
    }
    return worst;
}

void write_basis(const std::string& path, const TeugelsBasis& basis) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_basis: cannot open " + path);
    char buf[64];
    out << "tfbsde-basis v1\n";
    out << "K_requested " << basis.K_requested << "\n";
    out << "K_eff " << basis.K_eff << "\n";
    for (int i = 0; i < basis.K_eff; ++i) {
        out << "q " << i;
        for (double c : basis.q_polys[static_cast<std::size_t>(i)]) {
            std::snprintf(buf, sizeof(buf), " %.17g", c);
            out << buf;
        }
        out << "\n";
    }
    for (int i = 0; i < basis.K_eff; ++i) {
        out << "a " << i;
        for (double c : basis.a[static_cast<std::size_t>(i)]) {
            std::snprintf(buf, sizeof(buf), " %.17g", c);
            out << buf;
        }
        out << "\n";
    }
    out << "q_at_zero";
    for (double c : basis.q_at_zero) {
        std::snprintf(buf, sizeof(buf), " %.17g", c);
        out << buf;
    }
    out << "\n";
}

TeugelsBasis read_basis(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_basis: cannot open " + path);
    std::string header;
    std::getline(in, header);
    if (header != "tfbsde-basis v1")
        throw std::runtime_error("read_basis: unexpected header '" + header + "'");
    TeugelsBasis basis;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "K_requested") {
            ls >> basis.K_requested;
        } else if (tag == "K_eff") {
            ls >> basis.K_eff;
        } else if (tag == "q") {
            int idx;
            ls >> idx;
            std::vector<double> c;
            double v;
            while (ls >> v) c.push_back(v);
            basis.q_polys.push_back(c);
            std::vector<double> p(c.size() + 1, 0.0);
            for (std::size_t j = 0; j < c.size(); ++j) p[j + 1] = c[j];
            basis.p_polys.push_back(std::move(p));
        } else if (tag == "a") {
            int idx;
            ls >> idx;
            std::vector<double> row;
            double v;
            while (ls >> v) row.push_back(v);
            basis.a.push_back(std::move(row));
        } else if (tag == "q_at_zero") {
            double v;
            while (ls >> v) basis.q_at_zero.push_back(v);
        }
    }
    return basis;
}

} // namespace tfbsde
