#pragma once

#include "tfbsde/levy_model.hpp"

#include <span>
#include <string>
#include <vector>

namespace tfbsde {

/// Orthonormal polynomial basis for the measure mu(dx) = x^2 nu(dx) +
/// sigma^2 delta_0(dx), plus the lower-triangular map a from compensated
/// power jump processes to the orthonormal martingales H^i.
struct TeugelsBasis {
    int K_requested = 0;
    int K_eff = 0;
    std::vector<std::vector<double>> q_polys; // q_polys[i]: coeffs of q_i, degree i
    std::vector<std::vector<double>> p_polys; // p_polys[i]: coeffs of p_{i+1} = x q_i
    std::vector<std::vector<double>> a;       // a[i][j] (0-based) = a_{i+1,j+1}
    std::vector<double> q_at_zero;            // q_i(0)
};

/// Horner evaluation of a coefficient vector (ascending powers).
double evaluate_poly(std::span<const double> coeffs, double x);

/// Gram-Schmidt on {1, x, ..., x^{K-1}} under <p,q> = int p q dmu, realized as
/// an incremental Cholesky of the Hankel moment matrix. Residual norms below
/// rank_tol * mu_0 terminate the basis at K_eff.
TeugelsBasis build_basis(const MomentTable& moments, int K, double rank_tol = 1e-12);

/// max_{i,j} |int q_i q_j dmu - delta_ij| from the moment table.
double orthonormality_residual(const TeugelsBasis& basis, const MomentTable& moments);

/// max_{i,j} |int p_i p_j dnu - (delta_ij - sigma^2 q_{i-1}(0) q_{j-1}(0))|.
double check_lemma_identity(const TeugelsBasis& basis, const LevyModel& model);

/// Versioned text export consumed by path replay and external scripts.
void write_basis(const std::string& path, const TeugelsBasis& basis);
TeugelsBasis read_basis(const std::string& path);

} // namespace tfbsde
