#pragma once

#include "nustab/model.hpp"

namespace nustab {

/// Singular values of the projected map P_hat * F_hat, ascending. These
/// are the floor of what any state feedback can achieve: the first m are
/// zero, the rest bound the assignable spectrum from below.
struct ResidualSpectrum {
    Vector a;  // ascending
    Index m = 0;

    [[nodiscard]] Index n() const { return a.size(); }
    [[nodiscard]] double max() const { return a.size() ? a(a.size() - 1) : 0.0; }
};

/// Desired closed-loop singular values with the interlacing witness.
struct TargetSpectrum {
    Vector s;           // ascending, nonnegative
    bool feasible = false;
    Index first_violation = -1;  // 1-based index of the first violated inequality, -1 if none
};

/// Orthogonal projector onto the complement of the input range:
/// P = I - G (G^T G)^-1 G^T. Throws RankError when cond(G^T G) > 1e12.
Matrix projector(const Matrix& G_hat);

/// Singular values of projector(G_hat) * F_hat, ascending.
ResidualSpectrum residual_spectrum(const Matrix& F_hat, const Matrix& G_hat);

/// Interlacing feasibility: a_j <= s_j <= a_{j+m} for every j, with
/// a_j = +inf for j > n. Equality counts as feasible.
TargetSpectrum check_feasibility(const ResidualSpectrum& a, const Vector& s);

/// Midpoint-with-margin target selection below the contraction threshold.
/// Requires a.max() < gamma; throws InfeasibleAtPeriodError otherwise.
TargetSpectrum select_targets(const ResidualSpectrum& a, double gamma,
                              double theta = 0.5, double margin = 0.02);

/// Inverse eigenvalue kernel: weights w >= 0 such that diag(lambda) + w w^T
/// has eigenvalues mu, given single-step interlacing
/// lambda_j <= mu_j <= lambda_{j+1}. Result is verified by an eigensolve.
Vector rank_one_raise(const Vector& lambda, const Vector& mu);

/// Feedback K_hat such that the singular values of F_hat + G_hat K_hat are
/// target.s. Built from the projector split and m sequential rank-one
/// symmetric inverse-eigenvalue updates; the achieved spectrum is
/// re-verified on every call.
Matrix assign_singular_values(const Matrix& F_hat, const Matrix& G_hat,
                              const TargetSpectrum& target);

/// Back to original coordinates: K_k = K_hat * T_inv.
Matrix gain_in_original_coordinates(const Matrix& K_hat, const DesignCertificate& cert);

} // namespace nustab
