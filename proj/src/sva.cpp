#include "nustab/sva.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "nustab/numfmt.hpp"

namespace nustab {

namespace {

constexpr double kGramCondLimit = 1e12;
constexpr double kDeflationRel = 1e-12;
constexpr double kRaisePostTolRel = 1e-9;
constexpr double kAssignPostTolRel = 1e-8;

/// Flip eigenvector columns so the first nonzero component is positive.
/// Keeps repeated decompositions bit-identical.
void canonicalize_columns(Matrix& V) {
    for (Index j = 0; j < V.cols(); ++j) {
        const double max_abs = V.col(j).cwiseAbs().maxCoeff();
        if (max_abs == 0.0) continue;
        for (Index i = 0; i < V.rows(); ++i) {
            if (std::abs(V(i, j)) > 1e-12 * max_abs) {
                if (V(i, j) < 0.0) V.col(j) = -V.col(j);
                break;
            }
        }
    }
}

Vector ascending_singular_values(const Matrix& M) {
    Eigen::JacobiSVD<Matrix> svd(M);
    Vector sv = svd.singularValues();  // descending
    return sv.reverse();
}

} // namespace

Matrix projector(const Matrix& G_hat) {
    const Index n = G_hat.rows();
    const Index m = G_hat.cols();
    if (m < 1 || m > n) throw DimensionError("projector: G must be n x m with 1 <= m <= n");

    Eigen::JacobiSVD<Matrix> svd(G_hat, Eigen::ComputeFullU);
    const auto& sv = svd.singularValues();
    const double smin = sv(m - 1);
    // cond(G^T G) = (sigma_1 / sigma_m)^2
    if (smin == 0.0 || (sv(0) / smin) * (sv(0) / smin) > kGramCondLimit) {
        throw RankError("projector: G^T G condition number exceeds 1e12 (G rank-deficient)");
    }
    if (m == n) {
        return Matrix::Zero(n, n);  // full input authority: the complement is trivial
    }
    const Matrix U1 = svd.matrixU().leftCols(m);
    Matrix P = Matrix::Identity(n, n) - U1 * U1.transpose();
    P = 0.5 * (P + P.transpose());
    return P;
}

ResidualSpectrum residual_spectrum(const Matrix& F_hat, const Matrix& G_hat) {
    const Matrix P = projector(G_hat);
    ResidualSpectrum out;
    out.a = ascending_singular_values(P * F_hat);
    out.m = G_hat.cols();
    return out;
}

TargetSpectrum check_feasibility(const ResidualSpectrum& a, const Vector& s) {
    const Index n = a.n();
    const Index m = a.m;
    if (s.size() != n) throw DimensionError("check_feasibility: target size must equal n");
    for (Index j = 0; j < n; ++j) {
        if (s(j) < 0.0) throw DimensionError("check_feasibility: targets must be nonnegative");
        if (j > 0 && s(j) < s(j - 1)) {
            throw DimensionError("check_feasibility: targets must be ascending");
        }
    }
    TargetSpectrum out;
    out.s = s;
    out.feasible = true;
    out.first_violation = -1;
    for (Index j = 0; j < n; ++j) {
        const double lower = a.a(j);
        const double upper =
            (j + m < n) ? a.a(j + m) : std::numeric_limits<double>::infinity();
        if (!(s(j) >= lower && s(j) <= upper)) {
            out.feasible = false;
            out.first_violation = j + 1;  // 1-based, matching a_j <= s_j <= a_{j+m}
            break;
        }
    }
    return out;
}

TargetSpectrum select_targets(const ResidualSpectrum& a, double gamma,
                              double theta, double margin) {
    const Index n = a.n();
    const Index m = a.m;
    if (!(gamma > 0.0 && gamma <= 1.0)) throw DimensionError("select_targets: gamma must be in (0, 1]");
    if (!(theta > 0.0 && theta < 1.0)) throw DimensionError("select_targets: theta must be in (0, 1)");
    if (!(margin >= 0.0 && margin < 1.0)) throw DimensionError("select_targets: margin must be in [0, 1)");
    if (!(a.max() < gamma)) {
        throw InfeasibleAtPeriodError("largest residual singular value " +
                                      format_double(a.max(), 6) + " >= gamma " +
                                      format_double(gamma, 6) +
                                      " -- no stabilizing target exists at this period");
    }
    // Upper bound per index: the interlacing ceiling a_{j+m} (or gamma when
    // unbounded), pulled back by the safety margin. Targets sit theta of the
    // way up the band, never below the floor a_j. The running max absorbs
    // last-ulp wobble of the affine formula, which is not exactly monotone
    // in a_j.
    Vector s(n);
    for (Index j = 0; j < n; ++j) {
        const double ceil_j = (j + m < n) ? a.a(j + m) : gamma;
        const double upper = (1.0 - margin) * std::min(ceil_j, gamma);
        s(j) = std::max(a.a(j), a.a(j) + theta * (upper - a.a(j)));
        if (j > 0) s(j) = std::max(s(j), s(j - 1));
    }
    TargetSpectrum out = check_feasibility(a, s);
    if (!out.feasible) {
        throw PostCheckError("select_targets produced an infeasible spectrum (internal error)");
    }
    if (!(out.s(n - 1) < gamma)) {
        throw PostCheckError("select_targets failed to keep s_n below gamma (internal error)");
    }
    return out;
}

Vector rank_one_raise(const Vector& lambda, const Vector& mu) {
    const Index n = lambda.size();
    if (mu.size() != n || n < 1) {
        throw DimensionError("rank_one_raise: lambda and mu must have equal nonzero length");
    }
    double scale = 0.0;
    for (Index i = 0; i < n; ++i) {
        scale = std::max({scale, std::abs(lambda(i)), std::abs(mu(i))});
    }
    const double tol = kDeflationRel * std::max(scale, std::numeric_limits<double>::min());

    // Precondition: single-step interlacing lambda_j <= mu_j <= lambda_{j+1}
    // (tol slack absorbs rounding from upstream eigensolves).
    for (Index j = 0; j < n; ++j) {
        if (j > 0 && lambda(j) < lambda(j - 1) - tol) {
            throw InterlacingError("rank_one_raise: lambda must be ascending");
        }
        const double hi = (j + 1 < n) ? lambda(j + 1) : std::numeric_limits<double>::infinity();
        if (mu(j) < lambda(j) - tol || mu(j) > hi + tol) {
            throw InterlacingError("rank_one_raise: interlacing lambda_j <= mu_j <= lambda_{j+1} violated at j = " +
                                   std::to_string(j + 1));
        }
    }
    // Clamp targets into their bands so the product formula sees exact
    // interlacing even when inputs carry eigensolver noise.
    Vector mu_c = mu;
    for (Index j = 0; j < n; ++j) {
        mu_c(j) = std::max(mu_c(j), lambda(j));
        if (j + 1 < n) mu_c(j) = std::min(mu_c(j), lambda(j + 1));
    }

    // Cluster equal lambdas. Within a group of size r interlacing pins r-1
    // of the mu's to the group value; the highest original index stays
    // active and carries the whole update weight for the group.
    std::vector<Index> active_idx;
    std::vector<double> active_lambda;
    std::vector<double> active_mu;
    for (Index i = 1; i <= n; ++i) {
        if (i == n || lambda(i) - lambda(i - 1) > tol) {
            active_idx.push_back(i - 1);
            active_lambda.push_back(lambda(i - 1));
            active_mu.push_back(mu_c(i - 1));
        }
    }

    const Index p = static_cast<Index>(active_idx.size());
    Vector w = Vector::Zero(n);
    for (Index k = 0; k < p; ++k) {
        // Deflation: a target equal to this lambda keeps it in place.
        bool deflated = false;
        for (Index j = 0; j < p; ++j) {
            if (std::abs(active_mu[j] - active_lambda[k]) <= tol) {
                deflated = true;
                break;
            }
        }
        if (deflated) continue;
        double num = 1.0;
        double den = 1.0;
        for (Index j = 0; j < p; ++j) {
            num *= active_mu[j] - active_lambda[k];
            if (j != k) den *= active_lambda[j] - active_lambda[k];
        }
        w(active_idx[k]) = std::sqrt(std::max(num / den, 0.0));
    }

    // Post-verify: diag(lambda) + w w^T must reproduce mu.
    Matrix check = Matrix(lambda.asDiagonal()) + w * w.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> es(check, Eigen::EigenvaluesOnly);
    const Vector achieved = es.eigenvalues();
    const double post_tol = kRaisePostTolRel * std::max(scale, 1e-300);
    for (Index j = 0; j < n; ++j) {
        if (std::abs(achieved(j) - mu(j)) > post_tol) {
            throw PostCheckError("rank_one_raise post-check failed: achieved eigenvalue " +
                                 format_double(achieved(j), 12) + " vs requested " +
                                 format_double(mu(j), 12));
        }
    }
    return w;
}

Matrix assign_singular_values(const Matrix& F_hat, const Matrix& G_hat,
                              const TargetSpectrum& target) {
    const Index n = F_hat.rows();
    const Index m = G_hat.cols();
    if (F_hat.cols() != n || G_hat.rows() != n) {
        throw DimensionError("assign_singular_values: F must be n x n and G n x m");
    }
    if (target.s.size() != n) {
        throw DimensionError("assign_singular_values: target size must equal n");
    }
    if (!target.feasible) {
        throw InterlacingError("assign_singular_values: target spectrum is infeasible (first violation at j = " +
                               std::to_string(target.first_violation) + ")");
    }

    const Matrix P = projector(G_hat);

    // Gram matrix of the projected map; eigenvalues are the squared
    // residual singular values.
    Matrix C = F_hat.transpose() * P * F_hat;
    C = 0.5 * (C + C.transpose());

    Eigen::SelfAdjointEigenSolver<Matrix> es0(C);
    const Vector lambda0 = es0.eigenvalues();  // ascending

    Vector s2(n);
    for (Index j = 0; j < n; ++j) s2(j) = target.s(j) * target.s(j);

    // Staged spectra nu^(k)_j = max(lambda_j, s2_{j-m+k}); stage m lands on s2.
    auto staged = [&](Index k) {
        Vector nu(n);
        for (Index j = 0; j < n; ++j) {
            const Index si = j - m + k;  // 0-based target index
            nu(j) = (si >= 0) ? std::max(lambda0(j), s2(si)) : lambda0(j);
        }
        return nu;
    };

    Matrix N(m, n);
    Matrix V = es0.eigenvectors();
    canonicalize_columns(V);
    Vector lambda_cur = lambda0;
    for (Index k = 1; k <= m; ++k) {
        const Vector nu = staged(k);
        const Vector w = rank_one_raise(lambda_cur, nu);
        const Vector z = V * w;
        N.row(k - 1) = z.transpose();
        C += z * z.transpose();
        C = 0.5 * (C + C.transpose());
        Eigen::SelfAdjointEigenSolver<Matrix> es(C);
        lambda_cur = es.eigenvalues();
        V = es.eigenvectors();
        canonicalize_columns(V);
    }

    // M = (G^T G)^(-1/2) N via the symmetric eigendecomposition of the Gram.
    const Matrix gram = G_hat.transpose() * G_hat;
    Eigen::SelfAdjointEigenSolver<Matrix> gram_es(0.5 * (gram + gram.transpose()));
    const Vector gev = gram_es.eigenvalues();
    if (!(gev(0) > 0.0) || gev(m - 1) / gev(0) > kGramCondLimit) {
        throw RankError("assign_singular_values: G^T G condition number exceeds 1e12");
    }
    Matrix W = gram_es.eigenvectors();
    canonicalize_columns(W);
    Vector inv_sqrt(m), inv(m);
    for (Index i = 0; i < m; ++i) {
        inv_sqrt(i) = 1.0 / std::sqrt(gev(i));
        inv(i) = 1.0 / gev(i);
    }
    const Matrix gram_inv_sqrt = W * inv_sqrt.asDiagonal() * W.transpose();
    const Matrix gram_inv = W * inv.asDiagonal() * W.transpose();

    const Matrix M = gram_inv_sqrt * N;
    Matrix K_hat = M - gram_inv * G_hat.transpose() * F_hat;

    // Every call re-verifies the achieved spectrum.
    const Vector achieved = ascending_singular_values(F_hat + G_hat * K_hat);
    const double denom =
        std::max({target.s(n - 1), 1e-14 * F_hat.norm(), std::numeric_limits<double>::min()});
    for (Index j = 0; j < n; ++j) {
        if (std::abs(achieved(j) - target.s(j)) > kAssignPostTolRel * denom) {
            throw PostCheckError("assign_singular_values post-check failed at index " +
                                 std::to_string(j + 1) + ": achieved " +
                                 format_double(achieved(j), 12) + " vs target " +
                                 format_double(target.s(j), 12));
        }
    }
    return K_hat;
}

Matrix gain_in_original_coordinates(const Matrix& K_hat, const DesignCertificate& cert) {
    if (K_hat.cols() != cert.T_inv.rows()) {
        throw DimensionError("gain_in_original_coordinates: dimension mismatch");
    }
    return K_hat * cert.T_inv;
}

} // namespace nustab
