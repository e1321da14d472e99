#include "nustab/gain_init.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>

#include "nustab/numfmt.hpp"

namespace nustab {

namespace {

constexpr double kPoleGapRel = 1e-6;
constexpr double kCtrbCondLimit = 1e12;
constexpr double kEigCondLimit = 1e8;
constexpr double kPlacementTol = 1e-7;
constexpr double kRealityTolRel = 1e-8;
constexpr std::uint64_t kInputDirectionSeed = 0x6e757374ull;

double cond2(const Matrix& X) {
    Eigen::JacobiSVD<Matrix> svd(X);
    const auto& sv = svd.singularValues();
    const double smin = sv(sv.size() - 1);
    if (smin == 0.0) return std::numeric_limits<double>::infinity();
    return sv(0) / smin;
}

Matrix controllability_matrix(const Matrix& A, const Vector& b) {
    const Index n = A.rows();
    Matrix C(n, n);
    Vector col = b;
    for (Index k = 0; k < n; ++k) {
        C.col(k) = col;
        col = A * col;
    }
    return C;
}

/// Ackermann's formula for the A + b*k convention:
/// k = -e_n^T C^-1 phi(A) with phi the desired characteristic polynomial.
Vector ackermann(const Matrix& A, const Vector& b, const Vector& poles) {
    const Index n = A.rows();
    const Matrix C = controllability_matrix(A, b);
    if (cond2(C) > kCtrbCondLimit) {
        throw ControllabilityError("controllability matrix condition number exceeds 1e12");
    }
    Matrix phi = Matrix::Identity(n, n);
    for (Index i = 0; i < n; ++i) {
        phi = phi * (A - poles(i) * Matrix::Identity(n, n));
    }
    Vector e_n = Vector::Zero(n);
    e_n(n - 1) = 1.0;
    const Vector w = C.transpose().partialPivLu().solve(e_n);
    return -(phi.transpose() * w);
}

/// Newton polish for the placed gain row. Ackermann's formula loses
/// accuracy through the controllability solve and the polynomial product;
/// a few corrector steps on the eigenvalue equations recover it. The
/// closed loop is evaluated exactly as the post-check evaluates it,
/// A + B (v k^T), so the refinement targets the measured spectrum. The
/// achieved eigenvalues may pass through complex pairs mid-iteration, so
/// the update is solved in complex arithmetic and its real part is taken.
Vector refine_gain(const Matrix& A, const Matrix& B, const Vector& v, const Vector& poles,
                   Vector k) {
    const Index n = A.rows();
    const Vector b = B * v;  // derivative direction
    using CMatrix = Eigen::MatrixXcd;
    using CVector = Eigen::VectorXcd;
    double best_err = std::numeric_limits<double>::infinity();
    Vector best_k = k;
    for (int iter = 0; iter < 6; ++iter) {
        const Matrix K = v * k.transpose();
        Eigen::EigenSolver<Matrix> es(A + B * K, /*computeEigenvectors=*/true);
        CVector lambda = es.eigenvalues();
        CMatrix X = es.eigenvectors();

        // Pair achieved eigenvalues with requested poles by real part.
        std::vector<Index> order(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
        std::sort(order.begin(), order.end(), [&](Index p, Index q) {
            if (lambda(p).real() != lambda(q).real()) return lambda(p).real() < lambda(q).real();
            return lambda(p).imag() < lambda(q).imag();
        });

        double err = 0.0;
        for (Index i = 0; i < n; ++i) {
            const auto l = lambda(order[static_cast<std::size_t>(i)]);
            err = std::max(err, std::abs(l - std::complex<double>(poles(i), 0.0)));
        }
        if (err < best_err) {
            best_err = err;
            best_k = k;
        }
        if (err < 1e-13 * std::max(1.0, poles.cwiseAbs().maxCoeff())) break;

        // dlambda_i = (y_i^H b)(x_i^T dk) / (y_i^H x_i), rows of X^-1 are y_i^H.
        const CMatrix X_inv = X.inverse();
        CMatrix J(n, n);
        CVector rhs(n);
        bool singular = false;
        for (Index i = 0; i < n; ++i) {
            const Index src = order[static_cast<std::size_t>(i)];
            const std::complex<double> yb =
                (X_inv.row(src) * b.cast<std::complex<double>>())(0, 0);
            if (std::abs(yb) < 1e-14) {
                singular = true;
                break;
            }
            J.row(i) = yb * X.col(src).transpose();
            rhs(i) = std::complex<double>(poles(i), 0.0) - lambda(src);
        }
        if (singular) break;
        const CVector dk = J.fullPivLu().solve(rhs);
        k += dk.real();
    }
    return best_k;
}

/// Deterministic sequence of unit input directions used to collapse a
/// multi-input plant onto a single column of B.
Vector input_direction(Index m, int attempt, std::mt19937_64& rng) {
    Vector v(m);
    for (Index i = 0; i < m; ++i) {
        // Box-Muller from 53-bit uniforms keeps the sequence platform-stable.
        double u1 = ((rng() >> 11) + 0.5) * 0x1.0p-53;
        double u2 = (rng() >> 11) * 0x1.0p-53;
        v(i) = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }
    (void)attempt;
    double norm = v.norm();
    if (norm == 0.0) {
        v.setZero();
        v(0) = 1.0;
        norm = 1.0;
    }
    return v / norm;
}

std::string spectrum_to_string(const Eigen::VectorXcd& ev) {
    std::ostringstream out;
    for (Index i = 0; i < ev.size(); ++i) {
        if (i > 0) out << ", ";
        out << format_double(ev(i).real(), 6);
        if (ev(i).imag() != 0.0) out << (ev(i).imag() > 0 ? "+" : "") << format_double(ev(i).imag(), 6) << "i";
    }
    return out.str();
}

} // namespace

PoleSpec::PoleSpec(Vector poles) : poles_(std::move(poles)) {
    if (poles_.size() < 1) throw DimensionError("PoleSpec requires at least one pole");
    std::sort(poles_.data(), poles_.data() + poles_.size());
    const double max_abs = poles_.cwiseAbs().maxCoeff();
    for (Index i = 0; i < poles_.size(); ++i) {
        if (!(poles_(i) < 0.0)) {
            throw SpectrumError("PoleSpec poles must be strictly negative");
        }
        if (i > 0 && !(poles_(i) - poles_(i - 1) >= kPoleGapRel * max_abs)) {
            throw SpectrumError("PoleSpec poles must be pairwise distinct (gap >= 1e-6 * max|pole|)");
        }
    }
}

PoleSpec default_poles(const ContinuousPlant& plant) {
    const Index n = plant.n();
    Eigen::EigenSolver<Matrix> es(plant.A(), /*computeEigenvectors=*/false);
    double abscissa = es.eigenvalues().real().maxCoeff();
    const double scale = std::max(1.0, abscissa);
    Vector p(n);
    for (Index i = 0; i < n; ++i) {
        p(i) = -static_cast<double>(n - i) * scale;  // ascending: -n*s, ..., -1*s
    }
    return PoleSpec(p);
}

Matrix place_poles(const ContinuousPlant& plant, const PoleSpec& spec) {
    const Index n = plant.n();
    const Index m = plant.m();
    if (spec.size() != n) {
        throw DimensionError("PoleSpec must list exactly n poles");
    }

    Vector v;
    if (m == 1) {
        v = Vector::Ones(1);
    } else {
        // Among the first batch of admissible directions, keep the one with
        // the best-conditioned controllability matrix: it minimizes the
        // noise amplification through Ackermann's solve.
        std::mt19937_64 rng(kInputDirectionSeed);
        double best_cond = std::numeric_limits<double>::infinity();
        for (int attempt = 0; attempt < 64; ++attempt) {
            Vector cand = input_direction(m, attempt, rng);
            const Vector b = plant.B() * cand;
            const Matrix C = controllability_matrix(plant.A(), b);
            const double cond = cond2(C);
            if (numerical_rank(C) == n && cond <= kCtrbCondLimit && cond < best_cond) {
                v = cand;
                best_cond = cond;
            }
            if (attempt >= 7 && best_cond < kCtrbCondLimit) break;
        }
        if (!(best_cond < kCtrbCondLimit)) {
            throw ControllabilityError(
                "no synthesized input direction renders (A, B v) controllable");
        }
    }

    const Vector b = plant.B() * v;
    {
        const Matrix C = controllability_matrix(plant.A(), b);
        if (numerical_rank(C) < n) {
            throw ControllabilityError("(A, B v) is not controllable");
        }
    }
    Vector k_row = ackermann(plant.A(), b, spec.poles());
    k_row = refine_gain(plant.A(), plant.B(), v, spec.poles(), k_row);
    Matrix K_c = v * k_row.transpose();  // m x n

    // Placement post-check: achieved spectrum must match the request.
    Eigen::EigenSolver<Matrix> es(plant.A() + plant.B() * K_c, /*computeEigenvectors=*/false);
    Vector achieved = es.eigenvalues().real();
    Vector imag = es.eigenvalues().imag();
    std::sort(achieved.data(), achieved.data() + achieved.size());
    for (Index i = 0; i < n; ++i) {
        if (std::abs(achieved(i) - spec.poles()(i)) > kPlacementTol ||
            std::abs(imag(i)) > kPlacementTol) {
            throw PlacementError("placed spectrum deviates from the requested poles beyond 1e-7");
        }
    }
    return K_c;
}

Matrix accept_user_gain(const ContinuousPlant& plant, const Matrix& K_c) {
    if (K_c.rows() != plant.m() || K_c.cols() != plant.n()) {
        throw DimensionError("gain must be m x n");
    }
    Eigen::EigenSolver<Matrix> es(plant.A() + plant.B() * K_c, /*computeEigenvectors=*/false);
    const Eigen::VectorXcd ev = es.eigenvalues();
    const double radius = ev.cwiseAbs().maxCoeff();

    for (Index i = 0; i < ev.size(); ++i) {
        if (std::abs(ev(i).imag()) > kRealityTolRel * radius) {
            throw SpectrumError("closed-loop spectrum is not real: " + spectrum_to_string(ev));
        }
        if (!(ev(i).real() < 0.0)) {
            throw SpectrumError("closed-loop spectrum is not Hurwitz: " + spectrum_to_string(ev));
        }
    }
    Vector re = ev.real();
    std::sort(re.data(), re.data() + re.size());
    const double max_abs = re.cwiseAbs().maxCoeff();
    for (Index i = 1; i < re.size(); ++i) {
        if (!(re(i) - re(i - 1) >= kPoleGapRel * max_abs)) {
            throw SpectrumError("closed-loop eigenvalues are not pairwise distinct: " +
                                spectrum_to_string(ev));
        }
    }
    return K_c;
}

Diagonalization diagonalize(const ContinuousPlant& plant, const Matrix& K_c) {
    accept_user_gain(plant, K_c);  // real distinct negative, or SpectrumError

    const Index n = plant.n();
    const Matrix closed = plant.A() + plant.B() * K_c;
    Eigen::EigenSolver<Matrix> es(closed, /*computeEigenvectors=*/true);

    // Order by ascending eigenvalue.
    Vector lambda = es.eigenvalues().real();
    std::vector<Index> order(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(),
              [&](Index a, Index b) { return lambda(a) < lambda(b); });

    Diagonalization diag;
    diag.D = Vector(n);
    diag.T = Matrix(n, n);
    for (Index j = 0; j < n; ++j) {
        const Index src = order[static_cast<std::size_t>(j)];
        diag.D(j) = lambda(src);
        Vector col = es.eigenvectors().col(src).real();

        // Deterministic column convention: unit max-abs scale, then flip so
        // the first nonzero component is positive.
        const double max_abs = col.cwiseAbs().maxCoeff();
        if (max_abs == 0.0) {
            throw DegenerateEigenvectorError("eigenvector collapsed to zero");
        }
        col /= max_abs;
        for (Index i = 0; i < n; ++i) {
            if (std::abs(col(i)) > 1e-12) {
                if (col(i) < 0.0) col = -col;
                break;
            }
        }
        diag.T.col(j) = col;
    }

    diag.cond_T = cond2(diag.T);
    if (!(diag.cond_T <= kEigCondLimit)) {
        throw DegenerateEigenvectorError("eigenvector matrix condition number " +
                                         format_double(diag.cond_T, 6) + " exceeds 1e8");
    }

    diag.T_inv = diag.T.partialPivLu().inverse();
    // One Newton step X <- X(2I - TX) tightens T*T_inv toward I; repeat
    // while it still helps so ill-conditioned transforms meet the 1e-10
    // certificate invariant.
    const Matrix I = Matrix::Identity(n, n);
    double resid = (diag.T * diag.T_inv - I).cwiseAbs().maxCoeff();
    for (int iter = 0; iter < 3 && resid > 1e-14; ++iter) {
        Matrix refined = diag.T_inv * (2.0 * I - diag.T * diag.T_inv);
        const double r2 = (diag.T * refined - I).cwiseAbs().maxCoeff();
        if (r2 >= resid) break;
        diag.T_inv = std::move(refined);
        resid = r2;
    }

    const double diag_err =
        (diag.T_inv * closed * diag.T - Matrix(diag.D.asDiagonal())).cwiseAbs().maxCoeff();
    if (diag_err > 1e-8) {
        throw DegenerateEigenvectorError("transform fails to diagonalize to 1e-8 (residual " +
                                         format_double(diag_err, 6) + ")");
    }
    return diag;
}

} // namespace nustab
