#include "nustab/matfun.hpp"

#include <Eigen/LU>

#include <cmath>
#include <stdexcept>

namespace nustab {

namespace {

// Pade(13) numerator coefficients (Higham, "The scaling and squaring method
// for the matrix exponential revisited").
constexpr double kPade13[] = {
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0,  129060195264000.0,   10559470521600.0,
    670442572800.0,      33522128640.0,       1323241920.0,
    40840800.0,          960960.0,            16380.0,
    182.0,               1.0};

// Largest 1-norm for which the unscaled Pade(13) approximant stays inside
// its backward-error bound.
constexpr double kTheta13 = 5.371920351148152;

Matrix expm_pade13(const Matrix& A) {
    const Index n = A.rows();
    const Matrix I = Matrix::Identity(n, n);
    const Matrix A2 = A * A;
    const Matrix A4 = A2 * A2;
    const Matrix A6 = A4 * A2;

    const Matrix U =
        A * (A6 * (kPade13[13] * A6 + kPade13[11] * A4 + kPade13[9] * A2) +
             kPade13[7] * A6 + kPade13[5] * A4 + kPade13[3] * A2 + kPade13[1] * I);
    const Matrix V = A6 * (kPade13[12] * A6 + kPade13[10] * A4 + kPade13[8] * A2) +
                     kPade13[6] * A6 + kPade13[4] * A4 + kPade13[2] * A2 + kPade13[0] * I;

    return (V - U).partialPivLu().solve(V + U);
}

} // namespace

Matrix expm(const Matrix& M) {
    if (M.rows() != M.cols()) {
        throw DimensionError("expm requires a square matrix");
    }
    if (!M.allFinite()) {
        throw OverflowError("expm input has non-finite entries");
    }
    const double norm1 = M.cwiseAbs().colwise().sum().maxCoeff();
    if (norm1 == 0.0) {
        return Matrix::Identity(M.rows(), M.cols());
    }
    int squarings = 0;
    Matrix scaled = M;
    if (norm1 > kTheta13) {
        squarings = static_cast<int>(std::ceil(std::log2(norm1 / kTheta13)));
        scaled /= std::ldexp(1.0, squarings);
    }
    Matrix E = expm_pade13(scaled);
    for (int s = 0; s < squarings; ++s) {
        E = E * E;
        if (!E.allFinite()) {
            throw OverflowError("expm overflowed during repeated squaring");
        }
    }
    if (!E.allFinite()) {
        throw OverflowError("expm result has non-finite entries");
    }
    return E;
}

Matrix expm_integral(const Matrix& A, double h) {
    if (A.rows() != A.cols()) {
        throw DimensionError("expm_integral requires a square matrix");
    }
    if (h < 0.0) {
        throw DimensionError("expm_integral requires h >= 0");
    }
    const Index n = A.rows();
    Matrix aug = Matrix::Zero(2 * n, 2 * n);
    aug.topLeftCorner(n, n) = A * h;
    aug.topRightCorner(n, n) = Matrix::Identity(n, n) * h;
    return expm(aug).topRightCorner(n, n);
}

DiscreteMaps discretize(const ContinuousPlant& plant, double h) {
    if (!(h > 0.0)) {
        throw WindowError("discretize requires h > 0");
    }
    DiscreteMaps maps;
    maps.h = h;
    maps.F = expm(plant.A() * h);
    maps.G = expm_integral(plant.A(), h) * plant.B();
    maps.transformed = false;
    return maps;
}

DiscreteMaps transform_maps(const DiscreteMaps& maps, const DesignCertificate& cert) {
    if (maps.transformed) {
        throw std::logic_error("transform_maps: maps are already in T-coordinates");
    }
    DiscreteMaps out;
    out.h = maps.h;
    out.F = cert.T_inv * maps.F * cert.T;
    out.G = cert.T_inv * maps.G;
    out.transformed = true;
    return out;
}

} // namespace nustab
