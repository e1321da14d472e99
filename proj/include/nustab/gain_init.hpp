#pragma once

#include "nustab/model.hpp"

namespace nustab {

/// Desired continuous closed-loop poles: strictly negative, pairwise
/// distinct reals (minimum gap 1e-6 * max|pole|), sorted ascending.
class PoleSpec {
public:
    explicit PoleSpec(Vector poles);

    [[nodiscard]] const Vector& poles() const { return poles_; }
    [[nodiscard]] Index size() const { return poles_.size(); }

private:
    Vector poles_;
};

/// Deterministic default when the user supplies no poles:
/// {-1, -2, ..., -n} scaled by max(1, spectral abscissa of A).
PoleSpec default_poles(const ContinuousPlant& plant);

/// State-feedback gain K_c with eig(A + B K_c) = spec.poles.
/// Multi-input plants are reduced to a single synthesized input B*v
/// (v from a fixed seeded sequence of unit vectors) before Ackermann's
/// formula; the result is verified against the requested poles.
Matrix place_poles(const ContinuousPlant& plant, const PoleSpec& spec);

/// Validate a user-provided gain: eig(A + B K_c) must be real (imaginary
/// part <= 1e-8 * spectral radius), strictly negative, and pairwise
/// distinct under the PoleSpec gap rule. Returns the gain unchanged.
Matrix accept_user_gain(const ContinuousPlant& plant, const Matrix& K_c);

/// Diagonalization of the continuous closed loop A + B K_c.
struct Diagonalization {
    Matrix T;
    Matrix T_inv;
    Vector D;       // ascending eigenvalues
    double cond_T;  // 2-norm condition number of T
};

/// Eigenvector transform with a deterministic convention: columns ordered
/// by ascending eigenvalue, scaled to unit max-abs entry, first nonzero
/// component positive. Throws DegenerateEigenvectorError if cond(T) > 1e8.
Diagonalization diagonalize(const ContinuousPlant& plant, const Matrix& K_c);

} // namespace nustab
