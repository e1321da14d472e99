#pragma once

#include "nustab/model.hpp"

namespace nustab {

/// Matrix exponential e^M via Pade(13) with scaling and squaring.
/// Throws OverflowError if intermediates leave the representable range.
Matrix expm(const Matrix& M);

/// Phi(h) = integral of e^(A tau) d tau over [0, h], computed from the
/// augmented exponential exp(h*[[A, I],[0, 0]]) so a singular A is fine.
/// Satisfies A*Phi(h) + I = e^(A h).
Matrix expm_integral(const Matrix& A, double h);

/// Exact zero-order-hold discretization at period h:
/// F = e^(A h), G = Phi(h) * B.
DiscreteMaps discretize(const ContinuousPlant& plant, double h);

/// Move maps into T-coordinates: F_hat = T_inv F T, G_hat = T_inv G.
DiscreteMaps transform_maps(const DiscreteMaps& maps, const DesignCertificate& cert);

} // namespace nustab
