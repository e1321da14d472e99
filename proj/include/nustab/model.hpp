#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "nustab/errors.hpp"

namespace nustab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Numerical rank: count of singular values above max(rows,cols)*sigma_max*1e-12.
Index numerical_rank(const Matrix& X);

/// Continuous LTI plant xdot = A x + B u. Immutable after construction;
/// the constructor enforces dimensions, rank(B) = m, and PBH stabilizability.
class ContinuousPlant {
public:
    ContinuousPlant(Matrix A, Matrix B);

    [[nodiscard]] const Matrix& A() const { return A_; }
    [[nodiscard]] const Matrix& B() const { return B_; }
    [[nodiscard]] Index n() const { return A_.rows(); }
    [[nodiscard]] Index m() const { return B_.cols(); }

private:
    Matrix A_;
    Matrix B_;
};

/// PBH test: rank([lambda*I - A, B]) = n for every eigenvalue lambda of A
/// with Re(lambda) >= -1e-9. Eigenvalues that close to the imaginary axis
/// are treated as unstable.
[[nodiscard]] bool pbh_stabilizable(const Matrix& A, const Matrix& B);
[[nodiscard]] bool pbh_stabilizable(const ContinuousPlant& plant);

/// Admissible sampling-period range, 0 < h_min <= h_max.
struct SamplingWindow {
    double h_min = 0.0;
    double h_max = 0.0;

    SamplingWindow(double lo, double hi);
    [[nodiscard]] bool contains(double h) const { return h >= h_min && h <= h_max; }
};

/// A concrete realization of sampling periods (h_0, ..., h_{N-1}).
/// Instants start at t_0 = 0 with t_{k+1} = t_k + h_k.
struct SamplingSchedule {
    std::vector<double> periods;

    explicit SamplingSchedule(std::vector<double> h);
    [[nodiscard]] std::size_t size() const { return periods.size(); }
    /// t_0 .. t_N (size N+1), strictly increasing.
    [[nodiscard]] std::vector<double> instants() const;
};

/// Grid resolution used when the period bound was located. The certificate
/// is probe-based, so the resolution is part of what it asserts.
struct GridInfo {
    int coarse_points = 256;
    double h_hi = 0.0;
    double tol_h = 1e-4;
};

/// Everything needed to run the designed controller: the diagonalizing
/// transform, the continuous gain behind it, the certified period bound,
/// and the contraction threshold the bound was certified against.
struct DesignCertificate {
    Matrix T;
    Matrix T_inv;
    Matrix K_c;     // m x n continuous gain with T^-1 (A + B K_c) T = diag(D)
    Vector D;       // ascending, strictly negative, pairwise distinct
    double h_star = 0.0;
    double gamma = 1.0;
    double cond_T = 0.0;
    bool right_censored = false;   // no crossing found below grid.h_hi
    GridInfo grid;

    [[nodiscard]] Index n() const { return T.rows(); }
    [[nodiscard]] Index m() const { return K_c.rows(); }
};

/// Checks the certificate invariants (T*T_inv ~ I, the transformed
/// closed loop is diagonal with diagonal D, D negative distinct,
/// h_star > 0, gamma in (0,1]). Throws on violation.
void validate_certificate(const ContinuousPlant& plant, const DesignCertificate& cert);

/// Discretized maps x_{k+1} = F x_k + G u_k for one period h, optionally
/// expressed in T-coordinates.
struct DiscreteMaps {
    double h = 0.0;
    Matrix F;
    Matrix G;
    bool transformed = false;
};

/// Plant configuration as read from disk: the validated plant plus the
/// optional design inputs the file may carry.
struct PlantConfig {
    ContinuousPlant plant;
    std::optional<SamplingWindow> window;
    std::optional<double> gamma;
    std::optional<Vector> poles;
    std::optional<Matrix> K_c;
};

/// Parse and validate a plant configuration. Keys: "A", "B", and optional
/// "h_min", "h_max", "gamma", "poles", "K_c". Unknown keys are rejected.
PlantConfig parse_config(const std::string& config_text);

/// Spec'd entry point: parse, validate, return just the plant.
ContinuousPlant load_plant(const std::string& config_text);

/// Serialize a plant back to configuration text. Numbers carry 17
/// significant digits so load_plant(serialize(p)) reproduces p bit-exactly.
std::string serialize(const ContinuousPlant& plant);

/// Certificate file I/O (same number format as plant configs). A nonempty
/// manifest hash is embedded so the file cites its run provenance.
std::string serialize(const DesignCertificate& cert, const std::string& manifest_hash = "");
DesignCertificate parse_certificate(const std::string& text);

} // namespace nustab
