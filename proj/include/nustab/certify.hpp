#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nustab/model.hpp"
#include "nustab/sva.hpp"

namespace nustab {

/// One evaluated period: the residual spectrum, its maximum, and the
/// selected targets (absent when no stabilizing target exists there).
struct SweepRow {
    double h = 0.0;
    Vector a;
    double sigma_bar = 0.0;
    std::optional<Vector> targets;
    std::optional<std::string> error;  // set when the pipeline failed at this h
};

/// Residual singular values over a period grid (the Figure-1 data).
struct SweepTable {
    std::vector<SweepRow> rows;
    Index n = 0;
    Index m = 0;
    double gamma = 1.0;

    /// CSV with header "h,a_1,...,a_n,sigma_bar,s_1,...,s_n"; target cells
    /// are blank when infeasible. 12 significant digits.
    [[nodiscard]] std::string to_csv() const;
};

/// Options shared by the certification entry points.
struct DesignOptions {
    double gamma = 1.0;
    double theta = 0.5;
    double margin = 0.02;
    double tol_h = 1e-4;
    int grid_points = 256;
    std::optional<double> h_hi;  // default: 10 / min|D_i|
};

/// Largest singular value of the projected transformed map at period h.
double sigma_bar_at(const ContinuousPlant& plant, const DesignCertificate& cert, double h);

/// Evaluate the residual spectrum on a uniform grid over [h_lo, h_hi].
/// Rows are independent and may be computed in parallel; assembly order is
/// deterministic. Rank failures are recorded per row, the sweep continues.
SweepTable sweep(const ContinuousPlant& plant, const DesignCertificate& cert,
                 double h_lo, double h_hi, int steps);

struct HStarResult {
    double h_star = 0.0;
    bool right_censored = false;
    GridInfo grid;
};

/// Locate the certified period bound: coarse grid over (0, h_hi], then
/// bisection on the first crossing of gamma to width tol_h. Monotonicity
/// of sigma_bar is not assumed; the certificate records the probe
/// resolution and verify_certificate re-checks on a finer grid.
HStarResult find_h_star(const ContinuousPlant& plant, const DesignCertificate& cert,
                        double gamma, double tol_h,
                        std::optional<double> h_hi = std::nullopt, int grid_points = 256);

/// Full design pipeline: gain (user-supplied or placed), diagonalizing
/// transform, certified period bound.
DesignCertificate design(const ContinuousPlant& plant, const std::optional<Matrix>& user_gain,
                         const std::optional<Vector>& user_poles, const DesignOptions& opts);

/// Gain plus the diagnostics produced on the way to it.
struct GainInfo {
    Matrix K;               // m x n, original coordinates
    double sigma_achieved;  // largest singular value of F_hat + G_hat K_hat
    Vector targets;
    Vector a;
};

/// Period-indexed gain: the full pipeline at one h in (0, h_star).
/// The transformed closed loop is re-verified against gamma on every call.
GainInfo gain_at_info(const ContinuousPlant& plant, const DesignCertificate& cert, double h,
                      double theta = 0.5, double margin = 0.02);
Matrix gain_at(const ContinuousPlant& plant, const DesignCertificate& cert, double h,
               double theta = 0.5, double margin = 0.02);

struct CertificateViolation {
    double h = 0.0;
    double sigma_bar = 0.0;
};

struct VerifyReport {
    std::vector<CertificateViolation> violations;
    int probes = 0;

    [[nodiscard]] bool clean() const { return violations.empty(); }
};

/// Re-probe sigma_bar on a grid `refinement` times finer than the one the
/// certificate was built with, over (0, h_star]. Any probe at or above
/// gamma is a violation; an empty report is the expected outcome.
VerifyReport verify_certificate(const ContinuousPlant& plant, const DesignCertificate& cert,
                                int refinement);

} // namespace nustab
