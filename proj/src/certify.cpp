#include "nustab/certify.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <sstream>

#include "nustab/gain_init.hpp"
#include "nustab/matfun.hpp"
#include "nustab/numfmt.hpp"
#include "nustab/parallel.hpp"

namespace nustab {

namespace {

ResidualSpectrum residual_at(const ContinuousPlant& plant, const DesignCertificate& cert,
                             double h) {
    const DiscreteMaps hat = transform_maps(discretize(plant, h), cert);
    return residual_spectrum(hat.F, hat.G);
}

/// True when a stabilizing target set exists at h (sigma_bar < gamma).
/// Pipeline failures count as "not below": the bound search treats any
/// unevaluable period as a crossing.
bool below_gamma(const ContinuousPlant& plant, const DesignCertificate& cert, double h,
                 double gamma) {
    try {
        return residual_at(plant, cert, h).max() < gamma;
    } catch (const Error&) {
        return false;
    }
}

} // namespace

double sigma_bar_at(const ContinuousPlant& plant, const DesignCertificate& cert, double h) {
    return residual_at(plant, cert, h).max();
}

std::string SweepTable::to_csv() const {
    std::ostringstream out;
    out << "h";
    for (Index i = 1; i <= n; ++i) out << ",a_" << i;
    out << ",sigma_bar";
    for (Index i = 1; i <= n; ++i) out << ",s_" << i;
    out << "\n";
    for (const SweepRow& row : rows) {
        out << format_double(row.h, 12);
        if (row.error) {
            for (Index i = 0; i < 2 * n + 1; ++i) out << ",";
            out << "\n";
            continue;
        }
        for (Index i = 0; i < n; ++i) out << "," << format_double(row.a(i), 12);
        out << "," << format_double(row.sigma_bar, 12);
        for (Index i = 0; i < n; ++i) {
            out << ",";
            if (row.targets) out << format_double((*row.targets)(i), 12);
        }
        out << "\n";
    }
    return out.str();
}

SweepTable sweep(const ContinuousPlant& plant, const DesignCertificate& cert,
                 double h_lo, double h_hi, int steps) {
    if (!(h_lo > 0.0 && h_lo < h_hi)) throw WindowError("sweep requires 0 < h_lo < h_hi");
    if (steps < 2) throw WindowError("sweep requires steps >= 2");

    SweepTable table;
    table.n = cert.n();
    table.m = cert.m();
    table.gamma = cert.gamma;
    table.rows.resize(static_cast<std::size_t>(steps));

    parallel_for(static_cast<std::size_t>(steps), [&](std::size_t i) {
        const double h =
            h_lo + (h_hi - h_lo) * static_cast<double>(i) / static_cast<double>(steps - 1);
        SweepRow& row = table.rows[i];
        row.h = h;
        try {
            const ResidualSpectrum a = residual_at(plant, cert, h);
            row.a = a.a;
            row.sigma_bar = a.max();
            try {
                row.targets = select_targets(a, cert.gamma).s;
            } catch (const InfeasibleAtPeriodError&) {
                row.targets.reset();
            }
        } catch (const Error& e) {
            row.error = e.what();
        }
    });
    return table;
}

HStarResult find_h_star(const ContinuousPlant& plant, const DesignCertificate& cert,
                        double gamma, double tol_h,
                        std::optional<double> h_hi_opt, int grid_points) {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw WindowError("find_h_star: gamma must be in (0, 1]");
    if (!(tol_h > 0.0)) throw WindowError("find_h_star: tol_h must be positive");
    if (grid_points < 2) throw WindowError("find_h_star: grid must have at least 2 points");

    const double h_hi = h_hi_opt.value_or(10.0 / cert.D.cwiseAbs().minCoeff());

    HStarResult res;
    res.grid.coarse_points = grid_points;
    res.grid.h_hi = h_hi;
    res.grid.tol_h = tol_h;

    if (!below_gamma(plant, cert, tol_h, gamma)) {
        throw NoStabilizablePeriodError(
            "sigma_bar already reaches gamma at the smallest probe h = " +
            format_double(tol_h, 6));
    }

    // Coarse scan for the first crossing, then bisect it.
    double lo = tol_h;
    double hi = 0.0;
    bool crossed = false;
    std::vector<char> ok(static_cast<std::size_t>(grid_points), 0);
    parallel_for(ok.size(), [&](std::size_t i) {
        const double h = h_hi * static_cast<double>(i + 1) / static_cast<double>(grid_points);
        ok[i] = below_gamma(plant, cert, h, gamma) ? 1 : 0;
    });
    for (std::size_t i = 0; i < ok.size(); ++i) {
        const double h = h_hi * static_cast<double>(i + 1) / static_cast<double>(grid_points);
        if (ok[i]) {
            lo = h;
        } else {
            hi = h;
            crossed = true;
            break;
        }
    }

    if (!crossed) {
        res.h_star = h_hi;
        res.right_censored = true;
        return res;
    }
    while (hi - lo > tol_h) {
        const double mid = 0.5 * (lo + hi);
        if (below_gamma(plant, cert, mid, gamma)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    res.h_star = lo;
    res.right_censored = false;
    return res;
}

DesignCertificate design(const ContinuousPlant& plant, const std::optional<Matrix>& user_gain,
                         const std::optional<Vector>& user_poles, const DesignOptions& opts) {
    Matrix K_c;
    if (user_gain) {
        K_c = accept_user_gain(plant, *user_gain);
    } else if (user_poles) {
        K_c = place_poles(plant, PoleSpec(*user_poles));
    } else {
        K_c = place_poles(plant, default_poles(plant));
    }
    const Diagonalization diag = diagonalize(plant, K_c);

    DesignCertificate cert;
    cert.T = diag.T;
    cert.T_inv = diag.T_inv;
    cert.K_c = K_c;
    cert.D = diag.D;
    cert.gamma = opts.gamma;
    cert.cond_T = diag.cond_T;

    const HStarResult hs =
        find_h_star(plant, cert, opts.gamma, opts.tol_h, opts.h_hi, opts.grid_points);
    cert.h_star = hs.h_star;
    cert.right_censored = hs.right_censored;
    cert.grid = hs.grid;

    validate_certificate(plant, cert);
    return cert;
}

GainInfo gain_at_info(const ContinuousPlant& plant, const DesignCertificate& cert, double h,
                      double theta, double margin) {
    if (!(h > 0.0 && h < cert.h_star)) {
        throw PeriodOutOfCertificateError("period h = " + format_double(h, 12) +
                                          " outside the certified interval (0, " +
                                          format_double(cert.h_star, 12) + ")");
    }
    const DiscreteMaps maps = discretize(plant, h);
    const DiscreteMaps hat = transform_maps(maps, cert);
    const ResidualSpectrum a = residual_spectrum(hat.F, hat.G);
    const TargetSpectrum target = select_targets(a, cert.gamma, theta, margin);
    const Matrix K_hat = assign_singular_values(hat.F, hat.G, target);
    const Matrix K = gain_in_original_coordinates(K_hat, cert);

    // Re-verify against gamma from the original-coordinate gain: the
    // transformed closed loop must contract.
    const Matrix closed_hat = cert.T_inv * (maps.F + maps.G * K) * cert.T;
    Eigen::JacobiSVD<Matrix> svd(closed_hat);
    const double sigma = svd.singularValues()(0);
    if (!(sigma < cert.gamma)) {
        throw PostCheckError("gain_at post-check failed: sigma_bar " + format_double(sigma, 12) +
                             " >= gamma " + format_double(cert.gamma, 12) + " at h = " +
                             format_double(h, 12));
    }

    GainInfo info;
    info.K = K;
    info.sigma_achieved = sigma;
    info.targets = target.s;
    info.a = a.a;
    return info;
}

Matrix gain_at(const ContinuousPlant& plant, const DesignCertificate& cert, double h,
               double theta, double margin) {
    return gain_at_info(plant, cert, h, theta, margin).K;
}

VerifyReport verify_certificate(const ContinuousPlant& plant, const DesignCertificate& cert,
                                int refinement) {
    if (refinement < 1) throw WindowError("verify_certificate: refinement must be >= 1");
    VerifyReport report;
    const int probes = cert.grid.coarse_points * refinement;
    report.probes = probes;
    std::vector<double> sigma(static_cast<std::size_t>(probes),
                              std::numeric_limits<double>::quiet_NaN());
    parallel_for(sigma.size(), [&](std::size_t i) {
        const double h = cert.h_star * static_cast<double>(i + 1) / static_cast<double>(probes);
        try {
            sigma[i] = sigma_bar_at(plant, cert, h);
        } catch (const Error&) {
            sigma[i] = std::numeric_limits<double>::infinity();
        }
    });
    for (std::size_t i = 0; i < sigma.size(); ++i) {
        if (!(sigma[i] < cert.gamma)) {
            const double h = cert.h_star * static_cast<double>(i + 1) / static_cast<double>(probes);
            report.violations.push_back({h, sigma[i]});
        }
    }
    return report;
}

} // namespace nustab
