#include "nustab/sim.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <random>
#include <sstream>
#include <unordered_map>

#include "nustab/matfun.hpp"
#include "nustab/numfmt.hpp"

namespace nustab {

namespace {

/// 53-bit uniform in [0, 1) from a raw 64-bit draw; platform-stable.
double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Exact-match gain cache keyed on the period's bit pattern.
struct GainCache {
    const ContinuousPlant& plant;
    const DesignCertificate& cert;
    double theta;
    double margin;
    std::unordered_map<std::uint64_t, GainInfo> entries;

    const GainInfo& at(double h) {
        std::uint64_t key;
        std::memcpy(&key, &h, sizeof(key));
        auto it = entries.find(key);
        if (it == entries.end()) {
            it = entries.emplace(key, gain_at_info(plant, cert, h, theta, margin)).first;
        }
        return it->second;
    }
};

} // namespace

ScheduleSpec ScheduleSpec::parse(const std::string& text) {
    if (text == "uniform_random") return uniform_random();
    if (text == "sweep_up") return sweep_up();
    if (text == "worst_case_grid") return worst_case_grid();
    const std::string prefix = "constant:";
    if (text.rfind(prefix, 0) == 0) {
        char* end = nullptr;
        const double h = std::strtod(text.c_str() + prefix.size(), &end);
        if (end == text.c_str() + prefix.size() || *end != '\0' || !(h > 0.0)) {
            throw ParseError("constant schedule requires 'constant:<h>' with h > 0");
        }
        return constant(h);
    }
    throw ParseError("unknown schedule kind '" + text +
                     "' (expected uniform_random, constant:<h>, sweep_up, worst_case_grid)");
}

SamplingSchedule gen_schedule(const ScheduleSpec& spec, const SamplingWindow& window,
                              std::size_t N, std::uint64_t seed, const SweepTable* table) {
    if (N < 1) throw WindowError("gen_schedule requires N >= 1");
    std::vector<double> h(N);
    switch (spec.kind) {
        case ScheduleKind::uniform_random: {
            std::mt19937_64 rng(seed);
            for (std::size_t k = 0; k < N; ++k) {
                h[k] = window.h_min + (window.h_max - window.h_min) * uniform01(rng);
            }
            break;
        }
        case ScheduleKind::constant: {
            if (!window.contains(spec.constant_h)) {
                throw WindowError("constant period " + format_double(spec.constant_h, 12) +
                                  " lies outside the window");
            }
            for (std::size_t k = 0; k < N; ++k) h[k] = spec.constant_h;
            break;
        }
        case ScheduleKind::sweep_up: {
            if (N == 1) {
                h[0] = window.h_min;
            } else {
                for (std::size_t k = 0; k < N; ++k) {
                    h[k] = window.h_min + (window.h_max - window.h_min) *
                                              static_cast<double>(k) /
                                              static_cast<double>(N - 1);
                }
            }
            break;
        }
        case ScheduleKind::worst_case_grid: {
            if (table == nullptr) {
                throw WindowError("worst_case_grid schedule requires a sweep table");
            }
            double worst_h = 0.0;
            double worst_sigma = -1.0;
            for (const SweepRow& row : table->rows) {
                if (row.error || !window.contains(row.h)) continue;
                if (row.sigma_bar > worst_sigma) {
                    worst_sigma = row.sigma_bar;
                    worst_h = row.h;
                }
            }
            if (worst_sigma < 0.0) {
                throw WindowError("worst_case_grid: no sweep rows fall inside the window");
            }
            for (std::size_t k = 0; k < N; ++k) h[k] = worst_h;
            break;
        }
    }
    return SamplingSchedule(std::move(h));
}

Vector step_closed_loop(const ContinuousPlant& plant, const Matrix& K, const Vector& x,
                        double h) {
    const DiscreteMaps maps = discretize(plant, h);
    return maps.F * x + maps.G * (K * x);
}

std::string Trajectory::to_csv(const DesignCertificate& cert) const {
    const Index n = cert.n();
    const Index m = cert.m();
    std::ostringstream out;
    out << "t";
    for (Index i = 1; i <= n; ++i) out << ",x_" << i;
    for (Index i = 1; i <= m; ++i) out << ",u_" << i;
    out << ",lyap,is_sample\n";

    auto emit = [&](double t, const Vector& x, const Vector& u, double lyap, bool is_sample) {
        out << format_double(t, 12);
        for (Index i = 0; i < n; ++i) out << "," << format_double(x(i), 12);
        for (Index i = 0; i < m; ++i) out << "," << format_double(u(i), 12);
        out << "," << format_double(lyap, 12) << "," << (is_sample ? 1 : 0) << "\n";
    };

    std::size_t inter = 0;
    for (std::size_t k = 0; k < samples.size(); ++k) {
        const TrajectorySample& s = samples[k];
        emit(s.t, s.x, s.u, s.lyap, true);
        const double t_next =
            (k + 1 < samples.size()) ? samples[k + 1].t : std::numeric_limits<double>::infinity();
        while (inter < intersample.size() && intersample[inter].t < t_next) {
            const IntersamplePoint& p = intersample[inter];
            emit(p.t, p.x, s.u, (cert.T_inv * p.x).norm(), false);
            ++inter;
        }
    }
    return out.str();
}

Trajectory simulate(const ContinuousPlant& plant, const DesignCertificate& cert,
                    const SamplingSchedule& schedule, const Vector& x0, int substeps,
                    double theta, double margin) {
    if (x0.size() != plant.n()) throw DimensionError("simulate: x0 must have length n");
    if (substeps < 0) throw WindowError("simulate: substeps must be >= 0");
    for (std::size_t k = 0; k < schedule.size(); ++k) {
        if (!(schedule.periods[k] > 0.0 && schedule.periods[k] < cert.h_star)) {
            throw PeriodOutOfCertificateError(
                "schedule period h_" + std::to_string(k) + " = " +
                format_double(schedule.periods[k], 12) + " outside (0, h_star)");
        }
    }

    GainCache cache{plant, cert, theta, margin, {}};
    Trajectory traj;
    traj.samples.reserve(schedule.size() + 1);

    Vector x = x0;
    double t = 0.0;
    for (std::size_t k = 0; k < schedule.size(); ++k) {
        const double h = schedule.periods[k];
        const GainInfo& gi = cache.at(h);
        const Vector u = gi.K * x;

        TrajectorySample s;
        s.t = t;
        s.x = x;
        s.u = u;
        s.h = h;
        s.lyap = (cert.T_inv * x).norm();
        s.sigma_achieved = gi.sigma_achieved;
        traj.samples.push_back(std::move(s));

        for (int j = 1; j < substeps; ++j) {
            const double frac = static_cast<double>(j) / static_cast<double>(substeps);
            const DiscreteMaps part = discretize(plant, frac * h);
            IntersamplePoint p;
            p.t = t + frac * h;
            p.x = part.F * x + part.G * u;
            traj.intersample.push_back(std::move(p));
        }

        const DiscreteMaps full = discretize(plant, h);
        x = full.F * x + full.G * u;
        t += h;
    }

    TrajectorySample last;
    last.t = t;
    last.x = x;
    last.u = Vector::Zero(plant.m());
    last.h = 0.0;
    last.lyap = (cert.T_inv * x).norm();
    last.sigma_achieved = 0.0;
    traj.samples.push_back(std::move(last));
    return traj;
}

LyapunovReport lyapunov_check(const Trajectory& traj, const DesignCertificate& cert) {
    (void)cert;
    LyapunovReport report;
    if (traj.samples.empty()) return report;
    for (std::size_t k = 0; k + 1 < traj.samples.size(); ++k) {
        const TrajectorySample& cur = traj.samples[k];
        const TrajectorySample& next = traj.samples[k + 1];
        const double bound = cur.sigma_achieved * cur.lyap + 1e-10;
        if (next.lyap > bound) {
            report.violations.push_back({k, next.lyap / std::max(bound, 1e-300)});
        }
        const double denom = cur.sigma_achieved * cur.lyap;
        if (denom > 0.0) {
            report.max_ratio = std::max(report.max_ratio, next.lyap / denom);
        }
    }
    return report;
}

} // namespace nustab
