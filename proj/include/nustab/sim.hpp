#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nustab/certify.hpp"
#include "nustab/model.hpp"

namespace nustab {

/// Schedule generator families.
enum class ScheduleKind {
    uniform_random,   // i.i.d. uniform on [h_min, h_max], seeded
    constant,         // repeats a fixed period
    sweep_up,         // linear ramp h_min -> h_max
    worst_case_grid,  // repeats the sweep-grid h maximizing sigma_bar in the window
};

struct ScheduleSpec {
    ScheduleKind kind = ScheduleKind::uniform_random;
    double constant_h = 0.0;  // used by ScheduleKind::constant

    static ScheduleSpec uniform_random() { return {ScheduleKind::uniform_random, 0.0}; }
    static ScheduleSpec constant(double h) { return {ScheduleKind::constant, h}; }
    static ScheduleSpec sweep_up() { return {ScheduleKind::sweep_up, 0.0}; }
    static ScheduleSpec worst_case_grid() { return {ScheduleKind::worst_case_grid, 0.0}; }

    /// Parse "uniform_random" | "constant:<h>" | "sweep_up" | "worst_case_grid".
    static ScheduleSpec parse(const std::string& text);
};

/// Generate N sampling periods. worst_case_grid requires the sweep table it
/// reads the argmax from. Deterministic for a fixed seed.
SamplingSchedule gen_schedule(const ScheduleSpec& spec, const SamplingWindow& window,
                              std::size_t N, std::uint64_t seed,
                              const SweepTable* table = nullptr);

/// One exact closed-loop step x+ = (F(h) + G(h) K) x.
Vector step_closed_loop(const ContinuousPlant& plant, const Matrix& K, const Vector& x,
                        double h);

/// One sampled point of a closed-loop run.
struct TrajectorySample {
    double t = 0.0;
    Vector x;
    Vector u;                    // input held over [t, t + h); zero on the final sample
    double h = 0.0;              // 0 on the final sample
    double lyap = 0.0;           // |x|_T = ||T_inv x||_2
    double sigma_achieved = 0.0; // contraction bound for the step starting here
};

struct IntersamplePoint {
    double t = 0.0;
    Vector x;
};

/// Closed-loop run record: sampled states, optional intersample states,
/// and the Lyapunov-norm trace.
struct Trajectory {
    std::vector<TrajectorySample> samples;
    std::vector<IntersamplePoint> intersample;

    /// CSV "t,x_1,...,x_n,u_1,...,u_m,lyap,is_sample" in time order,
    /// intersample rows flagged is_sample=0; 12 significant digits.
    [[nodiscard]] std::string to_csv(const DesignCertificate& cert) const;
};

/// Run the closed loop under a schedule, holding u_k = K(h_k) x_k per
/// interval. Gains come from certify::gain_at (cached per distinct h).
/// Intersample states use exact partial-interval discretization.
/// All h_k must lie inside (0, h_star).
Trajectory simulate(const ContinuousPlant& plant, const DesignCertificate& cert,
                    const SamplingSchedule& schedule, const Vector& x0,
                    int substeps = 20, double theta = 0.5, double margin = 0.02);

struct LyapunovViolation {
    std::size_t step = 0;
    double ratio = 0.0;  // |x_{k+1}|_T / (sigma_k |x_k|_T)
};

struct LyapunovReport {
    std::vector<LyapunovViolation> violations;
    double max_ratio = 0.0;

    [[nodiscard]] bool clean() const { return violations.empty(); }
};

/// Verify |x_{k+1}|_T <= sigma_achieved(h_k) |x_k|_T + 1e-10 at every step.
LyapunovReport lyapunov_check(const Trajectory& traj, const DesignCertificate& cert);

} // namespace nustab
