// Command-line front end: design the sampling-period-varying controller,
// sweep the residual singular values, simulate the closed loop, and
// re-verify certificates.
//
// Exit codes: 0 success, 2 input/validation error, 3 synthesis failure,
// 4 certificate violation.

#include <CLI11.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "nustab/certify.hpp"
#include "nustab/gain_init.hpp"
#include "nustab/model.hpp"
#include "nustab/numfmt.hpp"
#include "nustab/sim.hpp"
#include "nustab/version.hpp"

namespace fs = std::filesystem;
using namespace nustab;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitSynthesis = 3;
constexpr int kExitCertificateViolation = 4;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot read file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file '" + path.string() + "'");
    out << content;
}

std::string timestamp_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

/// Run provenance: inputs, resolved parameters, tool version. The manifest
/// hash covers everything except the timestamp, so reruns with identical
/// inputs carry the same hash and produce byte-identical outputs.
class Manifest {
public:
    Manifest(std::string command) : command_(std::move(command)) {}

    void add(const std::string& key, const std::string& value, bool quote = true) {
        entries_.emplace_back(key, quote ? ("\"" + value + "\"") : value);
    }
    void add(const std::string& key, double value) {
        entries_.emplace_back(key, format_double(value, 17));
    }
    void add(const std::string& key, std::int64_t value) {
        entries_.emplace_back(key, std::to_string(value));
    }

    [[nodiscard]] std::string hash() const { return fnv1a_hex(canonical()); }

    [[nodiscard]] std::string to_json() const {
        std::ostringstream out;
        out << "{\n  \"command\": \"" << command_ << "\",\n";
        for (const auto& [k, v] : entries_) {
            out << "  \"" << k << "\": " << v << ",\n";
        }
        out << "  \"version\": \"" << kVersion << "\",\n";
        out << "  \"manifest_hash\": \"" << hash() << "\",\n";
        out << "  \"timestamp\": \"" << timestamp_utc() << "\"\n}\n";
        return out.str();
    }

private:
    [[nodiscard]] std::string canonical() const {
        std::ostringstream out;
        out << command_ << "|" << kVersion;
        for (const auto& [k, v] : entries_) out << "|" << k << "=" << v;
        return out.str();
    }

    std::string command_;
    std::vector<std::pair<std::string, std::string>> entries_;
};

int classify(const Error& e) {
    if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const DimensionError*>(&e) ||
        dynamic_cast<const StabilizabilityError*>(&e) || dynamic_cast<const WindowError*>(&e) ||
        dynamic_cast<const SpectrumError*>(&e) ||
        dynamic_cast<const PeriodOutOfCertificateError*>(&e)) {
        return kExitValidation;
    }
    if (dynamic_cast<const PostCheckError*>(&e)) {
        return kExitCertificateViolation;
    }
    return kExitSynthesis;  // Controllability/Placement/Rank/Interlacing/NoStabilizablePeriod/...
}

/// Load-phase failures are input problems regardless of the error type
/// (a rank-deficient B in the config is validation, not synthesis).
struct Inputs {
    std::string config_text;
    std::string cert_text;
    std::optional<PlantConfig> cfg;
    std::optional<DesignCertificate> cert;
};

Inputs load_inputs(const std::string& config_path, const std::string& cert_path) {
    Inputs in;
    in.config_text = read_file(config_path);
    in.cfg = parse_config(in.config_text);
    if (!cert_path.empty()) {
        in.cert_text = read_file(cert_path);
        in.cert = parse_certificate(in.cert_text);
        validate_certificate(in.cfg->plant, *in.cert);
    }
    return in;
}

struct CommonArgs {
    std::string config_path;
    std::string cert_path;
    std::string out_dir = ".";
    double gamma = 1.0;
    bool gamma_set = false;
    double theta = 0.5;
    double margin = 0.02;
    int grid = 256;
    double tol_h = 1e-4;
};

Vector parse_x0(const std::string& text, Index n) {
    if (text.empty()) return Vector::Ones(n);
    std::vector<double> vals;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            vals.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ParseError("--x0 expects comma-separated numbers");
        }
    }
    if (static_cast<Index>(vals.size()) != n) {
        throw DimensionError("--x0 must list exactly n = " + std::to_string(n) + " values");
    }
    Vector x0(n);
    for (Index i = 0; i < n; ++i) x0(i) = vals[static_cast<std::size_t>(i)];
    return x0;
}

std::string gnuplot_script(const std::string& csv_name, Index n, Index m,
                           const std::string& manifest_hash) {
    std::ostringstream out;
    out << "# manifest " << manifest_hash << "\n";
    out << "# Residual singular-value branches (solid) and selected targets (dashed).\n";
    out << "set datafile separator ','\n";
    out << "set key outside\n";
    out << "set xlabel 'h'\n";
    out << "set ylabel 'singular values'\n";
    out << "plot \\\n";
    bool first = true;
    for (Index i = m + 1; i <= n; ++i) {
        if (!first) out << ", \\\n";
        out << "  '" << csv_name << "' using 1:" << (1 + i)
            << " with lines lw 2 title 'a_" << i << "'";
        first = false;
    }
    for (Index i = 1; i <= n; ++i) {
        out << ", \\\n  '" << csv_name << "' using 1:" << (2 + n + i)
            << " with lines dt 2 title 's_" << i << "'";
    }
    out << ", \\\n  1 with lines lc 'black' dt 3 title 'gamma'\n";
    return out.str();
}

int cmd_design(const CommonArgs& args, const Inputs& in, std::optional<double> h_hi) {
    const std::string& config_text = in.config_text;
    const PlantConfig& cfg = *in.cfg;

    DesignOptions opts;
    opts.gamma = args.gamma_set ? args.gamma : cfg.gamma.value_or(1.0);
    opts.theta = args.theta;
    opts.margin = args.margin;
    opts.tol_h = args.tol_h;
    opts.grid_points = args.grid;
    opts.h_hi = h_hi;

    const DesignCertificate cert = design(cfg.plant, cfg.K_c, cfg.poles, opts);

    Manifest manifest("design");
    manifest.add("config_path", args.config_path);
    manifest.add("config_hash", fnv1a_hex(config_text));
    manifest.add("gamma", opts.gamma);
    manifest.add("theta", opts.theta);
    manifest.add("margin", opts.margin);
    manifest.add("grid", static_cast<std::int64_t>(opts.grid_points));
    manifest.add("tol_h", opts.tol_h);
    if (h_hi) manifest.add("h_hi", *h_hi);

    fs::create_directories(args.out_dir);
    const fs::path cert_path = fs::path(args.out_dir) / "certificate.json";
    write_file(cert_path, serialize(cert, manifest.hash()));
    write_file(fs::path(args.out_dir) / "design_manifest.json", manifest.to_json());

    std::cout << "design: h_star = " << format_double(cert.h_star, 12)
              << (cert.right_censored ? " (right-censored at grid h_hi)" : "")
              << ", gamma = " << format_double(cert.gamma, 6)
              << ", cond(T) = " << format_double(cert.cond_T, 6) << "\n";
    std::cout << "design: D =";
    for (Index i = 0; i < cert.D.size(); ++i) std::cout << " " << format_double(cert.D(i), 12);
    std::cout << "\n";
    std::cout << "design: certificate written to " << cert_path.string() << "\n";
    return 0;
}

int cmd_sweep(const CommonArgs& args, const Inputs& in, double h_lo, double h_hi, int steps) {
    const std::string& config_text = in.config_text;
    const std::string& cert_text = in.cert_text;
    const PlantConfig& cfg = *in.cfg;
    const DesignCertificate& cert = *in.cert;

    const SweepTable table = sweep(cfg.plant, cert, h_lo, h_hi, steps);

    Manifest manifest("sweep");
    manifest.add("config_path", args.config_path);
    manifest.add("config_hash", fnv1a_hex(config_text));
    manifest.add("cert_path", args.cert_path);
    manifest.add("cert_hash", fnv1a_hex(cert_text));
    manifest.add("h_lo", h_lo);
    manifest.add("h_hi", h_hi);
    manifest.add("steps", static_cast<std::int64_t>(steps));
    manifest.add("gamma", cert.gamma);

    fs::create_directories(args.out_dir);
    const fs::path csv_path = fs::path(args.out_dir) / "sweep.csv";
    write_file(csv_path, "# manifest " + manifest.hash() + "\n" + table.to_csv());
    write_file(fs::path(args.out_dir) / "sweep.gp",
               gnuplot_script("sweep.csv", table.n, table.m, manifest.hash()));
    write_file(fs::path(args.out_dir) / "sweep_manifest.json", manifest.to_json());

    int failed = 0;
    for (const SweepRow& row : table.rows) {
        if (row.error) ++failed;
    }
    std::cout << "sweep: " << table.rows.size() << " rows written to " << csv_path.string();
    if (failed > 0) std::cout << " (" << failed << " rows failed)";
    std::cout << "\n";
    return 0;
}

int cmd_simulate(const CommonArgs& args, const Inputs& in, const std::string& schedule_text,
                 std::uint64_t seed, int steps, const std::string& x0_text, int substeps,
                 std::optional<double> h_min, std::optional<double> h_max) {
    const std::string& config_text = in.config_text;
    const std::string& cert_text = in.cert_text;
    const PlantConfig& cfg = *in.cfg;
    const DesignCertificate& cert = *in.cert;

    const ScheduleSpec spec = ScheduleSpec::parse(schedule_text);

    double lo = h_min.value_or(cfg.window ? cfg.window->h_min : cert.h_star / 100.0);
    double hi = h_max.value_or(cfg.window ? cfg.window->h_max : 0.95 * cert.h_star);
    const SamplingWindow window(lo, hi);
    if (!(window.h_max < cert.h_star)) {
        throw WindowError("schedule window [" + format_double(window.h_min, 12) + ", " +
                          format_double(window.h_max, 12) +
                          "] exceeds the certified interval (0, " +
                          format_double(cert.h_star, 12) + ")");
    }

    std::optional<SweepTable> table;
    if (spec.kind == ScheduleKind::worst_case_grid) {
        table = sweep(cfg.plant, cert, window.h_min, window.h_max, cert.grid.coarse_points);
    }
    const SamplingSchedule schedule =
        gen_schedule(spec, window, static_cast<std::size_t>(steps), seed,
                     table ? &*table : nullptr);

    const Vector x0 = parse_x0(x0_text, cfg.plant.n());
    const Trajectory traj = simulate(cfg.plant, cert, schedule, x0, substeps,
                                     args.theta, args.margin);
    const LyapunovReport report = lyapunov_check(traj, cert);

    Manifest manifest("simulate");
    manifest.add("config_path", args.config_path);
    manifest.add("config_hash", fnv1a_hex(config_text));
    manifest.add("cert_path", args.cert_path);
    manifest.add("cert_hash", fnv1a_hex(cert_text));
    manifest.add("schedule", schedule_text);
    manifest.add("seed", static_cast<std::int64_t>(seed));
    manifest.add("steps", static_cast<std::int64_t>(steps));
    manifest.add("substeps", static_cast<std::int64_t>(substeps));
    manifest.add("h_min", window.h_min);
    manifest.add("h_max", window.h_max);
    manifest.add("theta", args.theta);
    manifest.add("margin", args.margin);
    manifest.add("x0", x0_text.empty() ? std::string("ones") : x0_text);

    fs::create_directories(args.out_dir);
    const fs::path csv_path = fs::path(args.out_dir) / "trajectory.csv";
    write_file(csv_path, "# manifest " + manifest.hash() + "\n" + traj.to_csv(cert));
    write_file(fs::path(args.out_dir) / "simulate_manifest.json", manifest.to_json());

    const double lyap0 = traj.samples.front().lyap;
    const double lyapN = traj.samples.back().lyap;
    std::cout << "simulate: " << schedule.size() << " steps, |x0|_T = "
              << format_double(lyap0, 6) << ", |x_N|_T = " << format_double(lyapN, 6) << "\n";
    std::cout << "simulate: trajectory written to " << csv_path.string() << "\n";
    if (!report.clean()) {
        std::cout << "simulate: LYAPUNOV VIOLATIONS: " << report.violations.size()
                  << " steps exceed the certified contraction\n";
        return kExitCertificateViolation;
    }
    std::cout << "simulate: lyapunov check clean (max step ratio "
              << format_double(report.max_ratio, 6) << ")\n";
    return 0;
}

int cmd_verify(const CommonArgs& args, const Inputs& in, int refinement) {
    const std::string& config_text = in.config_text;
    const std::string& cert_text = in.cert_text;
    const PlantConfig& cfg = *in.cfg;
    const DesignCertificate& cert = *in.cert;

    const VerifyReport report = verify_certificate(cfg.plant, cert, refinement);

    Manifest manifest("verify");
    manifest.add("config_path", args.config_path);
    manifest.add("config_hash", fnv1a_hex(config_text));
    manifest.add("cert_path", args.cert_path);
    manifest.add("cert_hash", fnv1a_hex(cert_text));
    manifest.add("refinement", static_cast<std::int64_t>(refinement));

    fs::create_directories(args.out_dir);
    write_file(fs::path(args.out_dir) / "verify_manifest.json", manifest.to_json());

    std::cout << "verify: " << report.probes << " probes over (0, "
              << format_double(cert.h_star, 12) << "]\n";
    if (!report.clean()) {
        std::cout << "verify: CERTIFICATE VIOLATIONS: " << report.violations.size() << "\n";
        for (std::size_t i = 0; i < report.violations.size() && i < 10; ++i) {
            std::cout << "  h = " << format_double(report.violations[i].h, 12)
                      << "  sigma_bar = " << format_double(report.violations[i].sigma_bar, 12)
                      << "\n";
        }
        return kExitCertificateViolation;
    }
    std::cout << "verify: clean (no probe at or above gamma)\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"nustab: stabilizing state feedback for nonuniformly sampled LTI plants "
                 "via singular value assignment"};
    app.set_version_flag("--version", std::string("nustab ") + kVersion);
    app.require_subcommand(1);

    CommonArgs args;

    auto* design_cmd = app.add_subcommand(
        "design", "Design the gain schedule basis and certify the maximum period");
    design_cmd->add_option("--config", args.config_path, "Plant configuration file")->required();
    design_cmd->add_option("--out-dir", args.out_dir, "Output directory");
    auto* gamma_opt = design_cmd->add_option("--gamma", args.gamma,
                                             "Contraction threshold in (0, 1]");
    design_cmd->add_option("--theta", args.theta, "Target placement fraction in (0, 1)");
    design_cmd->add_option("--margin", args.margin, "Safety margin below the ceiling");
    design_cmd->add_option("--grid", args.grid, "Coarse grid points for the period search");
    design_cmd->add_option("--tol-h", args.tol_h, "Bisection tolerance for the period bound");
    std::optional<double> design_h_hi;
    double design_h_hi_val = 0.0;
    auto* h_hi_opt = design_cmd->add_option("--h-hi", design_h_hi_val,
                                            "Upper end of the period search (default 10/min|D|)");

    auto* sweep_cmd = app.add_subcommand("sweep", "Tabulate residual singular values over a period grid");
    sweep_cmd->add_option("--config", args.config_path, "Plant configuration file")->required();
    sweep_cmd->add_option("--cert", args.cert_path, "Certificate file")->required();
    sweep_cmd->add_option("--out-dir", args.out_dir, "Output directory");
    double sweep_lo = 0.01, sweep_hi = 1.0;
    int sweep_steps = 100;
    sweep_cmd->add_option("--h-lo", sweep_lo, "Grid start")->required();
    sweep_cmd->add_option("--h-hi", sweep_hi, "Grid end")->required();
    sweep_cmd->add_option("--steps", sweep_steps, "Grid points");

    auto* sim_cmd = app.add_subcommand("simulate", "Run the closed loop under a sampling schedule");
    sim_cmd->add_option("--config", args.config_path, "Plant configuration file")->required();
    sim_cmd->add_option("--cert", args.cert_path, "Certificate file")->required();
    sim_cmd->add_option("--out-dir", args.out_dir, "Output directory");
    std::string schedule_text = "uniform_random";
    std::uint64_t seed = 0;
    int sim_steps = 100;
    int substeps = 20;
    std::string x0_text;
    std::optional<double> sim_h_min, sim_h_max;
    double sim_h_min_val = 0.0, sim_h_max_val = 0.0;
    sim_cmd->add_option("--schedule", schedule_text,
                        "uniform_random | constant:<h> | sweep_up | worst_case_grid");
    sim_cmd->add_option("--seed", seed, "Schedule RNG seed");
    sim_cmd->add_option("--steps", sim_steps, "Number of sampling intervals");
    sim_cmd->add_option("--substeps", substeps, "Intersample points per interval");
    sim_cmd->add_option("--x0", x0_text, "Initial state, comma separated (default: ones)");
    auto* hmin_opt = sim_cmd->add_option("--h-min", sim_h_min_val, "Window lower bound");
    auto* hmax_opt = sim_cmd->add_option("--h-max", sim_h_max_val, "Window upper bound");
    sim_cmd->add_option("--theta", args.theta, "Target placement fraction in (0, 1)");
    sim_cmd->add_option("--margin", args.margin, "Safety margin below the ceiling");

    auto* verify_cmd = app.add_subcommand("verify", "Re-probe a certificate on a finer grid");
    verify_cmd->add_option("--config", args.config_path, "Plant configuration file")->required();
    verify_cmd->add_option("--cert", args.cert_path, "Certificate file")->required();
    verify_cmd->add_option("--out-dir", args.out_dir, "Output directory");
    int refinement = 8;
    verify_cmd->add_option("--refinement", refinement, "Grid refinement factor");

    CLI11_PARSE(app, argc, argv);

    args.gamma_set = gamma_opt->count() > 0;
    if (h_hi_opt->count() > 0) design_h_hi = design_h_hi_val;
    if (hmin_opt->count() > 0) sim_h_min = sim_h_min_val;
    if (hmax_opt->count() > 0) sim_h_max = sim_h_max_val;

    Inputs inputs;
    try {
        inputs = load_inputs(args.config_path, design_cmd->parsed() ? "" : args.cert_path);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }

    try {
        if (design_cmd->parsed()) return cmd_design(args, inputs, design_h_hi);
        if (sweep_cmd->parsed()) return cmd_sweep(args, inputs, sweep_lo, sweep_hi, sweep_steps);
        if (sim_cmd->parsed()) {
            return cmd_simulate(args, inputs, schedule_text, seed, sim_steps, x0_text, substeps,
                                sim_h_min, sim_h_max);
        }
        if (verify_cmd->parsed()) return cmd_verify(args, inputs, refinement);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return classify(e);
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitSynthesis;
    }
    return 0;
}
