#include "nustab/model.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <json.hpp>

#include <cmath>
#include <complex>
#include <sstream>

#include "nustab/numfmt.hpp"

namespace nustab {

namespace {

constexpr double kStabilizabilityShift = 1e-9;  // eigenvalues this close to the axis count as unstable
constexpr double kRankFloor = 1e-12;

using Json = nlohmann::json;

Matrix parse_matrix(const Json& j, const std::string& key) {
    if (!j.is_array() || j.empty()) {
        throw ParseError("key '" + key + "' must be a non-empty array of rows");
    }
    const std::size_t rows = j.size();
    std::size_t cols = 0;
    for (std::size_t r = 0; r < rows; ++r) {
        const Json& row = j[r];
        if (!row.is_array() || row.empty()) {
            throw ParseError("key '" + key + "', row " + std::to_string(r) +
                             ": expected a non-empty array of numbers");
        }
        if (r == 0) {
            cols = row.size();
        } else if (row.size() != cols) {
            throw DimensionError("key '" + key + "': ragged rows (row " + std::to_string(r) +
                                 " has " + std::to_string(row.size()) + " entries, expected " +
                                 std::to_string(cols) + ")");
        }
    }
    Matrix M(static_cast<Index>(rows), static_cast<Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const Json& v = j[r][c];
            if (!v.is_number()) {
                throw ParseError("key '" + key + "': non-numeric entry at (" +
                                 std::to_string(r) + "," + std::to_string(c) + ")");
            }
            M(static_cast<Index>(r), static_cast<Index>(c)) = v.get<double>();
        }
    }
    return M;
}

Vector parse_vector(const Json& j, const std::string& key) {
    if (!j.is_array() || j.empty()) {
        throw ParseError("key '" + key + "' must be a non-empty array of numbers");
    }
    Vector v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) {
            throw ParseError("key '" + key + "': non-numeric entry at index " + std::to_string(i));
        }
        v(static_cast<Index>(i)) = j[i].get<double>();
    }
    return v;
}

double parse_number(const Json& j, const std::string& key) {
    if (!j.is_number()) throw ParseError("key '" + key + "' must be a number");
    return j.get<double>();
}

void append_matrix(std::ostringstream& out, const Matrix& M) {
    out << "[";
    for (Index r = 0; r < M.rows(); ++r) {
        if (r > 0) out << ",";
        out << "[";
        for (Index c = 0; c < M.cols(); ++c) {
            if (c > 0) out << ",";
            out << format_double(M(r, c), 17);
        }
        out << "]";
    }
    out << "]";
}

void append_vector(std::ostringstream& out, const Vector& v) {
    out << "[";
    for (Index i = 0; i < v.size(); ++i) {
        if (i > 0) out << ",";
        out << format_double(v(i), 17);
    }
    out << "]";
}

} // namespace

Index numerical_rank(const Matrix& X) {
    if (X.size() == 0) return 0;
    Eigen::JacobiSVD<Matrix> svd(X);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0) return 0;
    const double thresh =
        static_cast<double>(std::max(X.rows(), X.cols())) * sv(0) * kRankFloor;
    Index rank = 0;
    for (Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > thresh) ++rank;
    }
    return rank;
}

ContinuousPlant::ContinuousPlant(Matrix A, Matrix B) : A_(std::move(A)), B_(std::move(B)) {
    const Index n = A_.rows();
    const Index m = B_.cols();
    if (n < 1 || A_.cols() != n) {
        throw DimensionError("A must be square with n >= 1 (got " + std::to_string(A_.rows()) +
                             "x" + std::to_string(A_.cols()) + ")");
    }
    if (B_.rows() != n || m < 1 || m > n) {
        throw DimensionError("B must be n x m with 1 <= m <= n (got " + std::to_string(B_.rows()) +
                             "x" + std::to_string(m) + " against n = " + std::to_string(n) + ")");
    }
    if (!A_.allFinite() || !B_.allFinite()) {
        throw ParseError("plant matrices must have finite entries");
    }
    if (numerical_rank(B_) != m) {
        throw RankError("B must have full column rank m = " + std::to_string(m));
    }
    if (!pbh_stabilizable(A_, B_)) {
        throw StabilizabilityError("(A, B) fails the PBH stabilizability test");
    }
}

bool pbh_stabilizable(const Matrix& A, const Matrix& B) {
    const Index n = A.rows();
    const Index m = B.cols();
    Eigen::EigenSolver<Matrix> es(A, /*computeEigenvectors=*/false);
    using CMatrix = Eigen::MatrixXcd;
    for (Index i = 0; i < n; ++i) {
        const std::complex<double> lambda = es.eigenvalues()(i);
        if (lambda.real() < -kStabilizabilityShift) continue;
        CMatrix pencil(n, n + m);
        pencil.leftCols(n) = lambda * CMatrix::Identity(n, n) - A.cast<std::complex<double>>();
        pencil.rightCols(m) = B.cast<std::complex<double>>();
        Eigen::JacobiSVD<CMatrix> svd(pencil);
        const auto& sv = svd.singularValues();
        const double thresh =
            static_cast<double>(std::max(pencil.rows(), pencil.cols())) * sv(0) * kRankFloor;
        Index rank = 0;
        for (Index k = 0; k < sv.size(); ++k) {
            if (sv(k) > thresh) ++rank;
        }
        if (rank < n) return false;
    }
    return true;
}

bool pbh_stabilizable(const ContinuousPlant& plant) {
    return pbh_stabilizable(plant.A(), plant.B());
}

SamplingWindow::SamplingWindow(double lo, double hi) : h_min(lo), h_max(hi) {
    if (!(lo > 0.0) || !(hi >= lo)) {
        throw WindowError("sampling window requires 0 < h_min <= h_max (got [" +
                          format_double(lo, 17) + ", " + format_double(hi, 17) + "])");
    }
}

SamplingSchedule::SamplingSchedule(std::vector<double> h) : periods(std::move(h)) {
    for (std::size_t k = 0; k < periods.size(); ++k) {
        if (!(periods[k] > 0.0)) {
            throw WindowError("schedule period h_" + std::to_string(k) + " must be positive");
        }
    }
}

std::vector<double> SamplingSchedule::instants() const {
    std::vector<double> t(periods.size() + 1, 0.0);
    for (std::size_t k = 0; k < periods.size(); ++k) t[k + 1] = t[k] + periods[k];
    return t;
}

void validate_certificate(const ContinuousPlant& plant, const DesignCertificate& cert) {
    const Index n = plant.n();
    const Index m = plant.m();
    if (cert.T.rows() != n || cert.T.cols() != n || cert.T_inv.rows() != n ||
        cert.T_inv.cols() != n || cert.K_c.rows() != m || cert.K_c.cols() != n ||
        cert.D.size() != n) {
        throw DimensionError("certificate dimensions do not match the plant");
    }
    const double inv_err = ((cert.T * cert.T_inv) - Matrix::Identity(n, n)).cwiseAbs().maxCoeff();
    if (inv_err > 1e-10) {
        throw PostCheckError("certificate violates ||T*T_inv - I|| <= 1e-10 (got " +
                             format_double(inv_err, 6) + ")");
    }
    const Matrix closed = plant.A() + plant.B() * cert.K_c;
    const Matrix diag_err =
        cert.T_inv * closed * cert.T - Matrix(cert.D.asDiagonal());
    if (diag_err.cwiseAbs().maxCoeff() > 1e-8) {
        throw PostCheckError("certificate transform does not diagonalize A + B*K_c to 1e-8");
    }
    for (Index i = 0; i < n; ++i) {
        if (!(cert.D(i) < 0.0)) {
            throw SpectrumError("certificate D must be strictly negative");
        }
        if (i > 0 && !(cert.D(i) > cert.D(i - 1))) {
            throw SpectrumError("certificate D must be ascending and pairwise distinct");
        }
    }
    if (!(cert.h_star > 0.0)) throw PostCheckError("certificate h_star must be positive");
    if (!(cert.gamma > 0.0 && cert.gamma <= 1.0)) {
        throw PostCheckError("certificate gamma must lie in (0, 1]");
    }
}

PlantConfig parse_config(const std::string& config_text) {
    Json j;
    try {
        j = Json::parse(config_text);
    } catch (const Json::parse_error& e) {
        throw ParseError(std::string("malformed configuration: ") + e.what());
    }
    if (!j.is_object()) throw ParseError("configuration root must be an object");

    static const char* known[] = {"A", "B", "h_min", "h_max", "gamma", "poles", "K_c"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known) {
            if (it.key() == k) { ok = true; break; }
        }
        if (!ok) throw ParseError("unknown configuration key '" + it.key() + "'");
    }
    if (!j.contains("A") || !j.contains("B")) {
        throw ParseError("configuration requires keys 'A' and 'B'");
    }

    Matrix A = parse_matrix(j["A"], "A");
    Matrix B = parse_matrix(j["B"], "B");
    if (A.rows() != A.cols()) {
        throw DimensionError("A must be square (got " + std::to_string(A.rows()) + "x" +
                             std::to_string(A.cols()) + ")");
    }
    if (B.rows() != A.rows()) {
        throw DimensionError("B must have n = " + std::to_string(A.rows()) + " rows (got " +
                             std::to_string(B.rows()) + ")");
    }

    ContinuousPlant plant(std::move(A), std::move(B));

    PlantConfig cfg{std::move(plant), std::nullopt, std::nullopt, std::nullopt, std::nullopt};

    const bool has_min = j.contains("h_min");
    const bool has_max = j.contains("h_max");
    if (has_min != has_max) {
        throw ParseError("'h_min' and 'h_max' must be given together");
    }
    if (has_min) {
        cfg.window.emplace(parse_number(j["h_min"], "h_min"), parse_number(j["h_max"], "h_max"));
    }
    if (j.contains("gamma")) {
        double g = parse_number(j["gamma"], "gamma");
        if (!(g > 0.0 && g <= 1.0)) throw ParseError("'gamma' must lie in (0, 1]");
        cfg.gamma = g;
    }
    if (j.contains("poles")) {
        Vector p = parse_vector(j["poles"], "poles");
        if (p.size() != cfg.plant.n()) {
            throw DimensionError("'poles' must list exactly n = " +
                                 std::to_string(cfg.plant.n()) + " values");
        }
        cfg.poles = std::move(p);
    }
    if (j.contains("K_c")) {
        Matrix K = parse_matrix(j["K_c"], "K_c");
        if (K.rows() != cfg.plant.m() || K.cols() != cfg.plant.n()) {
            throw DimensionError("'K_c' must be m x n = " + std::to_string(cfg.plant.m()) + "x" +
                                 std::to_string(cfg.plant.n()));
        }
        cfg.K_c = std::move(K);
    }
    return cfg;
}

ContinuousPlant load_plant(const std::string& config_text) {
    return parse_config(config_text).plant;
}

std::string serialize(const ContinuousPlant& plant) {
    std::ostringstream out;
    out << "{\"A\":";
    append_matrix(out, plant.A());
    out << ",\"B\":";
    append_matrix(out, plant.B());
    out << "}\n";
    return out.str();
}

std::string serialize(const DesignCertificate& cert, const std::string& manifest_hash) {
    std::ostringstream out;
    out << "{\n";
    if (!manifest_hash.empty()) {
        out << "  \"manifest\": \"" << manifest_hash << "\",\n";
    }
    out << "  \"T\": ";
    append_matrix(out, cert.T);
    out << ",\n  \"T_inv\": ";
    append_matrix(out, cert.T_inv);
    out << ",\n  \"K_c\": ";
    append_matrix(out, cert.K_c);
    out << ",\n  \"D\": ";
    append_vector(out, cert.D);
    out << ",\n  \"h_star\": " << format_double(cert.h_star, 17);
    out << ",\n  \"gamma\": " << format_double(cert.gamma, 17);
    out << ",\n  \"cond_T\": " << format_double(cert.cond_T, 17);
    out << ",\n  \"right_censored\": " << (cert.right_censored ? "true" : "false");
    out << ",\n  \"grid\": {\"coarse_points\": " << cert.grid.coarse_points
        << ", \"h_hi\": " << format_double(cert.grid.h_hi, 17)
        << ", \"tol_h\": " << format_double(cert.grid.tol_h, 17) << "}\n";
    out << "}\n";
    return out.str();
}

DesignCertificate parse_certificate(const std::string& text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ParseError(std::string("malformed certificate: ") + e.what());
    }
    if (!j.is_object()) throw ParseError("certificate root must be an object");
    for (const char* key : {"T", "T_inv", "K_c", "D", "h_star", "gamma", "cond_T", "grid"}) {
        if (!j.contains(key)) throw ParseError(std::string("certificate missing key '") + key + "'");
    }
    DesignCertificate cert;
    cert.T = parse_matrix(j["T"], "T");
    cert.T_inv = parse_matrix(j["T_inv"], "T_inv");
    cert.K_c = parse_matrix(j["K_c"], "K_c");
    cert.D = parse_vector(j["D"], "D");
    cert.h_star = parse_number(j["h_star"], "h_star");
    cert.gamma = parse_number(j["gamma"], "gamma");
    cert.cond_T = parse_number(j["cond_T"], "cond_T");
    cert.right_censored = j.value("right_censored", false);
    const Json& g = j["grid"];
    if (!g.is_object()) throw ParseError("certificate 'grid' must be an object");
    cert.grid.coarse_points = g.value("coarse_points", 256);
    cert.grid.h_hi = g.value("h_hi", 0.0);
    cert.grid.tol_h = g.value("tol_h", 1e-4);
    return cert;
}

} // namespace nustab
