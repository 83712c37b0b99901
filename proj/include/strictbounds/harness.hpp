#pragma once

// Study orchestration: runs one benchmark case over a mesh family and a list
// of scaling-parameter values, computes certified bounds per row, fits
// convergence rates, runs the independent finite-difference oracle, and emits
// the CSV / plot series consumed by the command line tool.
//
// Cases (parameter derivatives of a quantity of interest):
//   frame-J1     d(sway)/d(beam stiffness)        portal frame
//   frame-J2     d(joint rotation)/d(load factor) portal frame
//   membrane-J1  d(region average)/d(diffusion)   membrane
//   membrane-J2  d(region average)/d(load width)  membrane

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "bounds.hpp"
#include "equilibration.hpp"
#include "forms.hpp"
#include "sensitivity.hpp"

namespace strictbounds {

enum class CaseId { frame_j1, frame_j2, membrane_j1, membrane_j2, custom };

inline std::string case_name(CaseId c) {
    switch (c) {
        case CaseId::frame_j1: return "frame-J1";
        case CaseId::frame_j2: return "frame-J2";
        case CaseId::membrane_j1: return "membrane-J1";
        case CaseId::membrane_j2: return "membrane-J2";
        case CaseId::custom: return "custom";
    }
    throw std::logic_error("case_name: unknown case");
}

inline CaseId parse_case(const std::string& s) {
    if (s == "frame-J1") return CaseId::frame_j1;
    if (s == "frame-J2") return CaseId::frame_j2;
    if (s == "membrane-J1") return CaseId::membrane_j1;
    if (s == "membrane-J2") return CaseId::membrane_j2;
    if (s == "custom") return CaseId::custom;
    throw std::invalid_argument("unknown case '" + s +
                                "' (expected frame-J1, frame-J2, membrane-J1, membrane-J2)");
}

struct CaseConfig {
    CaseId case_id = CaseId::frame_j1;
    std::vector<int> meshes;          // empty: per-case default
    std::vector<double> xis = {1.0};  // first entry is the reporting value
    int reference_mesh = 0;           // 0: per-case default
    double solver_tol = 1e-12;
    double equil_guard = 1e-10;
    std::string output_dir = "out";
    std::vector<double> oracle_deltas;  // empty: per-case default
    double oracle_tol = 0.005;
    std::array<double, 2> rate_window = {0.0, 0.0};  // {0,0}: per-case default
    // Used only when case_id == custom: problem builder (mesh, xi) and the
    // quantity of interest to extract.
    std::function<ParamProblem(int, double)> custom_problem;
    QoiKind custom_qoi = QoiKind::region_average;
};

inline bool is_frame(CaseId c) { return c == CaseId::frame_j1 || c == CaseId::frame_j2; }

inline void apply_defaults(CaseConfig& cfg) {
    const bool framelike = is_frame(cfg.case_id) || cfg.case_id == CaseId::custom;
    if (cfg.meshes.empty())
        cfg.meshes = framelike ? std::vector<int>{2, 4, 8, 16, 32}
                               : std::vector<int>{8, 16, 32, 64};
    if (cfg.reference_mesh == 0) cfg.reference_mesh = framelike ? 50 : 128;
    if (cfg.xis.empty()) cfg.xis = {1.0};
    if (cfg.oracle_deltas.empty())
        cfg.oracle_deltas = cfg.case_id == CaseId::membrane_j2
                                ? std::vector<double>{0.0625, 0.03125}
                                : std::vector<double>{0.08, 0.04, 0.02};
    if (cfg.rate_window[0] == 0.0 && cfg.rate_window[1] == 0.0)
        cfg.rate_window = framelike ? std::array<double, 2>{3.7, 4.3}
                                    : std::array<double, 2>{1.8, 2.2};
    // config invariants: a strictly refining mesh family and a finer reference
    for (std::size_t i = 0; i + 1 < cfg.meshes.size(); ++i)
        if (cfg.meshes[i] >= cfg.meshes[i + 1])
            throw std::invalid_argument("CaseConfig: mesh sizes must be strictly refining");
    if (!cfg.meshes.empty() && cfg.meshes.front() < 1)
        throw std::invalid_argument("CaseConfig: mesh subdivision counts must be positive");
    if (!cfg.meshes.empty() && cfg.reference_mesh <= cfg.meshes.back())
        throw std::invalid_argument("CaseConfig: reference mesh must be finer than all study meshes");
    if (cfg.case_id == CaseId::custom && !cfg.custom_problem)
        throw std::invalid_argument("CaseConfig: the custom case requires a problem builder");
}

inline ParamProblem make_case_problem_at(CaseId c, int mesh, double xi, double beta1,
                                         double beta2) {
    switch (c) {
        case CaseId::frame_j1: return make_frame_problem(ActiveParam::beta1, mesh, xi, beta1, beta2);
        case CaseId::frame_j2: return make_frame_problem(ActiveParam::beta2, mesh, xi, beta1, beta2);
        case CaseId::membrane_j1:
            return make_membrane_problem(ActiveParam::beta1, mesh, xi, beta1, beta2);
        case CaseId::membrane_j2:
            return make_membrane_problem(ActiveParam::beta2, mesh, xi, beta1, beta2);
        case CaseId::custom: break;
    }
    throw std::logic_error("make_case_problem_at: no factory for this case");
}

inline ParamProblem make_case_problem(CaseId c, int mesh, double xi) {
    return make_case_problem_at(c, mesh, xi, 1.0, is_frame(c) ? 1.0 : 0.125);
}

inline QoiKind case_qoi(CaseId c) {
    switch (c) {
        case CaseId::frame_j1: return QoiKind::sway;
        case CaseId::frame_j2: return QoiKind::rotation_b;
        default: return QoiKind::region_average;
    }
}

struct StudyRow {
    int mesh = 0;
    double h = 0, xi = 0, j_h = 0, lower = 0, upper = 0, gap = 0;
    double re_jh = 0, re_gap = 0, solver_res = 0, equil_res = 0;
    bool equil_ok = true, strict_ok = true;
    std::string error;  // nonempty when a stage failed for this row
};

struct StudyResult {
    CaseConfig config;
    double j_ref = 0.0;
    std::vector<StudyRow> rows;
    double rate_gap = std::numeric_limits<double>::quiet_NaN();
    double rate_re = std::numeric_limits<double>::quiet_NaN();
    bool all_strict = true;
    bool all_equil = true;
};

// Least-squares slope of log(y) against log(h); all inputs must be positive.
inline double fit_rate(const std::vector<double>& h, const std::vector<double>& y) {
    if (h.size() != y.size() || h.size() < 3)
        throw std::invalid_argument("fit_rate: need at least three samples");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        if (h[i] <= 0.0 || y[i] <= 0.0)
            throw std::invalid_argument("fit_rate: samples must be positive");
        const double lx = std::log(h[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double n = static_cast<double>(h.size());
    const double denom = n * sxx - sx * sx;
    if (denom == 0.0) throw std::invalid_argument("fit_rate: degenerate abscissae");
    return (n * sxy - sx * sy) / denom;
}

inline ParamProblem build_problem(const CaseConfig& cfg, int mesh, double xi) {
    if (cfg.case_id == CaseId::custom) return cfg.custom_problem(mesh, xi);
    return make_case_problem(cfg.case_id, mesh, xi);
}

inline QoiKind config_qoi(const CaseConfig& cfg) {
    return cfg.case_id == CaseId::custom ? cfg.custom_qoi : case_qoi(cfg.case_id);
}

inline StudyResult run_case(const CaseConfig& cfg_in) {
    CaseConfig cfg = cfg_in;
    apply_defaults(cfg);
    StudyResult out;
    out.config = cfg;

    {
        const ParamProblem pref = build_problem(cfg, cfg.reference_mesh, 1.0);
        const AssembledSystem sys = assemble_system(pref, config_qoi(cfg));
        const FieldPair pp = solve_primal_pair(pref, sys, cfg.solver_tol);
        out.j_ref = evaluate_qoi(sys, pp);
    }

    for (const int n : cfg.meshes)
        for (const double xi : cfg.xis) {
            StudyRow row;
            row.mesh = n;
            row.h = 1.0 / n;
            row.xi = xi;
            try {
                const ParamProblem p = build_problem(cfg, n, xi);
                const AssembledSystem sys = assemble_system(p, config_qoi(cfg));
                const FieldPair pp = solve_primal_pair(p, sys, cfg.solver_tol);
                const FieldPair pd = solve_adjoint_pair(p, sys, cfg.solver_tol);
                const double j_h = evaluate_qoi(sys, pp);
                const AdmissibleResidualPair ap = build_admissible_pair(p, sys, pp);
                const AdmissibleResidualPair ad = build_admissible_pair(p, sys, pd);
                BoundsReport b = sensitivity_bounds(p, sys, j_h, ap, ad);

                row.j_h = j_h;
                row.lower = b.lower;
                row.upper = b.upper;
                row.gap = b.gap;
                row.re_jh = std::abs(out.j_ref - j_h) / std::abs(out.j_ref);
                row.re_gap = b.gap / std::abs(out.j_ref);
                row.solver_res = std::max(pp.solver_residual, pd.solver_residual);
                row.equil_res = b.equil_residual;
                row.equil_ok = b.equil_residual <= cfg.equil_guard;
                row.strict_ok = (b.lower <= out.j_ref) && (out.j_ref <= b.upper);
            } catch (const std::exception& e) {
                row.error = e.what();
                row.equil_ok = false;
                row.strict_ok = false;
            }
            out.rows.push_back(row);
            out.all_strict = out.all_strict && row.strict_ok;
            out.all_equil = out.all_equil && row.equil_ok;
        }

    // convergence rates over the three finest meshes at the reporting xi,
    // excluding failed rows and rows that violated the equilibrium guard
    std::vector<StudyRow> fitrows;
    for (const auto& r : out.rows)
        if (r.xi == cfg.xis.front() && r.equil_ok && r.error.empty()) fitrows.push_back(r);
    std::sort(fitrows.begin(), fitrows.end(),
              [](const StudyRow& a, const StudyRow& b) { return a.h < b.h; });
    if (fitrows.size() > 3) fitrows.resize(3);
    if (fitrows.size() >= 3) {
        std::vector<double> hs, gaps, res;
        bool re_ok = true;
        for (const auto& r : fitrows) {
            hs.push_back(r.h);
            gaps.push_back(r.gap);
            res.push_back(r.re_jh);
            re_ok = re_ok && r.re_jh > 0.0;
        }
        out.rate_gap = fit_rate(hs, gaps);
        if (re_ok) out.rate_re = fit_rate(hs, res);
    }
    return out;
}

// ---------------------------------------------------------------------------
// finite-difference oracle
// ---------------------------------------------------------------------------

struct FdResult {
    std::vector<double> deltas;
    std::vector<double> values;   // central differences of the base quantity
    double extrapolated = 0.0;    // Richardson extrapolation from the two finest
};

// Central differences of a scalar function around beta0, one per step size,
// with Richardson extrapolation of the two finest estimates.
template <class F>
inline FdResult fd_differences(F&& value_at, double beta0, const std::vector<double>& deltas) {
    if (deltas.size() < 2)
        throw std::invalid_argument("fd_differences: need at least two step sizes");
    FdResult out;
    for (const double d : deltas) {
        if (d <= 0.0) throw std::invalid_argument("fd_differences: step sizes must be positive");
        out.deltas.push_back(d);
        out.values.push_back((value_at(beta0 + d) - value_at(beta0 - d)) / (2.0 * d));
    }
    const std::size_t k = out.values.size();
    const double r = out.deltas[k - 2] / out.deltas[k - 1];
    out.extrapolated = (r * r * out.values[k - 1] - out.values[k - 2]) / (r * r - 1.0);
    return out;
}

inline FdResult fd_oracle(const CaseConfig& cfg_in, std::vector<double> deltas = {}) {
    CaseConfig cfg = cfg_in;
    apply_defaults(cfg);
    if (cfg.case_id == CaseId::custom)
        throw std::invalid_argument("fd_oracle: custom cases need fd_differences with a value function");
    if (deltas.empty()) deltas = cfg.oracle_deltas;

    const bool beta1_active =
        cfg.case_id == CaseId::frame_j1 || cfg.case_id == CaseId::membrane_j1;
    const double b1_mean = 1.0;
    const double b2_mean = is_frame(cfg.case_id) ? 1.0 : 0.125;

    auto value_at = [&](double beta) {
        const double b1 = beta1_active ? beta : b1_mean;
        const double b2 = beta1_active ? b2_mean : beta;
        const ParamProblem p = make_case_problem_at(cfg.case_id, cfg.reference_mesh, 1.0, b1, b2);
        const SymSparse K = assemble_operator(p, OperatorKind::stiffness);
        const Vector f = assemble_load(p, LoadKind::load);
        const Vector g = assemble_qoi(p, case_qoi(cfg.case_id));
        const Factorization fact(K);
        const Vector u = fact.solve(f, cfg.solver_tol);
        return g.dot(u);
    };
    return fd_differences(value_at, beta1_active ? b1_mean : b2_mean, deltas);
}

// ---------------------------------------------------------------------------
// output emission and re-parsing
// ---------------------------------------------------------------------------

inline std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline const char* kCsvHeader = "h,xi,J_h,lower,upper,gap,re_Jh,re_gap,solver_res,equil_res";

inline void emit_outputs(const StudyResult& res, const std::string& dir) {
    if (res.rows.empty()) throw std::invalid_argument("emit_outputs: empty study");
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const std::string base = dir + "/" + case_name(res.config.case_id);

    {
        std::ofstream csv(base + "_study.csv");
        if (!csv) throw std::runtime_error("emit_outputs: cannot write " + base + "_study.csv");
        csv << kCsvHeader << "\n";
        for (const auto& r : res.rows)
            csv << fmt17(r.h) << ',' << fmt17(r.xi) << ',' << fmt17(r.j_h) << ',' << fmt17(r.lower)
                << ',' << fmt17(r.upper) << ',' << fmt17(r.gap) << ',' << fmt17(r.re_jh) << ','
                << fmt17(r.re_gap) << ',' << fmt17(r.solver_res) << ',' << fmt17(r.equil_res)
                << "\n";
    }
    {
        std::ofstream s(base + "_summary.txt");
        s << "case " << case_name(res.config.case_id) << "\n";
        s << "j_ref " << fmt17(res.j_ref) << "\n";
        s << "rate_gap " << fmt17(res.rate_gap) << "\n";
        s << "rate_re " << fmt17(res.rate_re) << "\n";
        s << "strict " << (res.all_strict ? "pass" : "fail") << "\n";
        s << "equil " << (res.all_equil ? "pass" : "fail") << "\n";
        for (const auto& r : res.rows)
            if (!r.error.empty())
                s << "row_error mesh=" << r.mesh << " xi=" << fmt17(r.xi) << " " << r.error << "\n";
    }
    // one (x,y) series per file, rows at the reporting xi
    const double xi0 = res.config.xis.front();
    auto series = [&](const std::string& suffix, auto getter) {
        std::ofstream f(base + suffix);
        for (const auto& r : res.rows)
            if (r.xi == xi0) f << fmt17(r.h) << ' ' << fmt17(getter(r)) << "\n";
    };
    series("_fe.xy", [](const StudyRow& r) { return r.j_h; });
    series("_upper.xy", [](const StudyRow& r) { return r.upper; });
    series("_lower.xy", [](const StudyRow& r) { return r.lower; });
    series("_re_fe.xy", [](const StudyRow& r) { return r.re_jh; });
    series("_re_gap.xy", [](const StudyRow& r) { return r.re_gap; });
}

inline std::vector<StudyRow> read_study_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_study_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader)
        throw std::runtime_error("read_study_csv: missing or malformed header in " + path);
    std::vector<StudyRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> vals;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
        if (vals.size() != 10) throw std::runtime_error("read_study_csv: malformed row in " + path);
        StudyRow r;
        r.h = vals[0];
        r.xi = vals[1];
        r.j_h = vals[2];
        r.lower = vals[3];
        r.upper = vals[4];
        r.gap = vals[5];
        r.re_jh = vals[6];
        r.re_gap = vals[7];
        r.solver_res = vals[8];
        r.equil_res = vals[9];
        r.mesh = static_cast<int>(std::lround(1.0 / r.h));
        rows.push_back(r);
    }
    return rows;
}

// Plain-text study table for terminal output.
inline std::string render_table(const StudyResult& res) {
    std::ostringstream os;
    os << "case " << case_name(res.config.case_id) << "   j_ref(n=" << res.config.reference_mesh
       << ") = " << fmt17(res.j_ref) << "\n";
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%10s %6s %22s %22s %22s %12s %10s %10s\n", "h", "xi", "J_h",
                  "lower", "upper", "re_gap", "equil", "strict");
    os << buf;
    for (const auto& r : res.rows) {
        std::snprintf(buf, sizeof(buf), "%10.6f %6.3f %22.14e %22.14e %22.14e %12.4e %10s %10s\n",
                      r.h, r.xi, r.j_h, r.lower, r.upper, r.re_gap, r.equil_ok ? "ok" : "VIOLATED",
                      r.strict_ok ? "ok" : "FAIL");
        os << buf;
    }
    if (std::isfinite(res.rate_gap)) os << "fitted gap rate (three finest): " << res.rate_gap << "\n";
    if (std::isfinite(res.rate_re)) os << "fitted error rate (three finest): " << res.rate_re << "\n";
    return os.str();
}

}  // namespace strictbounds
