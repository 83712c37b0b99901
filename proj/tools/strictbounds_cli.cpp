// Command line front end.
//
// Verbs:
//   run       run one case over its mesh family, emit CSV + plot series,
//             exit 0 only if every row is a valid certified bracket
//   converge  run + require the fitted gap convergence rate to lie in the
//             expected window
//   oracle    compare the adjoint-based derivative on the reference mesh
//             against an independent central finite-difference derivative
//   report    re-parse a previously written CSV and re-check the bound
//             invariants without re-running any solves
//
// Output directory precedence: --output-dir flag, then the
// STRICTBOUNDS_OUTPUT_DIR environment variable, then the config file, then
// the default "out".

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include <strictbounds/strictbounds.hpp>

namespace sb = strictbounds;

namespace {

struct CliState {
    sb::CaseConfig cfg;
    std::string config_path;
    std::string case_str;
    std::string output_dir_flag;
    std::vector<int> meshes_flag;
    std::vector<double> xis_flag;
};

void load_config_file(const std::string& path, sb::CaseConfig& cfg, bool& case_from_file) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path);
    nlohmann::json j;
    in >> j;
    if (j.contains("case")) {
        cfg.case_id = sb::parse_case(j.at("case").get<std::string>());
        case_from_file = true;
    }
    if (j.contains("meshes")) cfg.meshes = j.at("meshes").get<std::vector<int>>();
    if (j.contains("xis")) cfg.xis = j.at("xis").get<std::vector<double>>();
    if (j.contains("reference_mesh")) cfg.reference_mesh = j.at("reference_mesh").get<int>();
    if (j.contains("solver_tol")) cfg.solver_tol = j.at("solver_tol").get<double>();
    if (j.contains("equil_guard")) cfg.equil_guard = j.at("equil_guard").get<double>();
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("oracle_deltas"))
        cfg.oracle_deltas = j.at("oracle_deltas").get<std::vector<double>>();
    if (j.contains("oracle_tol")) cfg.oracle_tol = j.at("oracle_tol").get<double>();
    if (j.contains("rate_window")) {
        auto w = j.at("rate_window").get<std::vector<double>>();
        if (w.size() != 2) throw std::runtime_error("rate_window must have two entries");
        cfg.rate_window = {w[0], w[1]};
    }
}

// Resolves config file, flags and environment into a final CaseConfig.
sb::CaseConfig resolve(const CliState& st) {
    sb::CaseConfig cfg;
    bool case_set = false;
    if (!st.config_path.empty()) load_config_file(st.config_path, cfg, case_set);
    if (!st.case_str.empty()) {
        cfg.case_id = sb::parse_case(st.case_str);
        case_set = true;
    }
    if (!case_set) throw std::runtime_error("no case selected (use --case or a config file)");
    if (!st.meshes_flag.empty()) cfg.meshes = st.meshes_flag;
    if (!st.xis_flag.empty()) cfg.xis = st.xis_flag;
    if (const char* env = std::getenv("STRICTBOUNDS_OUTPUT_DIR"); env && *env)
        cfg.output_dir = env;
    if (!st.output_dir_flag.empty()) cfg.output_dir = st.output_dir_flag;
    sb::apply_defaults(cfg);
    return cfg;
}

void add_common_options(CLI::App* cmd, CliState& st) {
    cmd->add_option("--case", st.case_str,
                    "benchmark case: frame-J1, frame-J2, membrane-J1, membrane-J2");
    cmd->add_option("--config", st.config_path, "JSON config file")->check(CLI::ExistingFile);
    cmd->add_option("--output-dir", st.output_dir_flag, "directory for CSV and plot series");
    cmd->add_option("--mesh", st.meshes_flag, "mesh subdivision counts (repeatable)");
    cmd->add_option("--xi", st.xis_flag, "scaling parameter values (repeatable)");
}

int verb_run(const CliState& st, bool check_rate) {
    const sb::CaseConfig cfg = resolve(st);
    const sb::StudyResult res = sb::run_case(cfg);
    std::cout << sb::render_table(res);
    sb::emit_outputs(res, cfg.output_dir);
    std::cout << "outputs written to " << cfg.output_dir << "/" << std::endl;

    bool ok = res.all_strict && res.all_equil;
    if (!res.all_strict) std::cout << "FAIL: some brackets do not contain the reference value\n";
    if (!res.all_equil) std::cout << "FAIL: some recovered fields violate the equilibrium guard\n";
    if (check_rate) {
        const bool rate_ok = std::isfinite(res.rate_gap) &&
                             res.rate_gap >= cfg.rate_window[0] &&
                             res.rate_gap <= cfg.rate_window[1];
        std::cout << "gap rate " << res.rate_gap << " expected in [" << cfg.rate_window[0] << ", "
                  << cfg.rate_window[1] << "]: " << (rate_ok ? "ok" : "FAIL") << std::endl;
        ok = ok && rate_ok;
    }
    return ok ? 0 : 1;
}

int verb_oracle(const CliState& st) {
    const sb::CaseConfig cfg = resolve(st);

    // adjoint-based value on the reference mesh
    const sb::ParamProblem p = sb::make_case_problem(cfg.case_id, cfg.reference_mesh, 1.0);
    const sb::AssembledSystem sys = sb::assemble_system(p, sb::case_qoi(cfg.case_id));
    const sb::FieldPair pp = sb::solve_primal_pair(p, sys, cfg.solver_tol);
    const double j_ref = sb::evaluate_qoi(sys, pp);

    const sb::FdResult fd = sb::fd_oracle(cfg);
    std::cout << "case " << sb::case_name(cfg.case_id) << " (reference mesh n="
              << cfg.reference_mesh << ")\n";
    for (std::size_t i = 0; i < fd.deltas.size(); ++i)
        std::cout << "  central difference, step " << fd.deltas[i] << ": "
                  << sb::fmt17(fd.values[i]) << "\n";
    std::cout << "  extrapolated:      " << sb::fmt17(fd.extrapolated) << "\n";
    std::cout << "  adjoint-based:     " << sb::fmt17(j_ref) << "\n";
    const double rel = std::abs(fd.extrapolated - j_ref) /
                       std::max(std::abs(fd.extrapolated), std::abs(j_ref));
    std::cout << "  relative difference " << rel << " (tolerance " << cfg.oracle_tol << ")\n";
    const bool ok = rel <= cfg.oracle_tol;
    std::cout << (ok ? "oracle agreement: ok" : "oracle agreement: FAIL") << std::endl;
    return ok ? 0 : 1;
}

int verb_report(const CliState& st) {
    const sb::CaseConfig cfg = resolve(st);
    const std::string base = cfg.output_dir + "/" + sb::case_name(cfg.case_id);
    const std::vector<sb::StudyRow> rows = sb::read_study_csv(base + "_study.csv");
    if (rows.empty()) throw std::runtime_error("no data rows in " + base + "_study.csv");

    // reference value from the summary file, if present
    double j_ref = std::numeric_limits<double>::quiet_NaN();
    {
        std::ifstream s(base + "_summary.txt");
        std::string key;
        while (s >> key) {
            std::string val;
            s >> val;
            if (key == "j_ref") j_ref = std::stod(val);
        }
    }

    bool ok = true;
    int i = 0;
    for (const auto& r : rows) {
        ++i;
        const double scale = std::max(std::abs(r.upper), std::abs(r.lower));
        if (!(r.lower <= r.upper)) {
            std::cout << "row " << i << ": lower > upper\n";
            ok = false;
        }
        if (std::abs((r.upper - r.lower) - r.gap) > 1e-12 * std::max(scale, r.gap)) {
            std::cout << "row " << i << ": gap does not equal upper - lower\n";
            ok = false;
        }
        if (r.gap < 0.0) {
            std::cout << "row " << i << ": negative gap\n";
            ok = false;
        }
        if (r.equil_res > cfg.equil_guard) {
            std::cout << "row " << i << ": equilibrium residual " << r.equil_res
                      << " above guard " << cfg.equil_guard << "\n";
            ok = false;
        }
        if (std::isfinite(j_ref) && !(r.lower <= j_ref && j_ref <= r.upper)) {
            std::cout << "row " << i << ": bracket does not contain reference value\n";
            ok = false;
        }
    }
    std::cout << "checked " << rows.size() << " rows from " << base << "_study.csv: "
              << (ok ? "all invariants hold" : "INVARIANT VIOLATIONS FOUND") << std::endl;
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"certified sensitivity bounds for parametrised linear finite element models"};
    app.require_subcommand(1);

    CliState st;
    CLI::App* run = app.add_subcommand("run", "run a case and write outputs");
    CLI::App* conv = app.add_subcommand("converge", "run a case and check the gap rate window");
    CLI::App* orac = app.add_subcommand("oracle", "finite-difference cross-check of the derivative");
    CLI::App* rep = app.add_subcommand("report", "re-check invariants from a written CSV");
    for (CLI::App* c : {run, conv, orac, rep}) add_common_options(c, st);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return verb_run(st, false);
        if (conv->parsed()) return verb_run(st, true);
        if (orac->parsed()) return verb_oracle(st);
        if (rep->parsed()) return verb_report(st);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 2;
    }
    return 2;
}
