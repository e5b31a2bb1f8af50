// qpsl: spectral toolbox for quasi-periodic lattice operators with decaying
// perturbations. Subcommands: run, scan-ids, scan-lyapunov, green, gap-count,
// check-identities, report.
//
// Exit codes: 0 all asserted checks pass, 1 assertion failure, 2 config or
// usage error.

#include <filesystem>
#include <fstream>
#include <limits>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "qpsl/cocycle.hpp"
#include "qpsl/config.hpp"
#include "qpsl/errors.hpp"
#include "qpsl/experiments.hpp"
#include "qpsl/numeric.hpp"
#include "qpsl/oscillation.hpp"
#include "qpsl/spectral.hpp"

using json = nlohmann::json;
using namespace qpsl;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitAssertionFailure = 1;
constexpr int kExitConfigError = 2;

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    bool emit_json = false;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
};

RunConfig load_with_overrides(const CommonArgs& args) {
    RunConfig cfg = load_config_file(args.config_path);
    if (!args.out_dir.empty()) cfg.output_dir = args.out_dir;
    if (args.seed) cfg.seed = *args.seed;
    if (args.threads) cfg.threads = *args.threads;
    num::set_thread_count(cfg.threads);
    return cfg;
}

// energies are reported with their IDS value and gap label whenever the
// operator admits them (the gap-labeled coordinate is stable across runs)
json energy_record(const OperatorSpec& op, double E, std::int64_t box, int kmax, double tol) {
    json rec;
    rec["E"] = E;
    try {
        const double n = ids(op.without_perturbation(), E, box, 1);
        rec["ids"] = n;
        const auto label = gap_label(n, op.potential.alpha()[0], kmax, tol);
        if (label) rec["gap_label"] = *label;
    } catch (const Error&) {
        // ids unavailable (e.g. perturbed table operator); leave fields out
    }
    return rec;
}

int finish(const RunReport& report, const RunConfig& cfg, bool emit_json) {
    RunReport r = report;
    for (const auto& note : cfg.notes) r.notes.push_back(note);
    if (!cfg.output_dir.empty()) {
        const std::string path = write_report(r, cfg.output_dir);
        if (!emit_json) std::cout << "report: " << path << "\n";
    }
    if (emit_json) {
        std::cout << r.to_json() << "\n";
    } else {
        for (const auto& a : r.assertions) {
            std::cout << (a.pass ? "PASS " : "FAIL ") << a.name << ": measured=" << a.measured
                      << " expected=" << a.expected << " tol=" << a.tolerance;
            if (!a.note.empty()) std::cout << "  (" << a.note << ")";
            std::cout << "\n";
        }
        std::cout << (r.all_pass() ? "all checks passed" : "SOME CHECKS FAILED") << "\n";
    }
    return r.all_pass() ? kExitPass : kExitAssertionFailure;
}

ScenarioOptions options_from(const RunConfig& cfg) {
    ScenarioOptions opts;
    opts.out_dir = cfg.output_dir;
    opts.seed = cfg.seed;
    opts.threads = cfg.threads;
    opts.params = cfg.params;
    return opts;
}

int cmd_run(const CommonArgs& args) {
    const RunConfig cfg = load_with_overrides(args);
    const ScenarioOptions opts = options_from(cfg);
    const double coupling = cfg.op.potential.coupling();

    RunReport report;
    if (cfg.scenario == "appendix") {
        report = run_appendix_example(opts);
    } else if (cfg.scenario == "subcritical_ac") {
        report = run_subcritical_ac_indicators(coupling, cfg.op.perturbation, opts);
    } else if (cfg.scenario == "localization") {
        report = run_localization_scenario(coupling, cfg.op.perturbation, opts);
    } else if (cfg.scenario == "ldt") {
        report = run_ldt_measurement(coupling, cfg.params.count("e") ? cfg.params.at("e") : 0.0,
                                     static_cast<std::int64_t>(opts.param("n", 100)),
                                     opts.param("eps", 0.1),
                                     static_cast<int>(opts.param("theta_samples", 1000)), opts);
    } else if (cfg.scenario == "gap_edge") {
        report = run_gap_edge_scenario(coupling == 0.0 ? 0.2 : coupling, opts);
    } else {
        throw ConfigError("unknown scenario '" + cfg.scenario +
                          "' (expect appendix | subcritical_ac | localization | ldt | gap_edge)");
    }
    return finish(report, cfg, args.emit_json);
}

std::string write_table(const std::string& dir, const std::string& name,
                        const std::vector<std::string>& columns,
                        const std::vector<std::vector<double>>& rows) {
    // gnuplot-ready whitespace table
    std::filesystem::create_directories(dir);
    const std::string path = dir + "/" + name;
    std::ofstream out(path);
    out.precision(17);
    out << "#";
    for (const auto& c : columns) out << " " << c;
    out << "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? " " : "") << row[i];
        out << "\n";
    }
    return path;
}

int cmd_scan_ids(const CommonArgs& args, double e_min, double e_max, int grid, std::int64_t box,
                 int theta_grid, bool gnuplot) {
    const RunConfig cfg = load_with_overrides(args);
    const OperatorSpec op0 = cfg.op.without_perturbation();
    const IdsCurve curve = ids_curve(op0, e_min, e_max, grid, box, theta_grid);
    const auto gaps = detect_gaps(curve, op0.potential.alpha()[0], 30, 1e-3,
                                  std::max(2.0 / static_cast<double>(box), 1e-3));

    json out;
    out["curve"] = json::array();
    for (std::size_t i = 0; i < curve.energies.size(); ++i) {
        json rec = {{"E", curve.energies[i]}, {"ids", curve.values[i]}};
        out["curve"].push_back(rec);
    }
    out["gaps"] = json::array();
    for (const auto& g : gaps) {
        json rec = {{"e_lo", g.e_lo}, {"e_hi", g.e_hi}, {"ids", g.ids_value}};
        if (g.label) rec["gap_label"] = *g.label;
        out["gaps"].push_back(rec);
    }
    if (!cfg.output_dir.empty()) {
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < curve.energies.size(); ++i)
            rows.push_back({curve.energies[i], curve.values[i]});
        const std::string path =
            gnuplot ? write_table(cfg.output_dir, "ids_scan.dat", {"E", "N"}, rows)
                    : write_csv(cfg.output_dir, "ids_scan.csv", {"E", "N"}, rows);
        out["artifacts"] = {path};
    }
    if (args.emit_json)
        std::cout << out.dump(2) << "\n";
    else
        std::cout << "scanned " << curve.energies.size() << " energies, " << gaps.size()
                  << " gaps detected\n";
    return kExitPass;
}

int cmd_scan_lyapunov(const CommonArgs& args, double e_min, double e_max, int grid,
                      std::int64_t k, int theta_grid, std::int64_t ids_box, bool gnuplot) {
    const RunConfig cfg = load_with_overrides(args);
    const OperatorSpec op0 = cfg.op.without_perturbation();

    json out = json::array();
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < grid; ++i) {
        const double E =
            e_min + (e_max - e_min) * static_cast<double>(i) / static_cast<double>(grid - 1);
        const double L = lyapunov(op0, E, k, theta_grid);
        json rec = energy_record(op0, E, ids_box, 30, 1e-3);
        rec["lyapunov"] = L;
        out.push_back(rec);
        const double n_val = rec.contains("ids") ? rec["ids"].get<double>() : -1.0;
        const double label = rec.contains("gap_label")
                                 ? static_cast<double>(rec["gap_label"].get<int>())
                                 : std::numeric_limits<double>::quiet_NaN();
        rows.push_back({E, L, n_val, label});
    }
    if (!cfg.output_dir.empty()) {
        if (gnuplot)
            write_table(cfg.output_dir, "lyapunov_scan.dat", {"E", "L", "ids", "gap_label"}, rows);
        else
            write_csv(cfg.output_dir, "lyapunov_scan.csv", {"E", "L", "ids", "gap_label"}, rows);
    }
    if (args.emit_json)
        std::cout << out.dump(2) << "\n";
    else
        std::cout << "scanned " << grid << " energies\n";
    return kExitPass;
}

int cmd_green(const CommonArgs& args, double E, std::int64_t box_lo, std::int64_t box_hi,
              std::int64_t n1, std::int64_t n2, const std::string& path_kind) {
    const RunConfig cfg = load_with_overrides(args);
    const BoxOperator box = build_box(cfg.op, box_lo, box_hi);
    GreenPath path = GreenPath::Auto;
    if (path_kind == "cramer") path = GreenPath::Cramer;
    else if (path_kind == "solve") path = GreenPath::Solve;
    else if (path_kind != "auto") throw ConfigError("--path must be auto | cramer | solve");

    const GreenSample g = green_entry(box, E, n1, n2, path);
    json rec = energy_record(cfg.op, E, 1000, 30, 1e-3);
    rec["n1"] = g.n1;
    rec["n2"] = g.n2;
    rec["value"] = g.value;
    rec["log_magnitude"] = g.log_magnitude;
    rec["sign"] = g.sign;
    if (args.emit_json)
        std::cout << rec.dump(2) << "\n";
    else
        std::cout << "G(" << n1 << "," << n2 << ") = " << g.value
                  << "  log|G| = " << g.log_magnitude << "\n";
    return kExitPass;
}

int cmd_gap_count(const CommonArgs& args, double e1, double e2, std::int64_t horizon) {
    const RunConfig cfg = load_with_overrides(args);
    const auto report = gap_eigenvalue_count(cfg.op, e1, e2, horizon);
    json rec;
    rec["E1"] = e1;
    rec["E2"] = e2;
    rec["count"] = report.count;
    rec["count_half_horizon"] = report.count_half;
    rec["stable"] = report.stable;
    if (args.emit_json)
        std::cout << rec.dump(2) << "\n";
    else
        std::cout << "eigenvalues in (" << e1 << ", " << e2 << "): " << report.count
                  << (report.stable ? " (stable)" : " (UNSTABLE)") << "\n";
    if (!report.stable) throw Unstable("gap-count: horizon and half-horizon counts disagree");
    return kExitPass;
}

int cmd_check_identities(const CommonArgs& args, int instances, double tol,
                         std::vector<std::int64_t> ks) {
    const RunConfig cfg = load_with_overrides(args);
    if (ks.empty()) ks = {1, 10, 100, 1000};
    num::Rng rng(cfg.seed);

    double worst = 0.0;
    for (int i = 0; i < instances; ++i) {
        const double coupling = rng.uniform(0.2, 2.5);
        const double theta = rng.uniform();
        const double E = rng.uniform(-3.0, 3.0);
        const double C = rng.uniform(0.1, 1.0);
        const double s = rng.uniform(0.3, 1.5);
        const double alpha = cfg.op.potential.alpha()[0];
        const OperatorSpec op{PotentialSpec::almost_mathieu(coupling, alpha, theta),
                              PerturbationSpec::exponential(C, s)};
        const std::int64_t k = ks[static_cast<std::size_t>(i) % ks.size()];
        const std::int64_t n = rng.uniform_int(-20, 20);
        worst = std::max(worst, telescoping_residuals(op, E, n, k).max());
    }
    json rec = {{"instances", instances}, {"worst_residual", worst}, {"tolerance", tol}};
    const bool pass = worst <= tol;
    rec["pass"] = pass;
    if (args.emit_json)
        std::cout << rec.dump(2) << "\n";
    else
        std::cout << "telescoping identities: worst residual " << worst << " over " << instances
                  << " instances (tol " << tol << ")\n";
    return pass ? kExitPass : kExitAssertionFailure;
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open report '" + path + "'");
    json j;
    in >> j;
    return j;
}

int cmd_report(const std::string& path, const std::string& compare_path, bool emit_json) {
    json a = load_json_file(path);
    if (!compare_path.empty()) {
        json b = load_json_file(compare_path);
        a.erase("timing");
        b.erase("timing");
        const bool equal = (a == b);
        std::cout << (equal ? "reports identical (timing excluded)"
                            : "reports DIFFER (timing excluded)")
                  << "\n";
        return equal ? kExitPass : kExitAssertionFailure;
    }
    if (emit_json) {
        std::cout << a.dump(2) << "\n";
        return a.value("all_pass", false) ? kExitPass : kExitAssertionFailure;
    }
    std::cout << "scenario: " << a.value("scenario", "?") << "\n";
    for (const auto& as : a.value("assertions", json::array()))
        std::cout << (as.value("pass", false) ? "PASS " : "FAIL ") << as.value("name", "?")
                  << ": " << as.value("measured", 0.0) << "\n";
    for (const auto& note : a.value("notes", json::array()))
        std::cout << "note: " << note.get<std::string>() << "\n";
    return a.value("all_pass", false) ? kExitPass : kExitAssertionFailure;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"spectral toolbox for quasi-periodic lattice operators"};
    app.require_subcommand(1);

    CommonArgs common;
    auto add_common = [&](CLI::App* cmd, bool needs_config = true) {
        if (needs_config)
            cmd->add_option("config", common.config_path, "configuration file")->required();
        cmd->add_flag("--json", common.emit_json, "emit machine-readable JSON to stdout");
        cmd->add_option("--out", common.out_dir, "output directory (overrides config)");
        cmd->add_option("--seed", common.seed, "seed override");
        cmd->add_option("--threads", common.threads, "thread count override");
    };

    auto* run = app.add_subcommand("run", "run a named scenario from the config");
    add_common(run);

    auto* scan_ids = app.add_subcommand("scan-ids", "integrated density of states over a grid");
    add_common(scan_ids);
    double e_min = -3.0, e_max = 3.0;
    int grid = 101, theta_grid = 1;
    std::int64_t box = 2000, k_lyap = 2000, ids_box = 1000;
    scan_ids->add_option("--emin", e_min);
    scan_ids->add_option("--emax", e_max);
    scan_ids->add_option("--grid", grid);
    scan_ids->add_option("--box", box);
    scan_ids->add_option("--theta-grid", theta_grid);
    bool gnuplot = false;
    scan_ids->add_flag("--gnuplot", gnuplot, "whitespace tables instead of CSV");

    auto* scan_l = app.add_subcommand("scan-lyapunov", "Lyapunov exponent over a grid");
    add_common(scan_l);
    scan_l->add_option("--emin", e_min);
    scan_l->add_option("--emax", e_max);
    scan_l->add_option("--grid", grid);
    scan_l->add_option("--k", k_lyap);
    scan_l->add_option("--theta-grid", theta_grid);
    scan_l->add_option("--ids-box", ids_box);
    scan_l->add_flag("--gnuplot", gnuplot, "whitespace tables instead of CSV");

    auto* green = app.add_subcommand("green", "Green's function entry of a finite box");
    add_common(green);
    double gE = 0.0;
    std::int64_t box_lo = 0, box_hi = 99, n1 = 0, n2 = 0;
    std::string path_kind = "auto";
    green->add_option("--e", gE, "energy")->required();
    green->add_option("--box-lo", box_lo);
    green->add_option("--box-hi", box_hi);
    green->add_option("--n1", n1)->required();
    green->add_option("--n2", n2)->required();
    green->add_option("--path", path_kind, "auto | cramer | solve");

    auto* gapc = app.add_subcommand("gap-count", "eigenvalue count in a spectral-gap window");
    add_common(gapc);
    double e1 = 0.0, e2 = 0.0;
    std::int64_t horizon = 1000;
    gapc->add_option("--e1", e1)->required();
    gapc->add_option("--e2", e2)->required();
    gapc->add_option("--horizon", horizon);

    auto* chk = app.add_subcommand("check-identities", "telescoping identity self-test");
    add_common(chk);
    int instances = 100;
    double tol = 1e-9;
    std::vector<std::int64_t> ks;
    chk->add_option("--instances", instances);
    chk->add_option("--tol", tol);
    chk->add_option("--k", ks, "product lengths to cycle through");

    auto* rep = app.add_subcommand("report", "pretty-print or compare run reports");
    std::string report_path, compare_path;
    rep->add_option("path", report_path, "report.json")->required();
    rep->add_option("--compare", compare_path, "second report; exits 0 iff equal minus timing");
    bool rep_json = false;
    rep->add_flag("--json", rep_json);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(common);
        if (scan_ids->parsed())
            return cmd_scan_ids(common, e_min, e_max, grid, box, theta_grid, gnuplot);
        if (scan_l->parsed())
            return cmd_scan_lyapunov(common, e_min, e_max, grid, k_lyap, theta_grid, ids_box,
                                     gnuplot);
        if (green->parsed()) return cmd_green(common, gE, box_lo, box_hi, n1, n2, path_kind);
        if (gapc->parsed()) return cmd_gap_count(common, e1, e2, horizon);
        if (chk->parsed()) return cmd_check_identities(common, instances, tol, ks);
        if (rep->parsed()) return cmd_report(report_path, compare_path, rep_json);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const NotInGap& e) {
        std::cerr << "NotInGap: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const Unstable& e) {
        std::cerr << "Unstable: " << e.what() << "\n";
        return kExitAssertionFailure;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return kExitConfigError;
    }
    return kExitConfigError;
}
