#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qpsl/lattice.hpp"
#include "qpsl/oscillation.hpp"
#include "qpsl/spectral.hpp"

namespace qpsl {

enum class Cmp {
    AbsTol,    // |measured - expected| <= tolerance
    LessEq,    // measured <= expected + tolerance
    GreaterEq, // measured >= expected - tolerance
    Greater,   // measured > expected (strict)
    IntEq,     // round(measured) == round(expected)
    BoolTrue   // measured != 0
};

struct Assertion {
    std::string name;
    double measured = 0.0;
    double expected = 0.0;
    double tolerance = 0.0;
    Cmp cmp = Cmp::AbsTol;
    bool pass = false;
    std::string note;
};

Assertion check(std::string name, double measured, double expected, double tolerance, Cmp cmp,
                std::string note = "");

struct RunReport {
    std::string scenario;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::vector<Assertion> assertions;
    std::map<std::string, double> values; // auxiliary named measurements
    std::vector<std::string> artifacts;   // emitted file paths
    std::vector<std::string> notes;
    double wall_ms = 0.0;

    bool all_pass() const;
    // timing lives in a separate JSON field so byte-comparisons can drop it
    std::string to_json(bool include_timing = true) const;
};

struct ScenarioOptions {
    std::string out_dir;            // empty: no artifacts written
    std::uint64_t seed = 20240601u;
    int threads = 1;
    std::map<std::string, double> params; // per-scenario numeric overrides

    double param(const std::string& key, double fallback) const;
};

// ---------------------------------------------------------------------------
// Shared measurements
// ---------------------------------------------------------------------------

struct GapInfo {
    double e_lo = 0.0;
    double e_hi = 0.0;
    double ids_value = 0.0;
    std::optional<int> label;
    double width() const { return e_hi - e_lo; }
};

// IDS plateaus strictly inside (0,1) spanning at least two grid cells.
std::vector<GapInfo> detect_gaps(const IdsCurve& curve, double alpha, int label_k_max,
                                 double label_tol, double plateau_tol);

struct BridgeCheck {
    IdsCurve curve;
    std::vector<double> rotation; // independent projective-winding estimate per energy
    double max_deviation = 0.0;   // max |N(E) - (1 - 2 rho(E))|
    std::vector<GapInfo> gaps;
    bool all_gaps_labeled = true;
};

// N(E) from box counting against 1 - 2 rho(E) from projective winding.
BridgeCheck ids_rotation_bridge(const OperatorSpec& op, double e_min, double e_max,
                                int grid_points, std::int64_t box_size, int theta_grid,
                                std::int64_t rotation_iterations, int label_k_max,
                                double label_tol, double plateau_tol);

// [inf spectrum, sup spectrum] from box eigenvalue extremes over a theta grid.
std::pair<double, double> spectrum_edges(const OperatorSpec& op, std::int64_t box_size,
                                         int theta_grid);

struct GapStability {
    double window_lo = 0.0;
    double window_hi = 0.0;
    std::vector<std::int64_t> box_sizes;
    std::vector<int> raw_counts;  // plain Sturm differences on centered boxes
    std::vector<int> bulk_counts; // boundary-localized (surface) states filtered out
    GapCountReport wronskian;
    bool consistent = false; // bulk counts identical across sizes and equal to the Wronskian count
};

// Eigenvalue count inside a gap window measured three ways: Sturm differences,
// boundary-filtered box eigenpairs, and the Wronskian node count.
GapStability gap_count_stability(const OperatorSpec& op, double window_lo, double window_hi,
                                 const std::vector<std::int64_t>& box_sizes, std::int64_t horizon,
                                 std::uint64_t seed = 7u);

// ---------------------------------------------------------------------------
// Scenario runners
// ---------------------------------------------------------------------------

// The decaying potential with an eigenvalue sitting at the spectral edge E = 2:
// V(n) = -2/(n^2-1) for |n| >= 2, eigenfunction u(n) = 1/n.
RunReport run_appendix_example(const ScenarioOptions& opts = {});

RunReport run_subcritical_ac_indicators(double coupling, const PerturbationSpec& g,
                                        const ScenarioOptions& opts = {});

RunReport run_localization_scenario(double coupling, const PerturbationSpec& g,
                                    const ScenarioOptions& opts = {});

RunReport run_ldt_measurement(double coupling, double E, std::int64_t N, double eps,
                              int theta_samples, const ScenarioOptions& opts = {});

RunReport run_gap_edge_scenario(double coupling = 0.2, const ScenarioOptions& opts = {});

// Writes a CSV artifact (parent directories created); returns the path.
std::string write_csv(const std::string& dir, const std::string& name,
                      const std::vector<std::string>& columns,
                      const std::vector<std::vector<double>>& rows);

// Serializes the report into <out_dir>/<scenario>-<confighash>/report.json.
std::string write_report(const RunReport& report, const std::string& out_dir);

} // namespace qpsl
