#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "qpsl/cocycle.hpp"
#include "qpsl/lattice.hpp"
#include "qpsl/mat2.hpp"

namespace qpsl {

// Canonical Jacobi form of a lattice operator:
//   (Hu)(n) = a(n) u(n+1) + a(n-1) u(n-1) - b(n) u(n),  a == -1, b(n) = site value.
// Solutions of the Schrodinger eigenvalue problem at energy E coincide with
// Jacobi solutions at lambda = -E, so all node and Wronskian semantics are
// evaluated here with the a(n) < 0 sign convention built in.
struct JacobiForm {
    explicit JacobiForm(const OperatorSpec& op) : b_fn(op.site_fn()) {}
    explicit JacobiForm(SiteFn site) : b_fn(std::move(site)) {}

    SiteFn b_fn;

    double a(std::int64_t) const { return -1.0; }
    double b(std::int64_t n) const { return b_fn(n); }

    static double lambda_from_energy(double E) { return -E; }
    static double energy_from_lambda(double lambda) { return -lambda; }
};

// A solution sample over a window of consecutive sites. Values are stored as
// mantissa * exp(log_scale) per site, so hyperbolic solutions over thousands
// of sites stay representable.
class SolutionTrace {
  public:
    SolutionTrace(std::int64_t first, std::vector<double> values, double lambda);
    SolutionTrace(std::int64_t first, std::vector<double> mantissas, std::vector<double> logs,
                  double lambda);

    std::int64_t first() const { return first_; }
    std::int64_t last() const { return first_ + static_cast<std::int64_t>(mant_.size()) - 1; }
    bool covers(std::int64_t m, std::int64_t n) const { return m >= first() && n <= last(); }
    double lambda() const { return lambda_; }

    double mantissa(std::int64_t n) const { return mant_[idx(n)]; }
    double log_scale(std::int64_t n) const { return logs_[idx(n)]; }
    int sign(std::int64_t n) const;
    double log_abs(std::int64_t n) const;
    double value(std::int64_t n) const; // may over/underflow for wild traces

    // residual of the three-term equation at site n, relative to the local scale
    double relative_residual(const JacobiForm& J, std::int64_t n) const;

  private:
    std::size_t idx(std::int64_t n) const { return static_cast<std::size_t>(n - first_); }
    std::int64_t first_;
    std::vector<double> mant_;
    std::vector<double> logs_;
    double lambda_;
};

// Node count of u between m and n: a site j is a node when u(j) = 0 or
// a(j) u(j) u(j+1) > 0; j = m counts only when u(m) != 0, the right endpoint
// never counts. sign_flip counts nodes of (-1)^j u(j) instead.
int count_nodes(const JacobiForm& J, const SolutionTrace& u, std::int64_t m, std::int64_t n,
                bool sign_flip = false);

// W(u1,u2)(n) = a(n) (u1(n) u2(n+1) - u1(n+1) u2(n))
double wronskian(const JacobiForm& J, const SolutionTrace& u1, const SolutionTrace& u2,
                 std::int64_t n);

struct ScaledValue {
    double mant = 0.0;
    double log = 0.0;
    int sign() const { return mant > 0.0 ? 1 : (mant < 0.0 ? -1 : 0); }
    double value() const;
};

ScaledValue wronskian_scaled(const JacobiForm& J, const SolutionTrace& u1,
                             const SolutionTrace& u2, std::int64_t n);

// Node count of the Wronskian sequence with the same between-m-and-n convention.
int count_wronskian_nodes(const JacobiForm& J, const SolutionTrace& u1, const SolutionTrace& u2,
                          std::int64_t m, std::int64_t n);

enum class Side { PlusInfinity, MinusInfinity };
enum class WeylConstruction { BackwardRecurrence, ParabolicFixedPoint, HyperbolicFixedPoint };

struct WeylSolution {
    Side side = Side::PlusInfinity;
    SolutionTrace trace;
    WeylConstruction construction = WeylConstruction::BackwardRecurrence;
    bool edge_limit = false;
};

// Square-summable solution at the chosen side for E off the essential
// spectrum: backward recurrence from a frozen-tail seed at +-horizon,
// renormalized per dyadic block; the trace covers [-horizon, horizon+1].
// Throws NotInGap when the dyadic tail-norm decrease fails.
WeylSolution weyl_solution(const SiteFn& site, double E, Side side, std::int64_t horizon);
WeylSolution weyl_solution(const OperatorSpec& op, double E, Side side, std::int64_t horizon);

// Gap-edge limit: ladder edge +- delta0 2^{-j}, each rung seeded far enough
// out that two independent seeds agree on the window (self-certifying pad),
// then Richardson extrapolation in sqrt(delta); verifies stabilization to
// stab_tol (1e-6 by default). When the edge energy is itself a numerical
// estimate, pass its uncertainty: the ladder stops before rung energies sink
// into the uncertainty and the geometric rung structure breaks.
WeylSolution weyl_solution_at_edge(const SiteFn& site, double edge_energy, bool from_above,
                                   Side side, std::int64_t horizon, double delta0 = 1e-4,
                                   int ladder = 34, double edge_uncertainty = 0.0,
                                   double stab_tol = 1e-6);
WeylSolution weyl_solution_at_edge(const OperatorSpec& op, double edge_energy, bool from_above,
                                   Side side, std::int64_t horizon, double delta0 = 1e-4,
                                   int ladder = 34, double edge_uncertainty = 0.0,
                                   double stab_tol = 1e-6);

// True when the backward recurrence at E contracts within `pad` sites onto a
// single direction: two independent seeds agree to 1e-9 over the window.
// Detects uniform hyperbolicity at E; used to refine spectral edges.
bool weyl_direction_certified(const SiteFn& site, double E, Side side, std::int64_t horizon,
                              std::int64_t pad);

// Whether a (typically edge-limit) trace is square-summable on its decay side,
// judged by dyadic block norms over the window.
bool edge_state_square_summable(const SolutionTrace& trace, Side side, std::int64_t horizon);

struct EdgeGapCount {
    double edge_energy = 0.0;
    double other_energy = 0.0;
    int wronskian_count = 0; // open-interval count between the two energies
    bool edge_state = false; // limit Weyl solution square-summable at the edge
    int total = 0;           // half-closed count including the edge state
    bool stable = false;
};

// Eigenvalue count for a window with one endpoint on a spectral edge: the
// Wronskian count against the edge-limit Weyl solution plus the edge state
// itself when the limit solution is square-summable. gap_above_edge says on
// which side of the edge the gap (and other_E) lies.
EdgeGapCount gap_eigenvalue_count_at_edge(const SiteFn& site, double edge_energy,
                                          bool gap_above_edge, double other_E,
                                          std::int64_t horizon,
                                          Side side = Side::PlusInfinity);

struct GapCountReport {
    int count = 0;
    int count_half = 0; // same count over the half horizon
    bool stable = false;
    double E1 = 0.0;
    double E2 = 0.0;
    std::int64_t horizon = 0;
};

// Eigenvalue count of the whole-line operator in the gap window (E1, E2) by
// renormalized oscillation: Weyl solutions on one side at both energies
// (Jacobi order lambda = -E), Wronskian nodes over [-horizon, horizon].
// Traces are built with a half-horizon pad so seeding transients stay outside
// the counting window.
GapCountReport gap_eigenvalue_count(const SiteFn& site, double E1, double E2,
                                    std::int64_t horizon, Side side = Side::PlusInfinity);
GapCountReport gap_eigenvalue_count(const OperatorSpec& op, double E1, double E2,
                                    std::int64_t horizon, Side side = Side::PlusInfinity);

// ---------------------------------------------------------------------------
// Constructive solution builders for perturbed constant systems
// phi(n+1) = (A + R(n)) phi(n).  R is treated as supported on [1, support_end]
// (zero beyond); at(n) must be callable for 1 <= n <= max(horizon, support_end).
// ---------------------------------------------------------------------------

struct MatrixSequence {
    std::function<Mat2(std::int64_t)> at;
    std::int64_t support_end = 0;
};

struct ParabolicSolutions {
    std::int64_t n0 = 0;
    int diag_sign = 1; // the +-1 on A's diagonal
    double c = 0.0;
    std::vector<Vec2> phi; // bounded solution, original coordinates, n in [n0, end]
    std::vector<Vec2> psi; // linearly growing solution
    std::int64_t end = 0;

    double phi_deviation = 0.0;      // sup_n ||phi~(n) - (1,0)|| in reduced coordinates
    double phi_bound = 0.0;          // 2 K0 (K1+K2) sum_{s>=n0} ||R(s)|| (s+1)
    double psi_tail_deviation = 0.0; // sup over the outer half of ||psi~(n)-(cn,1)||/n
    double max_residual = 0.0;       // relative substitution residual
    double min_phi_norm = 0.0;       // inf_n ||phi(n)||, the no-decay witness
    int iterations = 0;
};

// Fixed point for A = [[s, c], [0, s]], s = +-1, c != 0, with sum |R(n)| n
// finite. Scans for n0 unless one is supplied.
ParabolicSolutions parabolic_solutions(int diag_sign, double c, const MatrixSequence& R,
                                       std::optional<std::int64_t> n0_fixed, std::int64_t horizon);

struct HyperbolicSolution {
    std::int64_t n0 = 0;
    double lambda = 0.0;
    double c = 0.0;
    std::vector<Vec2> psi_hat; // weighted coordinates: phi(n) = lambda^n psi_hat(n)
    std::int64_t end = 0;

    double weighted_deviation = 0.0; // sup_n |lambda|^{-n} ||phi(n) - (lambda^n, 0)||
    double bound = 0.0;              // 2 K sum_{s >= n0} ||R(s)||
    double max_residual = 0.0;
    int iterations = 0;
};

// Growing solution for A = [[lambda, c], [0, 1/lambda]], |lambda| > 1, with
// sum |R(n)| finite; contraction threshold 2 K sum_{s>=n0} ||R(s)|| < eps.
HyperbolicSolution hyperbolic_solutions(double lambda, double c, const MatrixSequence& R,
                                        std::optional<std::int64_t> n0_fixed,
                                        std::int64_t horizon, double eps = 0.5);

} // namespace qpsl
