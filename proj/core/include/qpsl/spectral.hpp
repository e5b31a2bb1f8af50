#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "qpsl/cocycle.hpp"
#include "qpsl/lattice.hpp"

namespace qpsl {

// Determinants P_k = det[E - (operator restricted to [n, n+k-1])], evaluated by
// the three-term recurrence P_k = (E - V(n+k-1)) P_{k-1} - P_{k-2}, with a
// per-step scale ladder so signs and log-magnitudes survive k in the thousands.
// P_0 = 1 and P_{-1} = 0 by convention.
class DeterminantSequence {
  public:
    DeterminantSequence(const SiteFn& site, double E, std::int64_t n, std::int64_t K);
    DeterminantSequence(const OperatorSpec& op, double E, std::int64_t n, std::int64_t K);

    std::int64_t base() const { return base_; }
    std::int64_t max_k() const { return static_cast<std::int64_t>(mant_.size()) - 1; }

    // P_k = mantissa(k) * exp(log_scale(k))
    double mantissa(std::int64_t k) const { return mant_[static_cast<std::size_t>(k)]; }
    double log_scale(std::int64_t k) const { return logs_[static_cast<std::size_t>(k)]; }

    int sign(std::int64_t k) const;
    double log_abs(std::int64_t k) const; // -inf when P_k == 0
    double value(std::int64_t k) const;   // may over/underflow; small k only

  private:
    std::int64_t base_;
    std::vector<double> mant_;
    std::vector<double> logs_;
};

// Backward analogue: R_j = det[E - (operator on [m-j+1, m])], the determinant
// growing from the right end m. Used by Green assembly and window scans.
class BackwardDeterminantSequence {
  public:
    BackwardDeterminantSequence(const SiteFn& site, double E, std::int64_t m, std::int64_t K);

    double mantissa(std::int64_t j) const { return mant_[static_cast<std::size_t>(j)]; }
    double log_scale(std::int64_t j) const { return logs_[static_cast<std::size_t>(j)]; }
    int sign(std::int64_t j) const;
    double log_abs(std::int64_t j) const;

  private:
    std::int64_t end_;
    std::vector<double> mant_;
    std::vector<double> logs_;
};

// Number of eigenvalues of the box strictly below E (Sturm / LDL^T pivot count).
// A zero pivot is nudged to -ulp * scale, so counts are defined on every E.
std::int64_t sturm_count(const BoxOperator& box, double E);

struct GreenSample {
    std::int64_t n1 = 0;
    std::int64_t n2 = 0;
    double E = 0.0;
    double value = 0.0;         // sign * exp(log_magnitude); may under/overflow
    double log_magnitude = 0.0; // authoritative magnitude
    int sign = 0;
};

enum class GreenPath { Auto, Cramer, Solve };

// Entry (n1, n2) of (box - E)^{-1}. The Cramer path uses two determinant
// sequences in log form; the solve path factors the tridiagonal directly.
// Inputs with n1 > n2 are symmetrized. Throws SingularBox when E is within
// ~1e-13 * ||box|| of a box eigenvalue.
GreenSample green_entry(const BoxOperator& box, double E, std::int64_t n1, std::int64_t n2,
                        GreenPath path = GreenPath::Auto);

struct WindowScanReport {
    struct Window {
        std::int64_t a = 0;
        std::int64_t b = 0;
        double worst = 0.0; // max over pairs of log|G| + target |n1-n2| - slack N
        bool singular = false;
        bool pass = false;
    };
    std::array<Window, 4> right;
    std::array<Window, 4> left;
    int best_right = -1; // index of the best (lowest worst) non-singular window
    int best_left = -1;
    bool any_right_pass = false;
    bool any_left_pass = false;
    bool pass = false; // at least one window passes on each side
};

// Scans the four right windows [1,N]+N', [1,N-1]+N', [2,N]+N', [2,N-1]+N' and
// their mirrored left counterparts for off-diagonal Green decay at the target
// rate with slack * N additive room.
WindowScanReport window_scan(const OperatorSpec& op, double E, std::int64_t N, std::int64_t n_prime,
                             double decay_rate_target, double slack);

// Integrated density of states from a single box [0, box_size-1]:
// sturm_count / box_size, optionally averaged over a small theta grid.
// Requires a Zero perturbation.
double ids(const OperatorSpec& op, double E, std::int64_t box_size, int theta_grid = 1);

struct IdsCurve {
    std::vector<double> energies;
    std::vector<double> values;
    bool nondecreasing(double tol = 1e-12) const;
};

IdsCurve ids_curve(const OperatorSpec& op, double e_min, double e_max, int grid_points,
                   std::int64_t box_size, int theta_grid = 1);

// Gap label: the integer k with |k| <= k_max minimizing the circle distance
// from ids_value to k * alpha mod 1, if that distance is within tol.
// Ties break toward smaller |k| (positive before negative).
std::optional<int> gap_label(double ids_value, double alpha, int k_max, double tol);

struct EigenPair {
    double value = 0.0;
    std::vector<double> vector; // normalized, largest-magnitude entry positive
};

// All eigenpairs of the box in (E1, E2): bisection on sturm_count isolates the
// eigenvalues, inverse iteration (2 sweeps from a seeded vector, then a
// Rayleigh-quotient polish) builds the vectors.
std::vector<EigenPair> eigenpairs_in_window(const BoxOperator& box, double E1, double E2,
                                            std::uint64_t seed = 1234);

// Least-squares decay slope of log|psi| against the distance from center_index
// (vector indices), fitted over the outer half of the usable support; entries
// below 1e-280 are excluded. Throws TooShort with fewer than 16 usable samples.
double decay_rate(const std::vector<double>& psi, std::int64_t center_index);

// Tridiagonal (T - shift) x = b with partial pivoting; diag is T's diagonal,
// off-diagonals are 1. Shared by inverse iteration and the Green solve path.
std::vector<double> solve_tridiagonal_shifted(const std::vector<double>& diag, double shift,
                                              std::vector<double> rhs);

} // namespace qpsl
