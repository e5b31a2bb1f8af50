#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "qpsl/lattice.hpp"
#include "qpsl/mat2.hpp"

namespace qpsl {

// One-step transfer matrix [[E - V, -1], [1, 0]].
inline Mat2 transfer_step(double E, double site_value) {
    return {E - site_value, -1.0, 1.0, 0.0};
}

using SiteFn = std::function<double(std::int64_t)>;

// Ordered transfer product over k sites starting at n:
//   k > 0:  A(n+k-1) ... A(n)
//   k < 0:  inverse convention, the inverse of the product over [n+k, n-1]
// k = 0 is rejected. Scaled so overflow is impossible by construction.
ScaledMat2 transfer_product(const SiteFn& site, double E, std::int64_t n, std::int64_t k);
ScaledMat2 transfer_product(const OperatorSpec& op, double E, std::int64_t n, std::int64_t k);

// Max-norm residuals of the four telescoping identities relating perturbed and
// unperturbed products, each normalized by the largest intermediate norm.
// Identities: two expansions of the perturbed product (rank-one insertions in
// the upper-left corner) and two of its inverse (lower-right corner).
struct TelescopingResiduals {
    double forward_a = 0.0;  // perturbed-left expansion of the product
    double forward_b = 0.0;  // perturbed-right expansion of the product
    double inverse_a = 0.0;  // unperturbed-left expansion of the inverse
    double inverse_b = 0.0;  // perturbed-left expansion of the inverse

    double max() const;
};

TelescopingResiduals telescoping_residuals(const OperatorSpec& op, double E, std::int64_t n,
                                           std::int64_t k);

// Finite-k Lyapunov exponent estimate: average over a uniform theta grid of
// (1/k) log ||M_k(theta, E, 0)||. Requires a Zero perturbation. The grid loop
// is data-parallel with a deterministic pairwise reduction.
double lyapunov(const OperatorSpec& op, double E, std::int64_t k, int theta_grid);

struct GrowthProfile {
    std::vector<std::int64_t> ks;
    std::vector<double> log_norms;
    bool forward = true;
    double fit_exponent = 0.0;  // slope of log||M_k|| vs log k
    double fit_intercept = 0.0;
};

GrowthProfile growth_profile(const OperatorSpec& op, double E,
                             const std::optional<std::vector<double>>& theta_override,
                             std::int64_t k_max);

// The four deviation-estimate branches ||M~ - M|| <= e^{(L+eps)k - s*dist}:
//   ForwardRight: forward product, n >= 0
//   ForwardLeft:  forward product, n + k - 1 <= 0
//   InverseRight: inverse product, n - k >= 0
//   InverseLeft:  inverse product, n - 1 <= 0
enum class DeviationBranch { ForwardRight, ForwardLeft, InverseRight, InverseLeft };

struct DeviationReport {
    double measured_log = 0.0;      // log ||M~ - M|| (-inf when identical)
    double bound_exponent = 0.0;    // (L^ + eps) k - s n (branch dependent)
    double lyapunov_estimate = 0.0; // L^ used in the bound
    double gronwall_constant = 0.0; // direct summation of the proof's constant
    bool pass = false;              // measured <= bound + slack
};

DeviationReport deviation_check(const OperatorSpec& op, double E, DeviationBranch branch,
                                std::int64_t n, std::int64_t k, double eps, double slack,
                                std::int64_t lyap_k = 2000, int lyap_grid = 64);

struct UniformBoundReport {
    double worst = 0.0; // max over samples of (1/k) log||M~_k|| - (L^(E) + eps)
    double worst_E = 0.0;
    double worst_theta = 0.0;
    std::int64_t worst_n = 0;
    int samples = 0;
};

UniformBoundReport uniform_upper_bound_check(const OperatorSpec& op, double e_min, double e_max,
                                             double eps, std::int64_t k, int samples,
                                             std::uint64_t seed = 1u,
                                             std::int64_t lyap_k = 2000, int lyap_grid = 64);

// Fibered rotation number of the unperturbed cocycle, estimated by projective
// winding along one orbit; determination in [0, 1/2] so N = 1 - 2 rho.
double fibered_rotation(const OperatorSpec& op, double E, std::int64_t iterations);

} // namespace qpsl
