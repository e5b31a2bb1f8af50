#include "qpsl/cocycle.hpp"

#include <algorithm>
#include <cmath>

#include "qpsl/errors.hpp"
#include "qpsl/numeric.hpp"

namespace qpsl {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// represented log of the max-abs entry
double rep_log(const ScaledMat2& q) {
    const double ma = q.m.max_abs();
    return ma == 0.0 ? kNegInf : q.log_scale + std::log(ma);
}

ScaledMat2 forward_product(const SiteFn& site, double E, std::int64_t n, std::int64_t k) {
    ScaledMat2 acc = ScaledMat2::identity();
    for (std::int64_t i = 0; i < k; ++i) {
        acc = ScaledMat2{transfer_step(E, site(n + i)) * acc.m, acc.log_scale};
        acc.normalize();
    }
    return acc;
}

} // namespace

ScaledMat2 transfer_product(const SiteFn& site, double E, std::int64_t n, std::int64_t k) {
    if (k == 0) throw InvalidSpec("transfer_product: k must be nonzero");
    if (k > 0) return forward_product(site, E, n, k);
    const std::int64_t j = -k;
    return forward_product(site, E, n - j, j).inverse_unimodular();
}

ScaledMat2 transfer_product(const OperatorSpec& op, double E, std::int64_t n, std::int64_t k) {
    return transfer_product(op.site_fn(), E, n, k);
}

double TelescopingResiduals::max() const {
    return std::max(std::max(forward_a, forward_b), std::max(inverse_a, inverse_b));
}

TelescopingResiduals telescoping_residuals(const OperatorSpec& op, double E, std::int64_t n,
                                           std::int64_t k) {
    if (k < 1) throw InvalidSpec("telescoping_residuals: k must be >= 1");
    const std::size_t ku = static_cast<std::size_t>(k);

    std::vector<double> v_free(ku), v_pert(ku), g(ku);
    for (std::size_t i = 0; i < ku; ++i) {
        const std::int64_t site = n + static_cast<std::int64_t>(i);
        v_free[i] = op.potential.site_value(site);
        g[i] = op.perturbation(site);
        v_pert[i] = v_free[i] + g[i];
    }

    // prefix products M_i(n), M~_i(n) for i = 0..k and suffix products
    // M_{k-i-1}(n+i+1), M~_{k-i-1}(n+i+1) for i = 0..k-1
    std::vector<ScaledMat2> preA(ku + 1), preB(ku + 1), sufA(ku), sufB(ku);
    preA[0] = preB[0] = ScaledMat2::identity();
    for (std::size_t i = 0; i < ku; ++i) {
        preA[i + 1] = ScaledMat2{transfer_step(E, v_free[i]) * preA[i].m, preA[i].log_scale};
        preA[i + 1].normalize();
        preB[i + 1] = ScaledMat2{transfer_step(E, v_pert[i]) * preB[i].m, preB[i].log_scale};
        preB[i + 1].normalize();
    }
    sufA[ku - 1] = sufB[ku - 1] = ScaledMat2::identity();
    for (std::size_t i = ku - 1; i > 0; --i) {
        sufA[i - 1] = sufA[i].mul_plain(transfer_step(E, v_free[i]));
        sufB[i - 1] = sufB[i].mul_plain(transfer_step(E, v_pert[i]));
    }

    std::vector<ScaledMat2> preAinv(ku + 1), preBinv(ku + 1), sufAinv(ku), sufBinv(ku);
    for (std::size_t i = 0; i <= ku; ++i) {
        preAinv[i] = preA[i].inverse_unimodular();
        preBinv[i] = preB[i].inverse_unimodular();
    }
    for (std::size_t i = 0; i < ku; ++i) {
        sufAinv[i] = sufA[i].inverse_unimodular();
        sufBinv[i] = sufB[i].inverse_unimodular();
    }

    // largest intermediate norm (shared normalizer across the four identities)
    double log_norm_max = kNegInf;
    auto track = [&](const ScaledMat2& q) { log_norm_max = std::max(log_norm_max, rep_log(q)); };
    for (const auto& q : preA) track(q);
    for (const auto& q : preB) track(q);
    for (const auto& q : sufA) track(q);
    for (const auto& q : sufB) track(q);
    for (const auto& q : preAinv) track(q);
    for (const auto& q : preBinv) track(q);

    struct Identity {
        const ScaledMat2* lhs;
        const ScaledMat2* base;
        std::function<ScaledMat2(std::size_t)> term;
    };

    auto upper_corner = [&](std::size_t i) { return Mat2::diag(-g[i], 0.0); };
    auto lower_corner = [&](std::size_t i) { return Mat2::diag(0.0, -g[i]); };

    const Identity identities[4] = {
        {&preB[ku], &preA[ku],
         [&](std::size_t i) { return sufB[i].mul_plain(upper_corner(i)) * preA[i]; }},
        {&preB[ku], &preA[ku],
         [&](std::size_t i) { return sufA[i].mul_plain(upper_corner(i)) * preB[i]; }},
        {&preBinv[ku], &preAinv[ku],
         [&](std::size_t i) { return preAinv[i].mul_plain(lower_corner(i)) * sufBinv[i]; }},
        {&preBinv[ku], &preAinv[ku],
         [&](std::size_t i) { return preBinv[i].mul_plain(lower_corner(i)) * sufAinv[i]; }},
    };

    double out[4];
    for (int id = 0; id < 4; ++id) {
        const Identity& ident = identities[id];
        std::vector<ScaledMat2> terms(ku);
        double log_star = std::max(rep_log(*ident.lhs), rep_log(*ident.base));
        for (std::size_t i = 0; i < ku; ++i) {
            terms[i] = ident.term(i);
            log_star = std::max(log_star, rep_log(terms[i]));
            log_norm_max = std::max(log_norm_max, rep_log(terms[i]));
        }
        // combine at the common scale; exponents stay <= O(log 2) above log_star
        Mat2 acc = ident.base->m * std::exp(ident.base->log_scale - log_star);
        for (std::size_t i = 0; i < ku; ++i)
            acc = acc + terms[i].m * std::exp(terms[i].log_scale - log_star);
        const Mat2 diff = acc - ident.lhs->m * std::exp(ident.lhs->log_scale - log_star);
        const double d = diff.max_abs();
        out[id] = d == 0.0 ? 0.0 : std::exp(std::log(d) + log_star - log_norm_max);
    }

    return {out[0], out[1], out[2], out[3]};
}

double lyapunov(const OperatorSpec& op, double E, std::int64_t k, int theta_grid) {
    if (!op.perturbation.is_zero())
        throw InvalidSpec("lyapunov: defined for the unperturbed cocycle (perturbation must be Zero)");
    if (k < 1) throw InvalidSpec("lyapunov: k must be >= 1");
    if (theta_grid < 1) throw InvalidSpec("lyapunov: theta_grid must be >= 1");

    const int d = op.potential.dim();
    std::vector<double> samples(static_cast<std::size_t>(theta_grid));
    num::parallel_for_index(static_cast<std::size_t>(theta_grid), [&](std::size_t j) {
        std::vector<double> theta = op.potential.theta();
        // uniform grid for d = 1; a fixed rank-1 lattice shift for d > 1
        for (int c = 0; c < d; ++c) {
            const double gen = (c == 0) ? 1.0 : static_cast<double>(2 * c + 1);
            theta[static_cast<std::size_t>(c)] = num::wrap_unit(
                theta[static_cast<std::size_t>(c)] +
                gen * static_cast<double>(j) / static_cast<double>(theta_grid));
        }
        const auto site = [&](std::int64_t m) { return op.potential.site_value(m, theta); };
        const ScaledMat2 prod = forward_product(site, E, 0, k);
        samples[j] = prod.log_norm() / static_cast<double>(k);
    });
    return num::pairwise_mean(samples);
}

GrowthProfile growth_profile(const OperatorSpec& op, double E,
                             const std::optional<std::vector<double>>& theta_override,
                             std::int64_t k_max) {
    if (k_max < 2) throw InvalidSpec("growth_profile: k_max must be >= 2");

    std::vector<std::int64_t> ladder;
    for (std::int64_t k = 2; k < k_max; k *= 2) ladder.push_back(k);
    ladder.push_back(k_max);

    const std::vector<double> theta = theta_override ? *theta_override : op.potential.theta();
    const auto site = [&](std::int64_t m) {
        return op.potential.site_value(m, theta) + op.perturbation(m);
    };

    GrowthProfile profile;
    profile.forward = true;
    ScaledMat2 acc = ScaledMat2::identity();
    std::size_t next = 0;
    for (std::int64_t i = 0; i < k_max && next < ladder.size(); ++i) {
        acc = ScaledMat2{transfer_step(E, site(i)) * acc.m, acc.log_scale};
        acc.normalize();
        if (i + 1 == ladder[next]) {
            profile.ks.push_back(i + 1);
            profile.log_norms.push_back(acc.log_norm());
            ++next;
        }
    }

    std::vector<double> lx(profile.ks.size()), ly(profile.log_norms.size());
    for (std::size_t i = 0; i < profile.ks.size(); ++i) {
        lx[i] = std::log(static_cast<double>(profile.ks[i]));
        ly[i] = profile.log_norms[i];
    }
    const auto fit = num::fit_line(lx, ly);
    profile.fit_exponent = fit.slope;
    profile.fit_intercept = fit.intercept;
    return profile;
}

DeviationReport deviation_check(const OperatorSpec& op, double E, DeviationBranch branch,
                                std::int64_t n, std::int64_t k, double eps, double slack,
                                std::int64_t lyap_k, int lyap_grid) {
    if (op.perturbation.kind() != DecayKind::Exponential && !op.perturbation.is_zero())
        throw InvalidSpec("deviation_check: perturbation must be Exponential (or Zero)");
    if (k < 1) throw InvalidSpec("deviation_check: k must be >= 1");

    const double s = op.perturbation.is_zero() ? 1.0 : op.perturbation.rate();

    bool forward;
    double dist_term;
    switch (branch) {
        case DeviationBranch::ForwardRight:
            if (n < 0) throw InvalidSpec("deviation_check: branch requires n >= 0");
            forward = true;
            dist_term = -s * static_cast<double>(n);
            break;
        case DeviationBranch::ForwardLeft:
            if (n + k - 1 > 0) throw InvalidSpec("deviation_check: branch requires n + k - 1 <= 0");
            forward = true;
            dist_term = s * static_cast<double>(n + k - 1);
            break;
        case DeviationBranch::InverseRight:
            if (n - k < 0) throw InvalidSpec("deviation_check: branch requires n - k >= 0");
            forward = false;
            dist_term = -s * static_cast<double>(n - k);
            break;
        case DeviationBranch::InverseLeft:
            if (n - 1 > 0) throw InvalidSpec("deviation_check: branch requires n - 1 <= 0");
            forward = false;
            dist_term = s * static_cast<double>(n - 1);
            break;
        default:
            throw InvalidSpec("deviation_check: unknown branch");
    }

    DeviationReport report;
    report.lyapunov_estimate = lyapunov(op.without_perturbation(), E, lyap_k, lyap_grid);
    report.bound_exponent = (report.lyapunov_estimate + eps) * static_cast<double>(k) + dist_term;

    const std::int64_t kk = forward ? k : -k;
    const ScaledMat2 pert = transfer_product(op, E, n, kk);
    const ScaledMat2 free = transfer_product(op.without_perturbation(), E, n, kk);
    const double log_star = std::max(rep_log(pert), rep_log(free));
    const Mat2 diff = pert.m * std::exp(pert.log_scale - log_star) -
                      free.m * std::exp(free.log_scale - log_star);
    const double dn = diff.norm2();
    report.measured_log = dn == 0.0 ? kNegInf : log_star + std::log(dn);

    // Gronwall constant from the proof, by direct summation over the sites the
    // branch touches: sum_i c g_i exp(sum_{l > i} c g_l), c = e^{-(L+eps)}.
    const double c = std::exp(-(report.lyapunov_estimate + eps));
    const std::int64_t first_site = forward ? n : n - k;
    double tail = 0.0;
    double acc = 0.0;
    for (std::int64_t i = k - 1; i >= 0; --i) {
        const double cg = c * std::fabs(op.perturbation(first_site + i));
        acc += cg * std::exp(tail);
        tail += cg;
    }
    report.gronwall_constant = acc;

    report.pass = report.measured_log <= report.bound_exponent + slack;
    return report;
}

UniformBoundReport uniform_upper_bound_check(const OperatorSpec& op, double e_min, double e_max,
                                             double eps, std::int64_t k, int samples,
                                             std::uint64_t seed, std::int64_t lyap_k,
                                             int lyap_grid) {
    if (k < 1) throw InvalidSpec("uniform_upper_bound_check: k must be >= 1");
    if (samples < 1) throw InvalidSpec("uniform_upper_bound_check: samples must be >= 1");

    // deterministic (E, theta, n) grid; seeded offset only rotates the theta grid
    const int ne = std::max(1, std::min(24, static_cast<int>(std::cbrt(static_cast<double>(samples)))));
    const int per_e = std::max(1, samples / ne);
    const int ntheta = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(per_e))));
    const int nn = std::max(1, per_e / ntheta);
    num::Rng rng(seed);
    const double theta_offset = rng.uniform();

    UniformBoundReport report;
    report.worst = kNegInf;

    for (int ie = 0; ie < ne; ++ie) {
        const double E = ne == 1 ? 0.5 * (e_min + e_max)
                                 : e_min + (e_max - e_min) * static_cast<double>(ie) /
                                               static_cast<double>(ne - 1);
        const double lhat = lyapunov(op.without_perturbation(), E, lyap_k, lyap_grid);
        for (int it = 0; it < ntheta; ++it) {
            std::vector<double> theta = op.potential.theta();
            for (auto& t : theta)
                t = num::wrap_unit(t + theta_offset +
                                   static_cast<double>(it) / static_cast<double>(ntheta));
            const auto site = [&](std::int64_t m) {
                return op.potential.site_value(m, theta) + op.perturbation(m);
            };
            for (int in = 0; in < nn; ++in) {
                const std::int64_t n =
                    -2 * k + (4 * k * static_cast<std::int64_t>(in)) / std::max(1, nn);
                const ScaledMat2 prod = forward_product(site, E, n, k);
                const double val = prod.log_norm() / static_cast<double>(k) - (lhat + eps);
                ++report.samples;
                if (val > report.worst) {
                    report.worst = val;
                    report.worst_E = E;
                    report.worst_theta = theta[0];
                    report.worst_n = n;
                }
            }
        }
    }
    return report;
}

double fibered_rotation(const OperatorSpec& op, double E, std::int64_t iterations) {
    if (!op.perturbation.is_zero())
        throw InvalidSpec("fibered_rotation: defined for the unperturbed cocycle");
    if (iterations < 1) throw InvalidSpec("fibered_rotation: need at least one iterate");

    // Vector-angle increments folded into [-1/4, 3/4): transfer matrices map the
    // right half plane to the upper and the left to the lower, so the true
    // per-step lift always lies in that window.
    Vec2 v{1.0, 0.0};
    double sum = 0.0;
    double y = 0.0;
    for (std::int64_t j = 0; j < iterations; ++j) {
        const Mat2 A = transfer_step(E, op.potential.site_value(j));
        Vec2 w = A * v;
        const double nw = w.norm();
        w = w * (1.0 / nw);
        const double yn = std::atan2(w.y, w.x) / (2.0 * M_PI);
        double raw = yn - y;
        raw -= std::floor(raw + 0.25);
        sum += raw;
        v = w;
        y = yn;
    }
    double rho = sum / static_cast<double>(iterations);
    rho -= std::floor(rho);
    if (rho > 0.75) rho -= 1.0;
    return std::clamp(rho, 0.0, 0.5);
}

} // namespace qpsl
