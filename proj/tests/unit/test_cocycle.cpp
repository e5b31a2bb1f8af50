#include <doctest.h>

#include <cmath>

#include "qpsl/cocycle.hpp"
#include "qpsl/numeric.hpp"

using namespace qpsl;

namespace {
constexpr double kGolden = 0.6180339887498949;

OperatorSpec random_bounded_instance(num::Rng& rng) {
    // subcritical coupling keeps the cocycle bounded on most of the spectrum,
    // which is the regime where identity checks against 1e-10 are meaningful
    const double coupling = rng.uniform(0.1, 0.9);
    return {PotentialSpec::almost_mathieu(coupling, kGolden, rng.uniform()),
            PerturbationSpec::zero()};
}

double identity_distance(const ScaledMat2& p) {
    const Mat2 d = p.value() - Mat2::identity();
    return d.max_abs();
}
} // namespace

TEST_CASE("transfer product basics") {
    OperatorSpec freeop{PotentialSpec::zero(), PerturbationSpec::zero()};
    // E = 0: the step is a rotation of order 4
    const ScaledMat2 r4 = transfer_product(freeop, 0.0, 0, 4);
    CHECK(identity_distance(r4) == 0.0);
    CHECK(r4.log_scale == 0.0);

    // k = 1 is the bare transfer step
    OperatorSpec amo{PotentialSpec::almost_mathieu(1.3, kGolden, 0.37), PerturbationSpec::zero()};
    const ScaledMat2 m1 = transfer_product(amo, 0.5, 7, 1);
    const Mat2 expect = transfer_step(0.5, eval_site(amo, 7));
    CHECK((m1.value() - expect).max_abs() < 1e-14);

    CHECK_THROWS_AS(transfer_product(amo, 0.5, 0, 0), InvalidSpec);
}

TEST_CASE("inverse convention: M_{-k}(n) * M_k(n-k) = identity") {
    num::Rng rng(101);
    for (int trial = 0; trial < 30; ++trial) {
        OperatorSpec op = random_bounded_instance(rng);
        const double E = rng.uniform(-1.5, 1.5);
        const std::int64_t k = rng.uniform_int(1, 1000);
        const std::int64_t n = rng.uniform_int(-50, 50);
        const ScaledMat2 inv = transfer_product(op, E, n, -k);
        const ScaledMat2 fwd = transfer_product(op, E, n - k, k);
        const ScaledMat2 prod = inv * fwd;
        // the check resolves 1e-10 only while det(mantissa) ~ e^{-2 log_scale}
        // stays above the entry rounding noise; skip wilder instances
        if (std::fabs(fwd.log_scale) > 6.0) continue;
        CHECK(identity_distance(prod) < 1e-10);
    }
    // supercritical instances at short k
    for (int trial = 0; trial < 30; ++trial) {
        OperatorSpec op{PotentialSpec::almost_mathieu(rng.uniform(1.5, 3.0), kGolden, rng.uniform()),
                        PerturbationSpec::zero()};
        const double E = rng.uniform(-2.0, 2.0);
        const std::int64_t k = rng.uniform_int(1, 5);
        const ScaledMat2 fwd = transfer_product(op, E, -k, k);
        if (std::fabs(fwd.log_scale) > 6.0) continue;
        const ScaledMat2 prod = transfer_product(op, E, 0, -k) * fwd;
        CHECK(identity_distance(prod) < 1e-10);
    }
}

TEST_CASE("cocycle law: product(n, j+k) = product(n+j, k) * product(n, j)") {
    num::Rng rng(202);
    for (int trial = 0; trial < 25; ++trial) {
        OperatorSpec op = random_bounded_instance(rng);
        const double E = rng.uniform(-2.2, 2.2);
        const std::int64_t j = rng.uniform_int(1, 400);
        const std::int64_t k = rng.uniform_int(1, 400);
        const std::int64_t n = rng.uniform_int(-100, 100);
        const ScaledMat2 whole = transfer_product(op, E, n, j + k);
        const ScaledMat2 split = transfer_product(op, E, n + j, k) * transfer_product(op, E, n, j);
        const double ls = std::max(whole.log_norm(), split.log_norm());
        const double diff = (whole.m * std::exp(whole.log_scale - ls) -
                             split.m * std::exp(split.log_scale - ls))
                                .max_abs();
        CHECK(diff < 1e-9);
    }
}

TEST_CASE("unimodularity within representable scales") {
    num::Rng rng(303);
    for (int trial = 0; trial < 40; ++trial) {
        OperatorSpec op = random_bounded_instance(rng);
        const double E = rng.uniform(-2.5, 2.5);
        const std::int64_t k = rng.uniform_int(1, 60);
        const ScaledMat2 p = transfer_product(op, E, 0, k);
        if (std::fabs(p.log_scale) > 6.0) continue; // det(mantissa) below noise floor
        CHECK(p.det_scaled() == doctest::Approx(1.0).epsilon(1e-10));
    }
}

TEST_CASE("norm symmetry of unimodular matrices") {
    num::Rng rng(404);
    for (int trial = 0; trial < 40; ++trial) {
        OperatorSpec op = random_bounded_instance(rng);
        const ScaledMat2 p = transfer_product(op, rng.uniform(-2, 2), 0, rng.uniform_int(1, 30));
        const ScaledMat2 q = p.inverse_unimodular();
        CHECK(p.log_norm() == doctest::Approx(q.log_norm()).epsilon(1e-10));
    }
}

TEST_CASE("telescoping identities") {
    OperatorSpec unperturbed{PotentialSpec::almost_mathieu(1.1, kGolden, 0.3),
                             PerturbationSpec::zero()};
    // g = Zero: the perturbed and unperturbed products coincide bit for bit
    const auto r0 = telescoping_residuals(unperturbed, 0.7, -3, 64);
    CHECK(r0.max() == 0.0);

    // k = 1: one-term sums, residual at rounding level
    OperatorSpec pert{PotentialSpec::almost_mathieu(2.0, kGolden, 0.123),
                      PerturbationSpec::exponential(1.0, 0.5)};
    const auto r1 = telescoping_residuals(pert, 0.7, 0, 1);
    CHECK(r1.max() < 1e-14);

    // a long product with a live perturbation
    const auto r200 = telescoping_residuals(pert, 0.7, 0, 200);
    CHECK(r200.max() < 1e-9);

    CHECK_THROWS_AS(telescoping_residuals(pert, 0.7, 0, 0), InvalidSpec);
}

TEST_CASE("lyapunov estimator") {
    OperatorSpec freeop{PotentialSpec::zero(), PerturbationSpec::zero()};
    CHECK(lyapunov(freeop, 0.0, 512, 4) >= -1e-12);
    CHECK(lyapunov(freeop, 0.0, 512, 4) < 1e-6);

    OperatorSpec pert{PotentialSpec::zero(), PerturbationSpec::exponential(1.0, 1.0)};
    CHECK_THROWS_AS(lyapunov(pert, 0.0, 128, 4), InvalidSpec);

    // positivity up to rounding on random instances
    num::Rng rng(505);
    for (int trial = 0; trial < 10; ++trial) {
        OperatorSpec op = random_bounded_instance(rng);
        CHECK(lyapunov(op, rng.uniform(-3, 3), 256, 8) >= -1e-12);
    }
}

TEST_CASE("growth profiles: parabolic edge vs elliptic bulk") {
    OperatorSpec freeop{PotentialSpec::zero(), PerturbationSpec::zero()};
    const auto edge = growth_profile(freeop, 2.0, std::nullopt, 1 << 14);
    CHECK(edge.fit_exponent == doctest::Approx(1.0).epsilon(0.1));

    const auto bulk = growth_profile(freeop, 0.0, std::nullopt, 1 << 14);
    CHECK(std::fabs(bulk.fit_exponent) < 0.1);

    CHECK_THROWS_AS(growth_profile(freeop, 0.0, std::nullopt, 1), InvalidSpec);
}

TEST_CASE("deviation estimates") {
    // Zero perturbation: difference vanishes identically
    OperatorSpec clean{PotentialSpec::almost_mathieu(3.0, kGolden, 0.0), PerturbationSpec::zero()};
    const auto r0 = deviation_check(clean, 0.0, DeviationBranch::ForwardRight, 50, 100, 0.1, 0.0,
                                    500, 16);
    CHECK(r0.pass);
    CHECK(r0.measured_log == -std::numeric_limits<double>::infinity());

    OperatorSpec op{PotentialSpec::almost_mathieu(3.0, kGolden, 0.0),
                    PerturbationSpec::exponential(1.0, 1.0)};
    const auto r = deviation_check(op, 0.0, DeviationBranch::ForwardRight, 50, 100, 0.1, 0.0,
                                   2000, 32);
    CHECK(r.pass);
    CHECK(r.gronwall_constant >= 0.0);

    // n = 0: the bound degenerates to e^{(L+eps)k}; still holds
    const auto rz = deviation_check(op, 0.0, DeviationBranch::ForwardRight, 0, 100, 0.1, 0.0,
                                    2000, 32);
    CHECK(rz.pass);

    // the inverse-side branch on its own domain
    const auto ri = deviation_check(op, 0.0, DeviationBranch::InverseRight, 150, 100, 0.1, 0.0,
                                    2000, 32);
    CHECK(ri.pass);

    // branch / parameter mismatch is rejected
    CHECK_THROWS_AS(
        deviation_check(op, 0.0, DeviationBranch::ForwardRight, -5, 100, 0.1, 0.0, 500, 16),
        InvalidSpec);
    CHECK_THROWS_AS(
        deviation_check(op, 0.0, DeviationBranch::ForwardLeft, 5, 100, 0.1, 0.0, 500, 16),
        InvalidSpec);
}

TEST_CASE("uniform upper bound scan") {
    OperatorSpec freeop{PotentialSpec::zero(), PerturbationSpec::zero()};
    const auto clean = uniform_upper_bound_check(freeop, -1.0, 1.0, 0.1, 1000, 64, 1, 500, 8);
    CHECK(clean.worst < 0.0);

    // eps below -L must fail: (1/k) log||M_k|| - (L - 0.2) > 0 on the spectrum
    OperatorSpec amo3{PotentialSpec::almost_mathieu(3.0, kGolden, 0.0),
                      PerturbationSpec::zero()};
    const auto bad = uniform_upper_bound_check(amo3, -0.5, 0.5, -0.2, 1000, 27, 1, 2000, 32);
    CHECK(bad.worst > 0.0);
}

TEST_CASE("fibered rotation number") {
    OperatorSpec freeop{PotentialSpec::zero(), PerturbationSpec::zero()};
    CHECK(fibered_rotation(freeop, 0.0, 10000) == doctest::Approx(0.25).epsilon(1e-3));
    CHECK(fibered_rotation(freeop, 3.0, 10000) == doctest::Approx(0.0).epsilon(1e-3));
    CHECK(fibered_rotation(freeop, -3.0, 10000) == doctest::Approx(0.5).epsilon(1e-3));
    // free IDS relation: N(E) = 1 - arccos(E/2)/pi = 1 - 2 rho
    for (const double E : {-1.0, 0.5, 1.2}) {
        const double n_exact = 1.0 - std::acos(E / 2.0) / M_PI;
        CHECK(1.0 - 2.0 * fibered_rotation(freeop, E, 200000) ==
              doctest::Approx(n_exact).epsilon(2e-4));
    }
    OperatorSpec pert{PotentialSpec::zero(), PerturbationSpec::exponential(1.0, 1.0)};
    CHECK_THROWS_AS(fibered_rotation(pert, 0.0, 100), InvalidSpec);
}

TEST_CASE("lyapunov theta-grid average is deterministic across thread counts") {
    OperatorSpec amo{PotentialSpec::almost_mathieu(0.8, kGolden, 0.0), PerturbationSpec::zero()};
    num::set_thread_count(1);
    const double a = lyapunov(amo, 0.3, 2000, 32);
    num::set_thread_count(2);
    const double b = lyapunov(amo, 0.3, 2000, 32);
    num::set_thread_count(1);
    CHECK(a == b); // bitwise: pairwise reduction over a fixed index order
}
