#include <doctest.h>

#include <cmath>

#include "qpsl/lattice.hpp"
#include "qpsl/numeric.hpp"

using namespace qpsl;

namespace {
constexpr double kGolden = 0.6180339887498949;
}

TEST_CASE("eval_site basics") {
    OperatorSpec zero{PotentialSpec::zero(), PerturbationSpec::zero()};
    CHECK(eval_site(zero, 0) == 0.0);
    CHECK(eval_site(zero, -12345) == 0.0);

    // constant orbit: alpha = 0, theta = 0 -> v = 2 cos(0) = 2 at every site
    OperatorSpec amo{PotentialSpec::almost_mathieu(1.0, 0.0, 0.0), PerturbationSpec::zero()};
    CHECK(eval_site(amo, 5) == doctest::Approx(2.0).epsilon(1e-14));

    // appendix-style table value at n = 2: V(2) = -2/(4-1)
    OperatorSpec tab{PotentialSpec::zero(),
                     PerturbationSpec::table({{2, -2.0 / 3.0}, {3, -0.25}, {4, -2.0 / 15.0}})};
    CHECK(eval_site(tab, 2) == doctest::Approx(-2.0 / 3.0));
    CHECK(eval_site(tab, 99) == 0.0);
}

TEST_CASE("build_box shapes and values") {
    OperatorSpec zero{PotentialSpec::zero(), PerturbationSpec::zero()};
    const BoxOperator b0 = build_box(zero, 0, 2);
    CHECK(b0.size() == 3);
    for (std::int64_t i = 0; i < 3; ++i) CHECK(b0.diag_at_index(i) == 0.0);

    OperatorSpec amo{PotentialSpec::almost_mathieu(1.0, kGolden, 0.0), PerturbationSpec::zero()};
    const BoxOperator b1 = build_box(amo, 0, 1);
    CHECK(b1.diag_at_index(0) == doctest::Approx(2.0));
    CHECK(b1.diag_at_index(1) == doctest::Approx(2.0 * std::cos(2.0 * M_PI * kGolden)));

    OperatorSpec appendix{PotentialSpec::zero(),
                          PerturbationSpec::table({{2, -2.0 / 3.0}, {3, -0.25}, {4, -2.0 / 15.0}})};
    const BoxOperator b2 = build_box(appendix, 2, 4);
    CHECK(b2.diag_at_site(2) == doctest::Approx(-2.0 / 3.0));
    CHECK(b2.diag_at_site(3) == doctest::Approx(-0.25));
    CHECK(b2.diag_at_site(4) == doctest::Approx(-2.0 / 15.0));

    CHECK_THROWS_AS(build_box(zero, 3, 2), InvalidSpec);
}

TEST_CASE("phase covariance of the orbit evaluation") {
    // v(theta + (n+m) alpha) == v((theta + m alpha) + n alpha), up to the
    // rounding of the compensated angle reduction
    const PotentialSpec pot = PotentialSpec::almost_mathieu(1.7, kGolden, 0.2137);
    OperatorSpec op{pot, PerturbationSpec::zero()};
    num::Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const std::int64_t n = rng.uniform_int(-100000, 100000);
        const std::int64_t m = rng.uniform_int(-100000, 100000);
        const double shifted_theta = num::orbit_angle(0.2137, kGolden, m);
        OperatorSpec op2{pot.with_theta({shifted_theta}), PerturbationSpec::zero()};
        CHECK(eval_site(op, n + m) == doctest::Approx(eval_site(op2, n)).epsilon(1e-12));
    }
}

TEST_CASE("compensated angle reduction stays coherent at large n") {
    // frac(2^k * alpha) walked in two halves must agree with one shot
    const double alpha = kGolden;
    const std::int64_t n = 10000000;
    const double direct = num::orbit_angle(0.0, alpha, n);
    const double two_step = num::orbit_angle(num::orbit_angle(0.0, alpha, n / 2), alpha, n - n / 2);
    CHECK(direct == doctest::Approx(two_step).epsilon(1e-12));
}

TEST_CASE("Fourier sum is real for admissible specs") {
    num::Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const double re = rng.sym(), im = rng.sym();
        std::vector<FourierMode> modes{{{1}, {re, im}},
                                       {{-1}, {re, -im}},
                                       {{2}, {0.3, 0.0}},
                                       {{-2}, {0.3, 0.0}}};
        PotentialSpec pot(modes, {kGolden}, {rng.uniform()}, 1.0);
        for (int i = 0; i < 16; ++i) {
            const double x = rng.uniform();
            CHECK(std::fabs(pot.sample_complex({x}).imag()) < 1e-12);
        }
    }
}

TEST_CASE("non-real-symmetric Fourier blocks are rejected") {
    std::vector<FourierMode> bad{{{1}, {1.0, 0.5}}, {{-1}, {1.0, 0.5}}};
    CHECK_THROWS_AS(PotentialSpec(bad, {kGolden}, {0.0}, 1.0), InvalidSpec);
    std::vector<FourierMode> missing{{{1}, {1.0, 0.0}}};
    CHECK_THROWS_AS(PotentialSpec(missing, {kGolden}, {0.0}, 1.0), InvalidSpec);
}

TEST_CASE("perturbation evaluation and first moments") {
    const PerturbationSpec e = PerturbationSpec::exponential(2.0, 0.5);
    CHECK(e(0) == doctest::Approx(2.0));
    CHECK(e(-4) == doctest::Approx(2.0 * std::exp(-2.0)));

    const PerturbationSpec p = PerturbationSpec::power_law(1.0, 3.0);
    CHECK(p(0) == doctest::Approx(1.0));
    CHECK(p(3) == doctest::Approx(std::pow(4.0, -3.0)));

    // closed-form first moment vs direct summation truncated at |n| <= 50/s
    for (const double s : {0.3, 0.7, 1.5}) {
        const PerturbationSpec g = PerturbationSpec::exponential(1.3, s);
        const std::int64_t cut = static_cast<std::int64_t>(std::ceil(50.0 / s));
        double direct = 0.0;
        for (std::int64_t n = cut; n >= 1; --n)
            direct += 2.0 * static_cast<double>(n) * g(n);
        CHECK(g.first_moment() == doctest::Approx(direct).epsilon(1e-10));
        CHECK(g.in_ell_1_1());
    }

    CHECK(PerturbationSpec::power_law(1.0, 2.5).in_ell_1_1());
    CHECK_FALSE(PerturbationSpec::power_law(1.0, 2.0).in_ell_1_1());
    CHECK_FALSE(PerturbationSpec::power_law(1.0, 0.8).in_ell_1_1());
    CHECK(PerturbationSpec::table({{5, 2.0}, {-3, 1.0}}).first_moment() ==
          doctest::Approx(13.0));
    CHECK(PerturbationSpec::zero().in_ell_1_1());
}

TEST_CASE("power-law first moment agrees with direct summation") {
    const PerturbationSpec g = PerturbationSpec::power_law(0.7, 3.5);
    double direct = 0.0;
    for (std::int64_t n = 2000000; n >= 1; --n) direct += 2.0 * static_cast<double>(n) * g(n);
    CHECK(g.first_moment() == doctest::Approx(direct).epsilon(1e-6));
}

TEST_CASE("two-frequency potentials evaluate along the product orbit") {
    // v(x1, x2) = 2 cos(2 pi x1) + 2 cos(2 pi x2)
    std::vector<FourierMode> modes{{{1, 0}, {1.0, 0.0}},
                                   {{-1, 0}, {1.0, 0.0}},
                                   {{0, 1}, {1.0, 0.0}},
                                   {{0, -1}, {1.0, 0.0}}};
    const double a1 = 0.6180339887498949, a2 = std::sqrt(2.0) - 1.0;
    PotentialSpec pot(modes, {a1, a2}, {0.1, 0.2}, 0.5);
    CHECK(pot.dim() == 2);
    for (std::int64_t n : {0L, 7L, -12345L}) {
        const double x1 = num::orbit_angle(0.1, a1, n);
        const double x2 = num::orbit_angle(0.2, a2, n);
        const double expect = 0.5 * (2.0 * std::cos(2 * M_PI * x1) + 2.0 * std::cos(2 * M_PI * x2));
        CHECK(pot.site_value(n) == doctest::Approx(expect).epsilon(1e-13));
    }
}

TEST_CASE("gershgorin bounds") {
    OperatorSpec amo{PotentialSpec::almost_mathieu(1.5, kGolden, 0.1), PerturbationSpec::zero()};
    const BoxOperator box = build_box(amo, -10, 10);
    auto [lo, hi] = box.gershgorin();
    for (std::int64_t i = 0; i < box.size(); ++i) {
        CHECK(box.diag_at_index(i) >= lo + 2.0 - 1e-12);
        CHECK(box.diag_at_index(i) <= hi - 2.0 + 1e-12);
    }
}
