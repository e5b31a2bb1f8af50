#include <doctest.h>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>

#include "qpsl/numeric.hpp"
#include "qpsl/oscillation.hpp"
#include "qpsl/spectral.hpp"

using namespace qpsl;

namespace {
constexpr double kGolden = 0.6180339887498949;

// dense eigen decomposition of a box (vectors included)
Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> dense_eigs(const BoxOperator& box) {
    Eigen::VectorXd diag(box.size()), sub(box.size() - 1);
    for (std::int64_t i = 0; i < box.size(); ++i) diag(i) = box.diag_at_index(i);
    sub.setOnes();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub);
    return es;
}

// solution of the Jacobi equation propagated from two seed values at the
// left, with the same running renormalization the library traces use (plain
// doubles overflow within a few hundred sites at hyperbolic energies)
SolutionTrace propagate(const JacobiForm& J, double lambda, std::int64_t first, double u0,
                        double u1, std::int64_t length) {
    std::vector<double> mant(static_cast<std::size_t>(length));
    std::vector<double> logs(static_cast<std::size_t>(length));
    const double E = JacobiForm::energy_from_lambda(lambda);
    double lo = u0, hi = u1, ls = 0.0;
    mant[0] = lo;
    mant[1] = hi;
    logs[0] = logs[1] = 0.0;
    for (std::int64_t i = 2; i < length; ++i) {
        const double next = (E - J.b(first + i - 1)) * hi - lo;
        lo = hi;
        hi = next;
        const double m = std::max(std::fabs(lo), std::fabs(hi));
        if (m != 0.0 && (m > 2.0 || m < 0.5)) {
            lo /= m;
            hi /= m;
            ls += std::log(m);
        }
        mant[static_cast<std::size_t>(i)] = hi;
        logs[static_cast<std::size_t>(i)] = ls;
    }
    return SolutionTrace(first, std::move(mant), std::move(logs), lambda);
}

OperatorSpec random_bounded(num::Rng& rng) {
    return {PotentialSpec::almost_mathieu(rng.uniform(0.1, 0.8), kGolden, rng.uniform()),
            PerturbationSpec::exponential(rng.uniform(0.0, 0.5), rng.uniform(0.5, 1.5))};
}
} // namespace

TEST_CASE("jacobi mapping: lambda = -E, eigenvalues negate") {
    OperatorSpec op{PotentialSpec::almost_mathieu(0.9, kGolden, 0.17),
                    PerturbationSpec::exponential(0.5, 1.0)};
    const JacobiForm J(op);
    CHECK(J.a(5) == -1.0);
    CHECK(J.b(3) == eval_site(op, 3));
    CHECK(JacobiForm::lambda_from_energy(2.0) == -2.0);

    // 50-site truncations: the Jacobi and Schrodinger spectra negate, exactly
    const BoxOperator box = build_box(op, 0, 49);
    const auto es = dense_eigs(box);
    // Jacobi box: J = -H (a = -1 off-diagonal, -b diagonal)
    Eigen::VectorXd jdiag(box.size()), jsub(box.size() - 1);
    for (std::int64_t i = 0; i < box.size(); ++i) jdiag(i) = -box.diag_at_index(i);
    jsub.setConstant(-1.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> js;
    js.computeFromTridiagonal(jdiag, jsub, Eigen::EigenvaluesOnly);
    for (std::int64_t i = 0; i < box.size(); ++i) {
        CHECK(js.eigenvalues()(i) ==
              doctest::Approx(-es.eigenvalues()(box.size() - 1 - i)).epsilon(1e-12));
    }
}

TEST_CASE("node counting conventions") {
    const JacobiForm J{SiteFn{[](std::int64_t) { return 0.0; }}};
    // u = (1, 1, 1): no zeros, a u u' < 0 everywhere -> 0 nodes
    SolutionTrace u1(0, {1.0, 1.0, 1.0, 1.0}, 0.0);
    CHECK(count_nodes(J, u1, 0, 2) == 0);
    // u = (1, -1, 1): sign changes at 0 and 1 -> 2 nodes
    SolutionTrace u2(0, {1.0, -1.0, 1.0, -1.0}, 0.0);
    CHECK(count_nodes(J, u2, 0, 2) == 2);
    // sign-flipped counting: (-1)^n u alternating becomes constant sign
    CHECK(count_nodes(J, u2, 0, 2, true) == 0);
    CHECK(count_nodes(J, u1, 0, 2, true) == 2);

    // boundary convention: a zero at m does not count
    SolutionTrace u3(0, {0.0, 1.0, -1.0, 1.0}, 0.0);
    CHECK(count_nodes(J, u3, 0, 2) == 1); // node at 1 only

    SolutionTrace dead(0, {1.0, 0.0, 0.0, 1.0}, 0.0);
    CHECK_THROWS_AS(count_nodes(J, dead, 0, 2), DegenerateTrace);
    CHECK_THROWS_AS(count_nodes(J, u1, 0, 3), InvalidSpec); // coverage [m, n+1]
}

TEST_CASE("Dirichlet eigenvectors: j-th has exactly j nodes") {
    num::Rng rng(61);
    for (int trial = 0; trial < 60; ++trial) {
        OperatorSpec op = random_bounded(rng);
        const std::int64_t L = 40;
        const BoxOperator box = build_box(op, 0, L - 1);
        const JacobiForm J(op);
        const auto es = dense_eigs(box);
        // ascending Jacobi eigenvalues = descending Schrodinger energies
        for (std::int64_t j : {0L, 1L, 5L, 20L, 39L}) {
            const Eigen::Index col = static_cast<Eigen::Index>(L - 1 - j);
            std::vector<double> vals(static_cast<std::size_t>(L) + 2, 0.0);
            for (std::int64_t i = 0; i < L; ++i)
                vals[static_cast<std::size_t>(i + 1)] = es.eigenvectors()(i, col);
            // trace on [-1, L] with Dirichlet zeros at both ends
            SolutionTrace tr(-1, std::move(vals), -es.eigenvalues()(col));
            CHECK(count_nodes(J, tr, 0, L - 1) == j);
        }
    }
}

TEST_CASE("wronskian values and constancy at equal energy") {
    const JacobiForm J{SiteFn{[](std::int64_t) { return 0.0; }}};
    SolutionTrace a(0, {1.0, 0.0}, 0.0);
    SolutionTrace b(0, {0.0, 1.0}, 0.0);
    CHECK(wronskian(J, a, b, 0) == doctest::Approx(-1.0));
    CHECK(wronskian(J, a, a, 0) == 0.0);

    num::Rng rng(62);
    int tested = 0;
    for (int trial = 0; trial < 40 && tested < 10; ++trial) {
        OperatorSpec op = random_bounded(rng);
        const JacobiForm Jop(op);
        const double lambda = rng.uniform(-2.0, 2.0);
        const auto u1 = propagate(Jop, lambda, 0, rng.sym(), rng.sym(), 1002);
        const auto u2 = propagate(Jop, lambda, 0, rng.sym(), rng.sym(), 1002);
        // constancy at 1e-10 is resolvable only for bounded traces: at gap
        // energies the solutions blow up and the constant Wronskian drowns in
        // the cancellation noise of huge products
        if (u1.log_abs(1001) > 10.0 || u2.log_abs(1001) > 10.0) continue;
        const ScaledValue w0 = wronskian_scaled(Jop, u1, u2, 0);
        if (w0.sign() == 0) continue; // dependent seeds
        ++tested;
        for (std::int64_t n = 100; n <= 1000; n += 100) {
            const ScaledValue wn = wronskian_scaled(Jop, u1, u2, n);
            const double rel = wn.mant * std::exp(wn.log - w0.log) / w0.mant - 1.0;
            CHECK(std::fabs(rel) < 1e-10);
        }
    }
    CHECK(tested >= 5);
}

TEST_CASE("triangle inequality between Wronskian and solution node counts") {
    num::Rng rng(63);
    for (int trial = 0; trial < 200; ++trial) {
        OperatorSpec op = random_bounded(rng);
        const JacobiForm J(op);
        const double l1 = rng.uniform(-2.5, 2.0);
        const double l2 = l1 + rng.uniform(0.0, 1.0);
        const std::int64_t len = rng.uniform_int(24, 120);
        const auto u1 = propagate(J, l1, 0, rng.sym(), rng.sym(), len + 2);
        const auto u2 = propagate(J, l2, 0, rng.sym(), rng.sym(), len + 2);
        const std::int64_t m = 0, n = len;
        int w, c1, c2;
        try {
            w = count_wronskian_nodes(J, u1, u2, m, n);
            c1 = count_nodes(J, u1, m, n);
            c2 = count_nodes(J, u2, m, n);
        } catch (const DegenerateTrace&) {
            continue;
        }
        CHECK(std::abs(w - (c2 - c1)) <= 2);
    }
}

TEST_CASE("wronskian node count at equal energies") {
    num::Rng rng(64);
    OperatorSpec op = random_bounded(rng);
    const JacobiForm J(op);
    const auto u1 = propagate(J, 0.3, 0, 1.0, 0.4, 102);
    const auto u2 = propagate(J, 0.3, 0, 0.2, 1.0, 102);
    CHECK(count_wronskian_nodes(J, u1, u2, 0, 100) == 0); // constant nonzero W

    // proportional solutions: W identically zero (proportional by construction
    // so the mantissa products cancel exactly)
    std::vector<double> m3, l3;
    for (std::int64_t n = 0; n <= 101; ++n) {
        m3.push_back(u1.mantissa(n));
        l3.push_back(u1.log_scale(n) + std::log(2.0));
    }
    SolutionTrace u3(0, std::move(m3), std::move(l3), 0.3);
    CHECK_THROWS_AS(count_wronskian_nodes(J, u1, u3, 0, 100), DegenerateTrace);
}

TEST_CASE("weyl solution of the free operator at E = 3") {
    OperatorSpec freeop{PotentialSpec::zero(), PerturbationSpec::zero()};
    const auto w = weyl_solution(freeop, 3.0, Side::PlusInfinity, 256);
    const double r = (3.0 + std::sqrt(5.0)) / 2.0;
    // u(n) ~ r^{-n}: log-slope matches log r
    for (std::int64_t n = -100; n <= 100; n += 50) {
        const double slope = (w.trace.log_abs(n) - w.trace.log_abs(n + 10)) / 10.0;
        CHECK(slope == doctest::Approx(std::log(r)).epsilon(1e-6));
    }
    // minus side decays the other way
    const auto wm = weyl_solution(freeop, 3.0, Side::MinusInfinity, 256);
    const double slope_m = (wm.trace.log_abs(50) - wm.trace.log_abs(-50)) / 100.0;
    CHECK(slope_m == doctest::Approx(std::log(r)).epsilon(1e-6));
}

TEST_CASE("weyl solution rejects in-band energies") {
    OperatorSpec freeop{PotentialSpec::zero(), PerturbationSpec::zero()};
    CHECK_THROWS_AS(weyl_solution(freeop, 0.5, Side::PlusInfinity, 256), NotInGap);
}

TEST_CASE("free edge limit is the constant solution") {
    OperatorSpec freeop{PotentialSpec::zero(), PerturbationSpec::zero()};
    const auto w = weyl_solution_at_edge(freeop, 2.0, true, Side::PlusInfinity, 128);
    CHECK(w.edge_limit);
    double mn = 1e300, mx = -1e300;
    for (std::int64_t n = -128; n <= 128; ++n) {
        mn = std::min(mn, w.trace.value(n));
        mx = std::max(mx, w.trace.value(n));
    }
    CHECK(mn > 0.0);
    CHECK(mx / mn == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("rank-one bound state is counted by the Wronskian") {
    // free Laplacian + single-site well: one bound state at E = -sqrt(5)
    OperatorSpec op{PotentialSpec::zero(), PerturbationSpec::table({{0, -1.0}})};
    const auto report = gap_eigenvalue_count(op, -2.5, -2.1, 400);
    CHECK(report.count == 1);
    CHECK(report.stable);

    // dense oracle on a large centered box
    const BoxOperator box = build_box(op, -2000, 1999);
    CHECK(sturm_count(box, -2.1) - sturm_count(box, -2.5) == 1);
    // the bound-state energy itself
    const auto pairs = eigenpairs_in_window(box, -2.5, -2.1);
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].value == doctest::Approx(-std::sqrt(5.0)).epsilon(1e-10));

    // unperturbed operator has no eigenvalues in its gap
    OperatorSpec freeop{PotentialSpec::zero(), PerturbationSpec::zero()};
    const auto clean = gap_eigenvalue_count(freeop, -2.5, -2.1, 400);
    CHECK(clean.count == 0);
    CHECK(clean.stable);
}

TEST_CASE("appendix potential: edge Weyl solution matches 1/n") {
    const SiteFn site = [](std::int64_t n) {
        if (n == 0) return 2.0;
        if (n == 1) return 0.5;
        if (n == -1) return 2.5;
        const double x = static_cast<double>(n);
        return -2.0 / (x * x - 1.0);
    };
    const auto w = weyl_solution_at_edge(site, 2.0, true, Side::PlusInfinity, 400);
    const double s = w.trace.value(40) * 40.0; // scale fixed at n = 40
    for (std::int64_t n = 10; n <= 400; n += 13) {
        CHECK(w.trace.value(n) * static_cast<double>(n) / s ==
              doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("parabolic constructor: unperturbed system is exact") {
    MatrixSequence R{[](std::int64_t) { return Mat2{}; }, 0};
    const auto out = parabolic_solutions(1, 0.7, R, std::nullopt, 64);
    for (std::size_t i = 0; i < out.phi.size(); ++i) {
        const std::int64_t n = out.n0 + static_cast<std::int64_t>(i);
        CHECK(out.phi[i].x == doctest::Approx(1.0));
        CHECK(out.phi[i].y == doctest::Approx(0.0));
        CHECK(out.psi[i].x == doctest::Approx(0.7 * static_cast<double>(n)));
        CHECK(out.psi[i].y == doctest::Approx(1.0));
    }
    CHECK(out.max_residual < 1e-12);
}

TEST_CASE("parabolic constructor meets its own bound on n^-3 perturbations") {
    MatrixSequence R{[](std::int64_t n) {
                         const double v = std::pow(static_cast<double>(n), -3.0);
                         return Mat2::diag(v, v);
                     },
                     4096};
    const auto out = parabolic_solutions(1, 1.0, R, std::nullopt, 4096);
    CHECK(out.phi_deviation <= out.phi_bound);
    CHECK(out.max_residual < 1e-9);
    CHECK(out.min_phi_norm > 0.1); // no-decay witness
    CHECK(out.psi_tail_deviation < 0.1);

    // the -1 diagonal variant reduces to the +1 case
    const auto flip = parabolic_solutions(-1, 1.0, R, std::nullopt, 4096);
    CHECK(flip.phi_deviation <= flip.phi_bound);
    CHECK(flip.max_residual < 1e-9);
}

TEST_CASE("parabolic constructor refuses non-contracting setups") {
    MatrixSequence big{[](std::int64_t) { return Mat2::diag(1.0, 1.0); }, 64};
    CHECK_THROWS_AS(parabolic_solutions(1, 1.0, big, std::nullopt, 64), NoContraction);
}

TEST_CASE("hyperbolic constructor: unperturbed and perturbed bounds") {
    MatrixSequence zero{[](std::int64_t) { return Mat2{}; }, 0};
    const auto clean = hyperbolic_solutions(2.0, 1.0, zero, std::nullopt, 64);
    for (const auto& v : clean.psi_hat) {
        CHECK(v.x == doctest::Approx(1.0));
        CHECK(v.y == doctest::Approx(0.0));
    }

    MatrixSequence R{[](std::int64_t n) {
                         return Mat2::diag(std::pow(2.0, -static_cast<double>(n)), 0.0);
                     },
                     256};
    const auto out = hyperbolic_solutions(2.0, 1.0, R, std::nullopt, 256);
    CHECK(out.weighted_deviation <= out.bound);
    CHECK(out.max_residual < 1e-9);
}

TEST_CASE("hyperbolic solution transported by a synthetic conjugation") {
    // synthetic reducible cocycle A(theta) = B(theta + alpha) (C + R(n)) B(theta)^{-1}
    // with rotation-valued B. The constructed solution, transported by the
    // B(theta + n alpha) frame, must agree with direct iteration of A and, for
    // R = 0, reproduce the lambda^n b11(theta + n alpha) Weyl-type structure.
    const double lambda = 1.7, c = 0.4, alpha = kGolden, theta = 0.1234;
    auto B = [](double x) {
        const double a = 2.0 * M_PI * x;
        return Mat2{std::cos(a), -std::sin(a), std::sin(a), std::cos(a)};
    };
    auto angle = [&](std::int64_t n) {
        return num::wrap_unit(theta + static_cast<double>(n) * alpha);
    };
    const Mat2 C{lambda, c, 0.0, 1.0 / lambda};

    MatrixSequence R{[](std::int64_t n) {
                         const double v = 0.05 * std::pow(2.0, -static_cast<double>(n));
                         return Mat2{v, 0.0, 0.3 * v, -v};
                     },
                     200};
    const auto sol = hyperbolic_solutions(lambda, c, R, std::nullopt, 200);

    // transported solution w(n) = B(theta + n alpha) lambda^n psi_hat(n);
    // direct iteration w(n+1) = A(n) w(n) with A(n) = B(..n+1..)(C + R(n))B(..n..)^{-1}
    const std::int64_t n0 = sol.n0;
    Vec2 w = B(angle(n0)) * sol.psi_hat[0]; // scale lambda^{n0} folded out
    double logw = static_cast<double>(n0) * std::log(lambda);
    for (std::int64_t n = n0; n < 128; ++n) {
        const auto i = static_cast<std::size_t>(n - n0);
        const Vec2 expect_dir = B(angle(n)) * sol.psi_hat[i];
        const double expect_log = static_cast<double>(n) * std::log(lambda);
        // compare the transported constructed solution with the direct iterate
        const double rescale = std::exp(logw - expect_log);
        CHECK(w.x * rescale == doctest::Approx(expect_dir.x).epsilon(1e-6));
        CHECK(w.y * rescale == doctest::Approx(expect_dir.y).epsilon(1e-6));
        // R = 0 structure check on the tail where R has died off: ~ b11
        if (n > 40) {
            const double b11 = B(angle(n)).a11;
            CHECK(expect_dir.x == doctest::Approx(b11 * sol.psi_hat[i].norm())
                                      .epsilon(0.2)
                                      .scale(1.0));
        }
        const Mat2 An = B(angle(n + 1)) * (C + R.at(n)) * B(angle(n)).adjugate();
        w = An * w;
        const double nn = w.norm();
        if (nn > 0) {
            w = w * (1.0 / nn);
            logw += std::log(nn);
        }
    }
}
