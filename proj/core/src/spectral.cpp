#include "qpsl/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qpsl/errors.hpp"
#include "qpsl/numeric.hpp"

namespace qpsl {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

int sign_of(double x) { return x > 0.0 ? 1 : (x < 0.0 ? -1 : 0); }

// shared scale-ladder recurrence driver; emit(k, mantissa, log_scale)
template <typename ValueAt, typename Emit>
void run_det_recurrence(std::int64_t K, const ValueAt& value_at, const Emit& emit) {
    double prev = 0.0; // P_{-1}
    double cur = 1.0;  // P_0
    double ls = 0.0;
    emit(0, cur, ls);
    for (std::int64_t k = 1; k <= K; ++k) {
        const double next = value_at(k) * cur - prev;
        prev = cur;
        cur = next;
        const double m = std::max(std::fabs(cur), std::fabs(prev));
        if (m != 0.0 && (m > 2.0 || m < 0.5)) {
            cur /= m;
            prev /= m;
            ls += std::log(m);
        }
        emit(k, cur, ls);
    }
}

} // namespace

DeterminantSequence::DeterminantSequence(const SiteFn& site, double E, std::int64_t n,
                                         std::int64_t K)
    : base_(n) {
    if (K < 0) throw InvalidSpec("determinant_sequence: K must be >= 0");
    mant_.resize(static_cast<std::size_t>(K) + 1);
    logs_.resize(static_cast<std::size_t>(K) + 1);
    run_det_recurrence(
        K, [&](std::int64_t k) { return E - site(n + k - 1); },
        [&](std::int64_t k, double m, double ls) {
            mant_[static_cast<std::size_t>(k)] = m;
            logs_[static_cast<std::size_t>(k)] = ls;
        });
}

DeterminantSequence::DeterminantSequence(const OperatorSpec& op, double E, std::int64_t n,
                                         std::int64_t K)
    : DeterminantSequence(op.site_fn(), E, n, K) {}

int DeterminantSequence::sign(std::int64_t k) const {
    return sign_of(mant_[static_cast<std::size_t>(k)]);
}

double DeterminantSequence::log_abs(std::int64_t k) const {
    const double m = mant_[static_cast<std::size_t>(k)];
    return m == 0.0 ? kNegInf : logs_[static_cast<std::size_t>(k)] + std::log(std::fabs(m));
}

double DeterminantSequence::value(std::int64_t k) const {
    return mant_[static_cast<std::size_t>(k)] * std::exp(logs_[static_cast<std::size_t>(k)]);
}

BackwardDeterminantSequence::BackwardDeterminantSequence(const SiteFn& site, double E,
                                                         std::int64_t m, std::int64_t K)
    : end_(m) {
    if (K < 0) throw InvalidSpec("determinant_sequence: K must be >= 0");
    mant_.resize(static_cast<std::size_t>(K) + 1);
    logs_.resize(static_cast<std::size_t>(K) + 1);
    run_det_recurrence(
        K, [&](std::int64_t j) { return E - site(m - j + 1); },
        [&](std::int64_t j, double mm, double ls) {
            mant_[static_cast<std::size_t>(j)] = mm;
            logs_[static_cast<std::size_t>(j)] = ls;
        });
}

int BackwardDeterminantSequence::sign(std::int64_t j) const {
    return sign_of(mant_[static_cast<std::size_t>(j)]);
}

double BackwardDeterminantSequence::log_abs(std::int64_t j) const {
    const double m = mant_[static_cast<std::size_t>(j)];
    return m == 0.0 ? kNegInf : logs_[static_cast<std::size_t>(j)] + std::log(std::fabs(m));
}

namespace {

std::int64_t sturm_count_impl(const std::vector<double>& diag, double E, double scale) {
    const double nudge = -std::numeric_limits<double>::epsilon() * std::max(1.0, scale);
    std::int64_t count = 0;
    double q = diag[0] - E;
    if (q == 0.0) q = nudge;
    if (q < 0.0) ++count;
    for (std::size_t i = 1; i < diag.size(); ++i) {
        q = (diag[i] - E) - 1.0 / q;
        if (q == 0.0) q = nudge;
        if (q < 0.0) ++count;
    }
    return count;
}

} // namespace

std::int64_t sturm_count(const BoxOperator& box, double E) {
    return sturm_count_impl(box.diagonal(), E, box.norm_bound());
}

std::vector<double> solve_tridiagonal_shifted(const std::vector<double>& diag, double shift,
                                              std::vector<double> rhs) {
    const std::size_t n = diag.size();
    if (rhs.size() != n) throw InvalidSpec("solve_tridiagonal: rhs size mismatch");
    if (n == 0) return {};

    std::vector<double> d(n), e(n, 0.0), f(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) d[i] = diag[i] - shift;
    for (std::size_t i = 0; i + 1 < n; ++i) e[i] = 1.0;

    const double tiny = 1e-300 * std::max(1.0, std::fabs(shift) + 2.0);

    // partial pivoting; the subdiagonal entry entering step i is 1 before any
    // swap, or the displaced old d[i] after one
    for (std::size_t i = 0; i + 1 < n; ++i) {
        double sub = 1.0;
        if (std::fabs(d[i]) < std::fabs(sub)) {
            std::swap(d[i], sub); // sub becomes old d[i]
            const double old_d1 = d[i + 1], old_e1 = e[i + 1];
            d[i + 1] = e[i];
            e[i + 1] = f[i];
            e[i] = old_d1;
            f[i] = old_e1;
            std::swap(rhs[i], rhs[i + 1]);
        }
        if (d[i] == 0.0) d[i] = tiny;
        const double m = sub / d[i];
        d[i + 1] -= m * e[i];
        e[i + 1] -= m * f[i];
        rhs[i + 1] -= m * rhs[i];
    }
    if (d[n - 1] == 0.0) d[n - 1] = tiny;

    std::vector<double> x(n);
    x[n - 1] = rhs[n - 1] / d[n - 1];
    if (n >= 2) x[n - 2] = (rhs[n - 2] - e[n - 2] * x[n - 1]) / d[n - 2];
    for (std::int64_t i = static_cast<std::int64_t>(n) - 3; i >= 0; --i) {
        const auto iu = static_cast<std::size_t>(i);
        x[iu] = (rhs[iu] - e[iu] * x[iu + 1] - f[iu] * x[iu + 2]) / d[iu];
    }
    return x;
}

namespace {

GreenSample green_cramer(const BoxOperator& box, double E, std::int64_t n1, std::int64_t n2) {
    const std::int64_t N1 = box.n1(), N2 = box.n2();
    const std::int64_t len = box.size();
    const SiteFn site = [&box](std::int64_t n) { return box.diag_at_site(n); };

    const DeterminantSequence fwd(site, E, N1, len);
    const BackwardDeterminantSequence bwd(site, E, N2, N2 - n2);

    const double den_log = fwd.log_abs(len);
    const int den_sign = fwd.sign(len);
    if (den_sign == 0) throw SingularBox("green_entry: determinant vanishes at E");

    const double la = fwd.log_abs(n1 - N1);
    const int sa = fwd.sign(n1 - N1);
    const double lb = bwd.log_abs(N2 - n2);
    const int sb = bwd.sign(N2 - n2);

    GreenSample out;
    out.n1 = n1;
    out.n2 = n2;
    out.E = E;
    out.log_magnitude = la + lb - den_log;
    out.sign = -sa * sb * den_sign;
    out.value = static_cast<double>(out.sign) * std::exp(out.log_magnitude);
    return out;
}

GreenSample green_solve(const BoxOperator& box, double E, std::int64_t n1, std::int64_t n2) {
    std::vector<double> rhs(static_cast<std::size_t>(box.size()), 0.0);
    rhs[static_cast<std::size_t>(n2 - box.n1())] = 1.0;
    const auto x = solve_tridiagonal_shifted(box.diagonal(), E, std::move(rhs));
    const double v = x[static_cast<std::size_t>(n1 - box.n1())];

    GreenSample out;
    out.n1 = n1;
    out.n2 = n2;
    out.E = E;
    out.value = v;
    out.sign = sign_of(v);
    out.log_magnitude = v == 0.0 ? kNegInf : std::log(std::fabs(v));
    return out;
}

} // namespace

GreenSample green_entry(const BoxOperator& box, double E, std::int64_t n1, std::int64_t n2,
                        GreenPath path) {
    if (n1 < box.n1() || n1 > box.n2() || n2 < box.n1() || n2 > box.n2())
        throw InvalidSpec("green_entry: requested sites outside the box");
    if (n1 > n2) std::swap(n1, n2); // G is symmetric

    // reject E within ~1e-13 * scale of a box eigenvalue
    const double h = 1e-13 * std::max(1.0, box.norm_bound());
    if (sturm_count_impl(box.diagonal(), E - h, box.norm_bound()) !=
        sturm_count_impl(box.diagonal(), E + h, box.norm_bound()))
        throw SingularBox("green_entry: E within 1e-13 of a box eigenvalue");

    if (path == GreenPath::Cramer || (path == GreenPath::Auto && box.size() <= 10000))
        return green_cramer(box, E, n1, n2);
    return green_solve(box, E, n1, n2);
}

WindowScanReport window_scan(const OperatorSpec& op, double E, std::int64_t N,
                             std::int64_t n_prime, double decay_rate_target, double slack) {
    if (N < 4) throw InvalidSpec("window_scan: N must be >= 4");
    if (n_prime < N * N) throw InvalidSpec("window_scan: N' must be >= N^2");

    const auto site = op.site_fn();

    auto scan_window = [&](std::int64_t a, std::int64_t b) {
        WindowScanReport::Window w;
        w.a = a;
        w.b = b;
        const std::int64_t len = b - a + 1;
        const DeterminantSequence fwd(site, E, a, len);
        const BackwardDeterminantSequence bwd(site, E, b, len);
        if (fwd.sign(len) == 0) {
            w.singular = true;
            w.worst = std::numeric_limits<double>::infinity();
            return w;
        }
        const double den = fwd.log_abs(len);
        double worst = kNegInf;
        for (std::int64_t i1 = 0; i1 < len; ++i1) {
            for (std::int64_t i2 = i1; i2 < len; ++i2) {
                const double lg = fwd.log_abs(i1) + bwd.log_abs(len - 1 - i2) - den;
                const double v = lg + decay_rate_target * static_cast<double>(i2 - i1) -
                                 slack * static_cast<double>(N);
                worst = std::max(worst, v);
            }
        }
        w.worst = worst;
        w.pass = worst <= 0.0;
        return w;
    };

    WindowScanReport report;
    const std::int64_t ra[4] = {1, 1, 2, 2};
    const std::int64_t rb[4] = {N, N - 1, N, N - 1};
    for (int i = 0; i < 4; ++i) {
        report.right[static_cast<std::size_t>(i)] = scan_window(ra[i] + n_prime, rb[i] + n_prime);
        report.left[static_cast<std::size_t>(i)] = scan_window(-rb[i] - n_prime, -ra[i] - n_prime);
    }
    auto pick_best = [](const std::array<WindowScanReport::Window, 4>& ws) {
        int best = -1;
        for (int i = 0; i < 4; ++i) {
            const auto& w = ws[static_cast<std::size_t>(i)];
            if (w.singular) continue;
            if (best < 0 || w.worst < ws[static_cast<std::size_t>(best)].worst) best = i;
        }
        return best;
    };
    report.best_right = pick_best(report.right);
    report.best_left = pick_best(report.left);
    for (const auto& w : report.right) report.any_right_pass |= w.pass;
    for (const auto& w : report.left) report.any_left_pass |= w.pass;
    report.pass = report.any_right_pass && report.any_left_pass;
    return report;
}

namespace {

double box_counting_fraction(const OperatorSpec& op, double E, std::int64_t box_size,
                             int theta_grid) {
    std::vector<double> vals(static_cast<std::size_t>(theta_grid));
    const int d = op.potential.dim();
    for (int j = 0; j < theta_grid; ++j) {
        std::vector<double> theta = op.potential.theta();
        for (int c = 0; c < d; ++c) {
            const double gen = (c == 0) ? 1.0 : static_cast<double>(2 * c + 1);
            theta[static_cast<std::size_t>(c)] = num::wrap_unit(
                theta[static_cast<std::size_t>(c)] +
                gen * static_cast<double>(j) / static_cast<double>(theta_grid));
        }
        std::vector<double> diag(static_cast<std::size_t>(box_size));
        for (std::int64_t n = 0; n < box_size; ++n)
            diag[static_cast<std::size_t>(n)] =
                op.potential.site_value(n, theta) + op.perturbation(n);
        const double scale = *std::max_element(diag.begin(), diag.end(),
                                               [](double a, double b) {
                                                   return std::fabs(a) < std::fabs(b);
                                               });
        vals[static_cast<std::size_t>(j)] =
            static_cast<double>(sturm_count_impl(diag, E, std::fabs(scale) + 2.0)) /
            static_cast<double>(box_size);
    }
    return num::pairwise_mean(vals);
}

} // namespace

double ids(const OperatorSpec& op, double E, std::int64_t box_size, int theta_grid) {
    if (!op.perturbation.is_zero() && op.perturbation.kind() != DecayKind::Table)
        throw InvalidSpec("ids: defined for the unperturbed family (Zero or finite Table only)");
    if (box_size < 10) throw InvalidSpec("ids: box_size must be >= 10");
    if (theta_grid < 1) throw InvalidSpec("ids: theta_grid must be >= 1");
    return box_counting_fraction(op, E, box_size, theta_grid);
}

bool IdsCurve::nondecreasing(double tol) const {
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] < values[i - 1] - tol) return false;
    return true;
}

IdsCurve ids_curve(const OperatorSpec& op, double e_min, double e_max, int grid_points,
                   std::int64_t box_size, int theta_grid) {
    if (grid_points < 2) throw InvalidSpec("ids_curve: need at least two grid points");
    IdsCurve curve;
    curve.energies.resize(static_cast<std::size_t>(grid_points));
    curve.values.resize(static_cast<std::size_t>(grid_points));
    for (int i = 0; i < grid_points; ++i)
        curve.energies[static_cast<std::size_t>(i)] =
            e_min + (e_max - e_min) * static_cast<double>(i) / static_cast<double>(grid_points - 1);
    num::parallel_for_index(static_cast<std::size_t>(grid_points), [&](std::size_t i) {
        curve.values[i] = ids(op, curve.energies[i], box_size, theta_grid);
    });
    return curve;
}

std::optional<int> gap_label(double ids_value, double alpha, int k_max, double tol) {
    if (ids_value < 0.0 || ids_value > 1.0)
        throw InvalidSpec("gap_label: ids_value must lie in [0, 1]");
    auto circle_dist = [](double x) {
        const double r = num::wrap_unit(x);
        return std::min(r, 1.0 - r);
    };
    int best_k = 0;
    double best = circle_dist(ids_value);
    for (int a = 1; a <= k_max; ++a) {
        for (int k : {a, -a}) {
            const double d = circle_dist(ids_value - static_cast<double>(k) * alpha);
            if (d < best) {
                best = d;
                best_k = k;
            }
        }
    }
    if (best <= tol) return best_k;
    return std::nullopt;
}

namespace {

void apply_tridiag(const std::vector<double>& diag, const std::vector<double>& x,
                   std::vector<double>& y) {
    const std::size_t n = diag.size();
    for (std::size_t i = 0; i < n; ++i) {
        double v = diag[i] * x[i];
        if (i > 0) v += x[i - 1];
        if (i + 1 < n) v += x[i + 1];
        y[i] = v;
    }
}

double norm2_vec(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

} // namespace

std::vector<EigenPair> eigenpairs_in_window(const BoxOperator& box, double E1, double E2,
                                            std::uint64_t seed) {
    if (E1 >= E2) throw InvalidSpec("eigenpairs_in_window: requires E1 < E2");
    const auto& diag = box.diagonal();
    const std::size_t n = diag.size();
    const double scale = box.norm_bound();
    const double bisect_tol = 1e-12 * std::max(1.0, scale);
    const double resid_tol = 1e-8 * std::max(1.0, scale);

    const std::int64_t c1 = sturm_count_impl(diag, E1, scale);
    const std::int64_t c2 = sturm_count_impl(diag, E2, scale);

    std::vector<EigenPair> out;
    num::Rng rng(seed);

    for (std::int64_t j = c1; j < c2; ++j) {
        double lo = E1, hi = E2;
        while (hi - lo > bisect_tol) {
            const double mid = 0.5 * (lo + hi);
            if (sturm_count_impl(diag, mid, scale) <= j)
                lo = mid;
            else
                hi = mid;
        }
        const double shift = 0.5 * (lo + hi);

        std::vector<double> x(n);
        for (auto& v : x) v = rng.sym();
        double nx = norm2_vec(x);
        for (auto& v : x) v /= nx;

        std::vector<double> y(n);
        double rayleigh = shift;
        double resid = std::numeric_limits<double>::infinity();
        for (int iter = 0; iter < 5; ++iter) {
            x = solve_tridiagonal_shifted(diag, shift, std::move(x));
            // re-orthogonalize against converged near-degenerate neighbors
            for (const auto& prev : out) {
                if (std::fabs(prev.value - shift) < 1e-8 * std::max(1.0, scale)) {
                    double dot = 0.0;
                    for (std::size_t i = 0; i < n; ++i) dot += x[i] * prev.vector[i];
                    for (std::size_t i = 0; i < n; ++i) x[i] -= dot * prev.vector[i];
                }
            }
            nx = norm2_vec(x);
            if (nx == 0.0 || !std::isfinite(nx)) {
                for (auto& v : x) v = rng.sym();
                nx = norm2_vec(x);
            }
            for (auto& v : x) v /= nx;
            if (iter < 1) continue; // two sweeps before the polish
            apply_tridiag(diag, x, y);
            rayleigh = 0.0;
            for (std::size_t i = 0; i < n; ++i) rayleigh += x[i] * y[i];
            double r = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = y[i] - rayleigh * x[i];
                r += d * d;
            }
            resid = std::sqrt(r);
            if (resid <= resid_tol) break;
        }
        if (resid > resid_tol)
            throw IllConditioned("eigenpairs_in_window: inverse iteration residual above tolerance");

        // fix sign: largest-magnitude entry positive
        std::size_t imax = 0;
        for (std::size_t i = 1; i < n; ++i)
            if (std::fabs(x[i]) > std::fabs(x[imax])) imax = i;
        if (x[imax] < 0.0)
            for (auto& v : x) v = -v;

        out.push_back(EigenPair{rayleigh, std::move(x)});
    }

    std::sort(out.begin(), out.end(),
              [](const EigenPair& a, const EigenPair& b) { return a.value < b.value; });
    return out;
}

double decay_rate(const std::vector<double>& psi, std::int64_t center_index) {
    if (psi.size() < 64) throw TooShort("decay_rate: vector length must be >= 64");
    if (center_index < 0 || center_index >= static_cast<std::int64_t>(psi.size()))
        throw InvalidSpec("decay_rate: center outside the vector");

    // exclude underflowed entries and the eigensolver noise floor: tails of
    // computed eigenvectors below ~1e-14 of the peak are solve noise, not
    // profile, and would flatten the fit
    double peak = 0.0;
    for (const double v : psi) peak = std::max(peak, std::fabs(v));
    const double floor = std::max(1e-280, 3e-14 * peak);

    std::vector<double> dist, logv;
    for (std::size_t i = 0; i < psi.size(); ++i) {
        const double a = std::fabs(psi[i]);
        if (a < floor) continue;
        dist.push_back(std::fabs(static_cast<double>(static_cast<std::int64_t>(i) - center_index)));
        logv.push_back(std::log(a));
    }
    if (dist.empty()) throw TooShort("decay_rate: no usable samples");
    const double dmax = *std::max_element(dist.begin(), dist.end());

    // fit over the outer half of the usable support
    std::vector<double> fx, fy;
    for (std::size_t i = 0; i < dist.size(); ++i) {
        if (dist[i] >= 0.5 * dmax) {
            fx.push_back(dist[i]);
            fy.push_back(logv[i]);
        }
    }
    if (fx.size() < 16) throw TooShort("decay_rate: fewer than 16 usable samples");
    return -num::fit_line(fx, fy).slope;
}

} // namespace qpsl
