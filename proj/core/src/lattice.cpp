#include "qpsl/lattice.hpp"

#include <algorithm>
#include <cmath>

#include "qpsl/numeric.hpp"

namespace qpsl {

namespace {

bool same_mode(const std::vector<int>& a, const std::vector<int>& b) { return a == b; }

std::vector<int> negated(const std::vector<int>& k) {
    std::vector<int> r(k.size());
    for (std::size_t i = 0; i < k.size(); ++i) r[i] = -k[i];
    return r;
}

} // namespace

PotentialSpec::PotentialSpec(std::vector<FourierMode> modes, std::vector<double> alpha,
                             std::vector<double> theta, double coupling)
    : modes_(std::move(modes)), alpha_(std::move(alpha)), theta_(std::move(theta)),
      coupling_(coupling) {
    if (alpha_.empty()) throw InvalidSpec("potential: frequency vector must have dimension >= 1");
    if (theta_.size() != alpha_.size())
        throw InvalidSpec("potential: theta and alpha must have the same dimension");
    dim_ = static_cast<int>(alpha_.size());
    for (auto& a : alpha_) a = num::wrap_unit(a);
    for (auto& t : theta_) t = num::wrap_unit(t);

    for (const auto& mode : modes_) {
        if (static_cast<int>(mode.k.size()) != dim_)
            throw InvalidSpec("potential: Fourier mode dimension mismatch");
    }
    // Real-valuedness: coefficient at -k must be the conjugate of the one at k.
    for (const auto& mode : modes_) {
        const auto nk = negated(mode.k);
        bool found = false;
        for (const auto& other : modes_) {
            if (same_mode(other.k, nk)) {
                if (std::abs(other.amp - std::conj(mode.amp)) > 1e-12 * (1.0 + std::abs(mode.amp)))
                    throw InvalidSpec("potential: Fourier block is not real-symmetric");
                found = true;
                break;
            }
        }
        if (!found && std::abs(mode.amp) > 1e-15)
            throw InvalidSpec("potential: Fourier block is not real-symmetric (missing -k mode)");
    }
}

PotentialSpec PotentialSpec::zero() { return PotentialSpec({}, {0.0}, {0.0}, 0.0); }

PotentialSpec PotentialSpec::almost_mathieu(double coupling, double alpha, double theta) {
    std::vector<FourierMode> modes{{{1}, {1.0, 0.0}}, {{-1}, {1.0, 0.0}}};
    return PotentialSpec(std::move(modes), {alpha}, {theta}, coupling);
}

std::complex<double> PotentialSpec::sample_complex(const std::vector<double>& x) const {
    std::complex<double> acc{0.0, 0.0};
    for (const auto& mode : modes_) {
        double phase = 0.0;
        for (int j = 0; j < dim_; ++j) phase += mode.k[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(j)];
        const double ang = 2.0 * M_PI * phase;
        acc += mode.amp * std::complex<double>{std::cos(ang), std::sin(ang)};
    }
    return acc;
}

double PotentialSpec::site_value(std::int64_t n) const { return site_value(n, theta_); }

double PotentialSpec::site_value(std::int64_t n, const std::vector<double>& theta_override) const {
    if (coupling_ == 0.0 || modes_.empty()) return 0.0;
    std::vector<double> x(static_cast<std::size_t>(dim_));
    for (int j = 0; j < dim_; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        x[ju] = num::orbit_angle(theta_override[ju], alpha_[ju], n);
    }
    return coupling_ * sample(x);
}

double PotentialSpec::sup_bound() const {
    double s = 0.0;
    for (const auto& mode : modes_) s += std::abs(mode.amp);
    return std::fabs(coupling_) * s;
}

PotentialSpec PotentialSpec::with_theta(std::vector<double> theta) const {
    return PotentialSpec(modes_, alpha_, std::move(theta), coupling_);
}

PotentialSpec PotentialSpec::with_coupling(double coupling) const {
    return PotentialSpec(modes_, alpha_, theta_, coupling);
}

PerturbationSpec PerturbationSpec::zero() { return PerturbationSpec{}; }

PerturbationSpec PerturbationSpec::exponential(double C, double s) {
    if (C < 0.0) throw InvalidSpec("perturbation: amplitude C must be >= 0");
    if (s <= 0.0) throw InvalidSpec("perturbation: exponential rate s must be > 0");
    PerturbationSpec p;
    p.kind_ = DecayKind::Exponential;
    p.c_ = C;
    p.rate_ = s;
    return p;
}

PerturbationSpec PerturbationSpec::power_law(double C, double gamma) {
    if (C < 0.0) throw InvalidSpec("perturbation: amplitude C must be >= 0");
    if (gamma <= 0.0) throw InvalidSpec("perturbation: power-law exponent must be > 0");
    PerturbationSpec p;
    p.kind_ = DecayKind::PowerLaw;
    p.c_ = C;
    p.rate_ = gamma;
    return p;
}

PerturbationSpec PerturbationSpec::table(std::map<std::int64_t, double> values) {
    PerturbationSpec p;
    p.kind_ = DecayKind::Table;
    p.table_ = std::move(values);
    return p;
}

double PerturbationSpec::operator()(std::int64_t n) const {
    switch (kind_) {
        case DecayKind::Zero:
            return 0.0;
        case DecayKind::Exponential:
            return c_ * std::exp(-rate_ * static_cast<double>(std::llabs(n)));
        case DecayKind::PowerLaw:
            return c_ * std::pow(1.0 + static_cast<double>(std::llabs(n)), -rate_);
        case DecayKind::Table: {
            auto it = table_.find(n);
            return it == table_.end() ? 0.0 : it->second;
        }
    }
    return 0.0;
}

double PerturbationSpec::first_moment() const {
    switch (kind_) {
        case DecayKind::Zero:
            return 0.0;
        case DecayKind::Exponential: {
            // sum_{n in Z} |n| C e^{-s|n|} = 2 C x / (1-x)^2, x = e^{-s}
            const double x = std::exp(-rate_);
            return 2.0 * c_ * x / ((1.0 - x) * (1.0 - x));
        }
        case DecayKind::PowerLaw: {
            if (rate_ <= 2.0) return std::numeric_limits<double>::infinity();
            // 2 C sum_{n>=1} n (1+n)^{-gamma}, summed until the integral tail
            // bound drops below target precision
            double s = 0.0;
            const double g = rate_;
            for (std::int64_t n = 1;; ++n) {
                const double nn = static_cast<double>(n);
                const double term = nn * std::pow(1.0 + nn, -g);
                s += term;
                if (n > 8) {
                    // tail <= int_n^inf x (1+x)^{-g} dx
                    const double tail = std::pow(1.0 + nn, 2.0 - g) / (g - 2.0);
                    if (tail < 1e-12 * (s + 1e-300)) break;
                }
                if (n > 100000000) break; // slow-decay safety stop
            }
            return 2.0 * c_ * s;
        }
        case DecayKind::Table: {
            double s = 0.0;
            for (const auto& [n, v] : table_) s += static_cast<double>(std::llabs(n)) * std::fabs(v);
            return s;
        }
    }
    return 0.0;
}

bool PerturbationSpec::in_ell_1_1() const { return std::isfinite(first_moment()); }

double eval_site(const OperatorSpec& op, std::int64_t n) { return op.site(n); }

BoxOperator::BoxOperator(std::int64_t n1, std::int64_t n2, std::vector<double> diagonal)
    : n1_(n1), n2_(n2), diag_(std::move(diagonal)) {
    if (n1_ > n2_) throw InvalidSpec("box: requires n1 <= n2");
    if (static_cast<std::int64_t>(diag_.size()) != n2_ - n1_ + 1)
        throw InvalidSpec("box: diagonal length does not match the interval");
}

std::pair<double, double> BoxOperator::gershgorin() const {
    double lo = diag_[0], hi = diag_[0];
    for (double d : diag_) {
        lo = std::min(lo, d);
        hi = std::max(hi, d);
    }
    return {lo - 2.0, hi + 2.0};
}

double BoxOperator::norm_bound() const {
    double m = 0.0;
    for (double d : diag_) m = std::max(m, std::fabs(d));
    return m + 2.0;
}

BoxOperator build_box(const OperatorSpec& op, std::int64_t n1, std::int64_t n2) {
    if (n1 > n2) throw InvalidSpec("build_box: requires n1 <= n2");
    std::vector<double> diag(static_cast<std::size_t>(n2 - n1 + 1));
    for (std::int64_t n = n1; n <= n2; ++n) diag[static_cast<std::size_t>(n - n1)] = op.site(n);
    return BoxOperator(n1, n2, std::move(diag));
}

} // namespace qpsl
