#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace qpsl::num {

// ---------------------------------------------------------------------------
// Compensated (double-double) helpers for the orbit angle theta + n*alpha.
// The transfer products walk orbits with |n| up to 1e7; a naive fmod(n*alpha)
// drifts by ~n*eps, which is visible in phase-covariance checks.
// ---------------------------------------------------------------------------

struct DD {
    double hi = 0.0;
    double lo = 0.0;
};

inline DD two_sum(double a, double b) {
    double s = a + b;
    double bb = s - a;
    double err = (a - (s - bb)) + (b - bb);
    return {s, err};
}

inline DD two_prod(double a, double b) {
    double p = a * b;
    double err = std::fma(a, b, -p);
    return {p, err};
}

// x mod 1 in [0,1)
inline double wrap_unit(double x) {
    double r = x - std::floor(x);
    if (r >= 1.0) r -= 1.0;
    if (r < 0.0) r += 1.0;
    return r;
}

// frac(theta + n*alpha), evaluated in twice working precision.
inline double orbit_angle(double theta, double alpha, std::int64_t n) {
    DD p = two_prod(static_cast<double>(n), alpha);
    // subtract integer parts early so the compensated tail stays significant
    double base = std::floor(p.hi);
    DD s = two_sum(p.hi - base, p.lo);
    DD t = two_sum(s.hi, theta);
    double r = t.hi + (t.lo + s.lo);
    return wrap_unit(r);
}

// ---------------------------------------------------------------------------
// Deterministic reductions
// ---------------------------------------------------------------------------

// Pairwise tree sum; deterministic for a fixed element order regardless of
// how the elements were produced (serially or by several workers).
inline double pairwise_sum(std::span<const double> xs) {
    const std::size_t n = xs.size();
    if (n == 0) return 0.0;
    if (n <= 8) {
        double s = 0.0;
        for (double x : xs) s += x;
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(xs.subspan(0, half)) + pairwise_sum(xs.subspan(half));
}

inline double pairwise_mean(std::span<const double> xs) {
    return xs.empty() ? 0.0 : pairwise_sum(xs) / static_cast<double>(xs.size());
}

// ---------------------------------------------------------------------------
// Thread control. Grid loops fill an index-addressed buffer in parallel and
// reduce it with pairwise_sum afterwards, so results do not depend on the
// worker count.
// ---------------------------------------------------------------------------

void set_thread_count(int n);
int thread_count();

// Evaluates fn(i) for i in [0, n) using the global thread count.
void parallel_for_index(std::size_t n, const std::function<void(std::size_t)>& fn);

// ---------------------------------------------------------------------------
// Portable deterministic RNG (splitmix64). std distributions are
// implementation-defined, so draws are derived from raw 64-bit output.
// ---------------------------------------------------------------------------

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0,1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) { // inclusive
        return lo + static_cast<std::int64_t>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
    }

    // symmetric unit-ish values for seeding iteration vectors
    double sym() { return 2.0 * uniform() - 1.0; }

  private:
    std::uint64_t state_;
};

// FNV-1a, used for config hashes in run directory names.
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

// Least-squares slope of y against x.
struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};

inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double d = static_cast<double>(n) * sxx - sx * sx;
    LineFit f;
    if (d != 0.0) {
        f.slope = (static_cast<double>(n) * sxy - sx * sy) / d;
        f.intercept = (sy - f.slope * sx) / static_cast<double>(n);
    }
    return f;
}

} // namespace qpsl::num
