#pragma once

#include <cmath>
#include <algorithm>
#include <limits>

namespace qpsl {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double norm() const { return std::hypot(x, y); }
};

// Row-major 2x2 real matrix.
struct Mat2 {
    double a11 = 0.0, a12 = 0.0;
    double a21 = 0.0, a22 = 0.0;

    static Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
    static Mat2 diag(double d1, double d2) { return {d1, 0.0, 0.0, d2}; }

    Mat2 operator*(const Mat2& o) const {
        return {a11 * o.a11 + a12 * o.a21, a11 * o.a12 + a12 * o.a22,
                a21 * o.a11 + a22 * o.a21, a21 * o.a12 + a22 * o.a22};
    }
    Vec2 operator*(Vec2 v) const { return {a11 * v.x + a12 * v.y, a21 * v.x + a22 * v.y}; }
    Mat2 operator+(const Mat2& o) const { return {a11 + o.a11, a12 + o.a12, a21 + o.a21, a22 + o.a22}; }
    Mat2 operator-(const Mat2& o) const { return {a11 - o.a11, a12 - o.a12, a21 - o.a21, a22 - o.a22}; }
    Mat2 operator*(double s) const { return {a11 * s, a12 * s, a21 * s, a22 * s}; }

    double det() const { return a11 * a22 - a12 * a21; }
    Mat2 adjugate() const { return {a22, -a12, -a21, a11}; }

    double max_abs() const {
        return std::max(std::max(std::fabs(a11), std::fabs(a12)),
                        std::max(std::fabs(a21), std::fabs(a22)));
    }

    double frob_sq() const { return a11 * a11 + a12 * a12 + a21 * a21 + a22 * a22; }

    // Spectral norm: largest singular value, via sigma_max^2 = (f + sqrt(f^2 - 4 det^2))/2.
    double norm2() const {
        const double f = frob_sq();
        const double d = det();
        const double disc = std::max(0.0, f * f - 4.0 * d * d);
        return std::sqrt(0.5 * (f + std::sqrt(disc)));
    }
};

// 2x2 matrix with a separated log scale: represented value = exp(log_scale) * m.
// The mantissa is renormalized whenever its max-abs entry leaves [1/2, 2], so
// ordered transfer products up to k ~ 1e6 never overflow.
struct ScaledMat2 {
    Mat2 m = Mat2::identity();
    double log_scale = 0.0;

    static ScaledMat2 identity() { return {}; }
    static ScaledMat2 from(const Mat2& v) {
        ScaledMat2 s{v, 0.0};
        s.normalize();
        return s;
    }

    void normalize() {
        const double ma = m.max_abs();
        if (ma == 0.0) return; // zero matrix: keep scale as-is
        if (ma < 0.5 || ma > 2.0) {
            m = m * (1.0 / ma);
            log_scale += std::log(ma);
        }
    }

    ScaledMat2 operator*(const ScaledMat2& o) const {
        ScaledMat2 r{m * o.m, log_scale + o.log_scale};
        r.normalize();
        return r;
    }

    ScaledMat2 mul_plain(const Mat2& o) const {
        ScaledMat2 r{m * o, log_scale};
        r.normalize();
        return r;
    }

    // Inverse of a represented matrix with det = +1 (transfer products).
    // R^{-1} = adj(R) = e^{log_scale} adj(m): the adjugate is exact entry
    // shuffling, and the known unit determinant replaces the computed
    // det(m), which drowns in rounding noise once the product is long.
    ScaledMat2 inverse_unimodular() const {
        ScaledMat2 r{m.adjugate(), log_scale};
        r.normalize();
        return r;
    }

    double log_norm() const {
        const double n = m.norm2();
        return n == 0.0 ? -std::numeric_limits<double>::infinity() : log_scale + std::log(n);
    }

    // det of the represented matrix (finite only while 2*log_scale fits)
    double det_scaled() const { return m.det() * std::exp(2.0 * log_scale); }

    // Represented matrix; overflows for large log_scale, callers beware.
    Mat2 value() const { return m * std::exp(log_scale); }
};

} // namespace qpsl
