#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qpsl/errors.hpp"

namespace qpsl {

// One Fourier mode of the sampling function: amplitude for exp(2*pi*i <k, x>).
struct FourierMode {
    std::vector<int> k;
    std::complex<double> amp;
};

// Analytic sampling function v (finite Fourier series) together with the
// frequency alpha, phase theta (both taken mod 1 componentwise) and the
// coupling constant multiplying the sampling function.
class PotentialSpec {
  public:
    PotentialSpec(std::vector<FourierMode> modes, std::vector<double> alpha,
                  std::vector<double> theta, double coupling);

    static PotentialSpec zero();
    // v(x) = 2 cos(2 pi x), i.e. modes {+1, -1} with amplitude 1, scaled by coupling.
    static PotentialSpec almost_mathieu(double coupling, double alpha, double theta = 0.0);

    int dim() const { return dim_; }
    double coupling() const { return coupling_; }
    const std::vector<double>& alpha() const { return alpha_; }
    const std::vector<double>& theta() const { return theta_; }
    const std::vector<FourierMode>& modes() const { return modes_; }

    // Full complex Fourier sum at x (tests check the imaginary part stays ~0).
    std::complex<double> sample_complex(const std::vector<double>& x) const;
    double sample(const std::vector<double>& x) const { return sample_complex(x).real(); }

    // coupling * v(theta + n alpha), with compensated angle reduction.
    double site_value(std::int64_t n) const;
    double site_value(std::int64_t n, const std::vector<double>& theta_override) const;

    // max_x |coupling * v(x)| upper bound from the coefficients
    double sup_bound() const;

    PotentialSpec with_theta(std::vector<double> theta) const;
    PotentialSpec with_coupling(double coupling) const;

  private:
    std::vector<FourierMode> modes_;
    std::vector<double> alpha_;
    std::vector<double> theta_;
    double coupling_ = 0.0;
    int dim_ = 1;
};

enum class DecayKind { Zero, Exponential, PowerLaw, Table };

// Decaying perturbation g(n).
//   Exponential(C, s): C * exp(-s |n|)
//   PowerLaw(C, gamma): C * (1 + |n|)^(-gamma)   ((1+|n|) avoids the n = 0 singularity)
//   Table: explicit finitely supported values, zero outside
class PerturbationSpec {
  public:
    static PerturbationSpec zero();
    static PerturbationSpec exponential(double C, double s);
    static PerturbationSpec power_law(double C, double gamma);
    static PerturbationSpec table(std::map<std::int64_t, double> values);

    DecayKind kind() const { return kind_; }
    bool is_zero() const { return kind_ == DecayKind::Zero; }

    double operator()(std::int64_t n) const;

    // Sum |n| |g(n)|; +inf when the first moment diverges (PowerLaw gamma <= 2).
    double first_moment() const;
    // Membership flag for the weighted-l1 class: finite first moment.
    bool in_ell_1_1() const;

    double amplitude() const { return c_; }
    double rate() const { return rate_; } // s or gamma
    const std::map<std::int64_t, double>& table_values() const { return table_; }

  private:
    DecayKind kind_ = DecayKind::Zero;
    double c_ = 0.0;
    double rate_ = 1.0;
    std::map<std::int64_t, double> table_;
};

// The perturbed operator: site n carries coupling * v(theta + n alpha) + g(n),
// hopping is the discrete Laplacian (constant 1).
struct OperatorSpec {
    PotentialSpec potential;
    PerturbationSpec perturbation;

    double site(std::int64_t n) const { return potential.site_value(n) + perturbation(n); }
    std::function<double(std::int64_t)> site_fn() const {
        return [*this](std::int64_t n) { return site(n); };
    }
    OperatorSpec without_perturbation() const { return {potential, PerturbationSpec::zero()}; }
};

double eval_site(const OperatorSpec& op, std::int64_t n);

// Finite truncation to [n1, n2] with zero boundary conditions: symmetric
// tridiagonal, unit off-diagonal.
class BoxOperator {
  public:
    BoxOperator(std::int64_t n1, std::int64_t n2, std::vector<double> diagonal);

    std::int64_t n1() const { return n1_; }
    std::int64_t n2() const { return n2_; }
    std::int64_t size() const { return static_cast<std::int64_t>(diag_.size()); }

    double diag_at_index(std::int64_t i) const { return diag_[static_cast<std::size_t>(i)]; }
    double diag_at_site(std::int64_t n) const { return diag_[static_cast<std::size_t>(n - n1_)]; }
    const std::vector<double>& diagonal() const { return diag_; }

    // [min, max] Gershgorin bounds for the spectrum
    std::pair<double, double> gershgorin() const;
    // infinity-norm bound, max |diag| + 2
    double norm_bound() const;

  private:
    std::int64_t n1_;
    std::int64_t n2_;
    std::vector<double> diag_;
};

BoxOperator build_box(const OperatorSpec& op, std::int64_t n1, std::int64_t n2);

} // namespace qpsl
