#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vstar/weight.hpp"

namespace vstar {

// Parity of a radial profile about zeta = 0, in the extended sense: an odd
// field has all even zeta-derivatives vanishing at the origin, an even field
// all odd ones. Products follow the usual parity algebra.
enum class Parity { odd, even };

inline Parity flip(Parity p) { return p == Parity::odd ? Parity::even : Parity::odd; }

// Chebyshev-Gauss-Lobatto collocation grid on [0,1] with zeta_0 = 0 and
// zeta_n = 1, spectral differentiation matrix, and Clenshaw-Curtis weights.
// The vacuum endpoint zeta = 1 needs no boundary condition: the degenerate
// weight w(1) = 0 closes the collocation rows there.
class RadialGrid {
public:
    explicit RadialGrid(int n); // n+1 nodes

    int n() const { return n_; }
    int size() const { return n_ + 1; }
    const std::vector<double>& nodes() const { return zeta_; }
    double node(int k) const { return zeta_[k]; }
    const std::vector<double>& quad_weights() const { return qw_; }
    double min_spacing() const { return min_spacing_; }

    // Highest derivative-chain order the grid supports before round-off
    // dominates (empirical n/8 rule).
    int i_max() const { return n_ / 8; }

    // y = D x (spectral derivative at the nodes).
    std::vector<double> deriv(const std::vector<double>& x) const;

    // Integral of the sampled values by Clenshaw-Curtis.
    double integrate(const std::vector<double>& f) const;

    // Chebyshev coefficients of the nodal values and back.
    std::vector<double> to_coeffs(const std::vector<double>& x) const;
    std::vector<double> from_coeffs(const std::vector<double>& c) const;

private:
    int n_;
    std::vector<double> zeta_;
    std::vector<double> qw_;
    std::vector<double> D_; // (n+1)x(n+1), row-major
    double min_spacing_;
};

// Profile sampled at the grid nodes together with its parity tag.
struct RadialField {
    std::vector<double> v;
    Parity parity = Parity::odd;
    std::string label;

    RadialField() = default;
    RadialField(std::vector<double> values, Parity p, std::string lbl = "")
        : v(std::move(values)), parity(p), label(std::move(lbl)) {}

    double& operator[](std::size_t k) { return v[k]; }
    double operator[](std::size_t k) const { return v[k]; }
    std::size_t size() const { return v.size(); }
};

RadialField make_field(const RadialGrid& g, Parity p, double (*fn)(double));

// f/zeta with the parity limit at the origin: f'(0) for odd f, 0 for even f
// with f(0) = 0. Output parity flips.
RadialField divide_by_zeta(const RadialGrid& g, const RadialField& f);

// D_zeta f = d_zeta f + 2 f / zeta = zeta^-2 d_zeta(zeta^2 f).
// Origin value by parity: 3 f'(0) for odd f. Even input requires f(0) = 0,
// otherwise 2f/zeta diverges (origin-singularity error). Parity flips.
RadialField apply_Dz(const RadialGrid& g, const RadialField& f);

// Plain d_zeta with parity flip.
RadialField apply_dzeta(const RadialGrid& g, const RadialField& f);

// D_i: alternating chains starting with D_zeta,
//   D_0 = id, D_1 = D_zeta, D_2 = d_zeta D_zeta, D_3 = D_zeta d_zeta D_zeta, ...
// For odd f, D_{2l} f is odd (vanishes at 0) and D_{2l+1} f is even.
RadialField apply_Di(const RadialGrid& g, const RadialField& f, int i);

// Dbar_j: Dbar_0 = id, Dbar_j = D_{j-1} d_zeta for j >= 1.
RadialField apply_Dbar(const RadialGrid& g, const RadialField& f, int j);

// || f ||_i = ( int_0^1 w^{1/kappa + i} zeta^2 f^2 dzeta )^{1/2}.
double weighted_norm(const RadialGrid& g, const RadialField& f, int i,
                     const Weight& w, double kappa);

// Inner product (f,g)_i with the same weight.
double weighted_inner(const RadialGrid& g, const std::vector<double>& f,
                      const std::vector<double>& h, int i,
                      const Weight& w, double kappa);

// Weak exponential filter on the top fraction of Chebyshev modes (spectral
// stabilization knob; off by default in the driver).
struct SpectralFilter {
    double cutoff_fraction = 0.9;
    double alpha = 36.0;
    int order = 8;
    void apply(const RadialGrid& g, std::vector<double>& values) const;
};

// Numerical spot-check of a Hardy-type embedding at a fixed profile: returns
// LHS/RHS of the selected instance. Both sides are homogeneous of degree one,
// so the ratio is scale-invariant. Zero RHS is rejected.
enum class HardyVariant {
    sup_vs_energy,            // ||f||_inf vs energy-type RHS
    sup_over_zeta_vs_energy,  // ||f/zeta||_inf vs energy-type RHS
    l2_vs_derivative          // ||f||_0 vs (||D_1 f||_1^2 + ||f||_1^2)^{1/2}
};

struct HardyReport {
    double lhs = 0.0;
    double rhs = 0.0;
    double ratio = 0.0;
};

HardyReport hardy_probe(const RadialGrid& g, const RadialField& f,
                        HardyVariant variant, const Weight& w, double kappa);

} // namespace vstar
