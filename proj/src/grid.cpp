#include "vstar/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "vstar/errors.hpp"

namespace vstar {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

RadialGrid::RadialGrid(int n) : n_(n) {
    if (n < 8) throw std::invalid_argument("RadialGrid: need at least 9 nodes");
    const int m = n + 1;
    zeta_.resize(m);
    for (int k = 0; k <= n; ++k) {
        // zeta_k = (1 - cos(k pi / n)) / 2, increasing, with exact endpoints
        zeta_[k] = 0.5 * (1.0 - std::cos(kPi * k / n));
    }
    zeta_[0] = 0.0;
    zeta_[n] = 1.0;
    min_spacing_ = std::numeric_limits<double>::max();
    for (int k = 0; k < n; ++k) min_spacing_ = std::min(min_spacing_, zeta_[k + 1] - zeta_[k]);

    // differentiation matrix from barycentric weights: b_k = (-1)^k d_k,
    // d_k = 1/2 at the ends, 1 inside (affine maps leave them unchanged)
    std::vector<double> b(m);
    for (int k = 0; k <= n; ++k) {
        b[k] = (k % 2 == 0 ? 1.0 : -1.0);
        if (k == 0 || k == n) b[k] *= 0.5;
    }
    D_.assign(static_cast<std::size_t>(m) * m, 0.0);
    for (int i = 0; i <= n; ++i) {
        double diag = 0.0;
        for (int j = 0; j <= n; ++j) {
            if (i == j) continue;
            const double dij = (b[j] / b[i]) / (zeta_[i] - zeta_[j]);
            D_[static_cast<std::size_t>(i) * m + j] = dij;
            diag -= dij;
        }
        D_[static_cast<std::size_t>(i) * m + i] = diag;
    }

    // Clenshaw-Curtis weights for nodes cos(k pi / n) on [-1,1], scaled to [0,1]
    qw_.assign(m, 0.0);
    const bool even = (n % 2 == 0);
    qw_[0] = qw_[n] = even ? 1.0 / (n * n - 1.0) : 1.0 / (n * n);
    for (int i = 1; i < n; ++i) {
        const double theta = kPi * i / n;
        double v = 1.0;
        const int kmax = even ? n / 2 - 1 : (n - 1) / 2;
        for (int k = 1; k <= kmax; ++k) v -= 2.0 * std::cos(2.0 * k * theta) / (4.0 * k * k - 1.0);
        if (even) v -= std::cos(n * theta) / (n * n - 1.0);
        qw_[i] = 2.0 * v / n;
    }
    for (double& q : qw_) q *= 0.5; // interval length 1
}

std::vector<double> RadialGrid::deriv(const std::vector<double>& x) const {
    const int m = n_ + 1;
    std::vector<double> y(m, 0.0);
    for (int i = 0; i < m; ++i) {
        const double* row = &D_[static_cast<std::size_t>(i) * m];
        double acc = 0.0;
        for (int j = 0; j < m; ++j) acc += row[j] * x[j];
        y[i] = acc;
    }
    return y;
}

double RadialGrid::integrate(const std::vector<double>& f) const {
    double acc = 0.0;
    for (int k = 0; k <= n_; ++k) acc += qw_[k] * f[k];
    return acc;
}

std::vector<double> RadialGrid::to_coeffs(const std::vector<double>& x) const {
    // type-I DCT by direct summation; fine for the grid sizes used here
    const int m = n_ + 1;
    std::vector<double> c(m, 0.0);
    for (int k = 0; k <= n_; ++k) {
        double acc = 0.0;
        for (int j = 0; j <= n_; ++j) {
            const double fac = (j == 0 || j == n_) ? 0.5 : 1.0;
            acc += fac * x[j] * std::cos(kPi * k * j / n_);
        }
        c[k] = 2.0 * acc / n_;
        if (k == 0 || k == n_) c[k] *= 0.5;
    }
    return c;
}

std::vector<double> RadialGrid::from_coeffs(const std::vector<double>& c) const {
    const int m = n_ + 1;
    std::vector<double> x(m, 0.0);
    for (int j = 0; j <= n_; ++j) {
        double acc = 0.0;
        for (int k = 0; k <= n_; ++k) acc += c[k] * std::cos(kPi * k * j / n_);
        x[j] = acc;
    }
    return x;
}

RadialField make_field(const RadialGrid& g, Parity p, double (*fn)(double)) {
    RadialField f;
    f.parity = p;
    f.v.resize(g.size());
    for (int k = 0; k < g.size(); ++k) f.v[k] = fn(g.node(k));
    return f;
}

RadialField divide_by_zeta(const RadialGrid& g, const RadialField& f) {
    RadialField out;
    out.parity = flip(f.parity);
    out.v.resize(f.v.size());
    for (int k = 1; k < g.size(); ++k) out.v[k] = f.v[k] / g.node(k);
    if (f.parity == Parity::odd) {
        out.v[0] = g.deriv(f.v)[0]; // limit f/zeta -> f'(0)
    } else {
        out.v[0] = 0.0; // even with f(0) = 0: limit is 0
    }
    return out;
}

RadialField apply_Dz(const RadialGrid& g, const RadialField& f) {
    if (f.parity == Parity::even) {
        double amax = 0.0;
        for (double x : f.v) amax = std::max(amax, std::abs(x));
        if (std::abs(f.v[0]) > 1e-10 * std::max(1.0, amax))
            throw SimError(TerminationCause::instability,
                           "apply_Dz: even input with nonzero origin value (2f/zeta diverges)");
    }
    const std::vector<double> df = g.deriv(f.v);
    const RadialField over_z = divide_by_zeta(g, f);
    RadialField out;
    out.parity = flip(f.parity);
    out.v.resize(f.v.size());
    for (int k = 0; k < g.size(); ++k) out.v[k] = df[k] + 2.0 * over_z.v[k];
    return out;
}

RadialField apply_dzeta(const RadialGrid& g, const RadialField& f) {
    RadialField out;
    out.parity = flip(f.parity);
    out.v = g.deriv(f.v);
    return out;
}

RadialField apply_Di(const RadialGrid& g, const RadialField& f, int i) {
    if (i < 0) throw std::invalid_argument("apply_Di: i must be >= 0");
    if (i > g.i_max())
        throw SimError(TerminationCause::resolution,
                       "apply_Di: order " + std::to_string(i) + " exceeds i_max(n) = " +
                           std::to_string(g.i_max()));
    RadialField cur = f;
    for (int k = 0; k < i; ++k) {
        cur = (k % 2 == 0) ? apply_Dz(g, cur) : apply_dzeta(g, cur);
    }
    return cur;
}

RadialField apply_Dbar(const RadialGrid& g, const RadialField& f, int j) {
    if (j == 0) return f;
    return apply_Di(g, apply_dzeta(g, f), j - 1);
}

double weighted_inner(const RadialGrid& g, const std::vector<double>& f,
                      const std::vector<double>& h, int i, const Weight& w, double kappa) {
    const double p = 1.0 / kappa + i;
    std::vector<double> integrand(g.size());
    for (int k = 0; k < g.size(); ++k) {
        const double z = g.node(k);
        integrand[k] = w.w_pow(z, p) * z * z * f[k] * h[k];
    }
    return g.integrate(integrand);
}

double weighted_norm(const RadialGrid& g, const RadialField& f, int i,
                     const Weight& w, double kappa) {
    const double q = weighted_inner(g, f.v, f.v, i, w, kappa);
    if (q < -1e-14)
        throw SimError(TerminationCause::instability,
                       "weighted_norm: negative radicand (internal invariant violation)");
    return std::sqrt(std::max(0.0, q));
}

void SpectralFilter::apply(const RadialGrid& g, std::vector<double>& values) const {
    std::vector<double> c = g.to_coeffs(values);
    const int n = g.n();
    const int k0 = static_cast<int>(cutoff_fraction * n);
    for (int k = k0 + 1; k <= n; ++k) {
        const double x = static_cast<double>(k - k0) / (n - k0);
        c[k] *= std::exp(-alpha * std::pow(x, order));
    }
    values = g.from_coeffs(c);
}

HardyReport hardy_probe(const RadialGrid& g, const RadialField& f, HardyVariant variant,
                        const Weight& w, double kappa) {
    HardyReport rep;
    auto sup = [](const std::vector<double>& v) {
        double m = 0.0;
        for (double x : v) m = std::max(m, std::abs(x));
        return m;
    };
    auto energy_rhs = [&]() {
        double acc = 0.0;
        for (int i = 0; i <= 2; ++i) {
            const RadialField di = apply_Di(g, f, i);
            const RadialField di1 = apply_Di(g, f, i + 1);
            const double a = weighted_norm(g, di, i, w, kappa);
            const double b = weighted_norm(g, di1, i + 1, w, kappa);
            acc += a * a + b * b;
        }
        return std::sqrt(acc);
    };
    switch (variant) {
        case HardyVariant::sup_vs_energy:
            rep.lhs = sup(f.v);
            rep.rhs = energy_rhs();
            break;
        case HardyVariant::sup_over_zeta_vs_energy:
            rep.lhs = sup(divide_by_zeta(g, f).v);
            rep.rhs = energy_rhs();
            break;
        case HardyVariant::l2_vs_derivative: {
            rep.lhs = weighted_norm(g, f, 0, w, kappa);
            const double a = weighted_norm(g, apply_Di(g, f, 1), 1, w, kappa);
            const double b = weighted_norm(g, f, 1, w, kappa);
            rep.rhs = std::sqrt(a * a + b * b);
            break;
        }
    }
    if (rep.rhs <= 0.0)
        throw SimError(TerminationCause::instability, "hardy_probe: zero RHS (degenerate probe)");
    rep.ratio = rep.lhs / rep.rhs;
    return rep;
}

} // namespace vstar
