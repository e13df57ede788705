#include "vstar/gauge.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "vstar/errors.hpp"

namespace vstar {

namespace {

constexpr double kFourPi = 4.0 * 3.14159265358979323846;

// 8-point Gauss-Legendre rule on [-1, 1]
const double kGlX[8] = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                        -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                        0.7966664774136267,  0.9602898564975363};
const double kGlW[8] = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                        0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                        0.2223810344533745, 0.1012285362903763};

double gl_panel(const std::function<double(double)>& f, double a, double b) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double acc = 0.0;
    for (int j = 0; j < 8; ++j) acc += kGlW[j] * f(c + h * kGlX[j]);
    return acc * h;
}

} // namespace

MassFunction::MassFunction(std::function<double(double)> rho, int n_panels)
    : rho_(std::move(rho)), n_panels_(n_panels) {
    panel_cum_.assign(n_panels_ + 1, 0.0);
    auto integrand = [this](double z) {
        const double r = rho_(z);
        if (r < 0.0)
            throw SimError(TerminationCause::gauge_incompatibility,
                           "mass function: negative density sample at zeta = " +
                               std::to_string(z));
        return r * z * z;
    };
    for (int p = 0; p < n_panels_; ++p) {
        const double a = static_cast<double>(p) / n_panels_;
        const double b = static_cast<double>(p + 1) / n_panels_;
        panel_cum_[p + 1] = panel_cum_[p] + gl_panel(integrand, a, b);
    }
    total_ = panel_cum_[n_panels_];
}

double MassFunction::operator()(double x) const {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return total_;
    const double fp = x * n_panels_;
    const int p = std::min(static_cast<int>(fp), n_panels_ - 1);
    const double a = static_cast<double>(p) / n_panels_;
    auto integrand = [this](double z) { return rho_(z) * z * z; };
    return panel_cum_[p] + gl_panel(integrand, a, x);
}

double MassFunction::density(double x) const { return rho_(x); }

MassFunction mass_function(const EulerianData& data) { return MassFunction(data.rho_tilde0); }

MassFunction reference_mass_function(const Weight& w, double kappa) {
    const Weight wc = w;
    const double inv_k = 1.0 / kappa;
    return MassFunction([wc, inv_k](double z) {
        const double wd = wc.w_delta(z);
        return wd <= 0.0 ? 0.0 : std::pow(wd, inv_k);
    });
}

EulerianData reference_data(const Weight& w, double kappa, double lambda0, double lambda1) {
    const Weight wc = w;
    const double inv_k = 1.0 / kappa;
    const double vfac = std::pow(lambda0, 1.5 * kappa) * lambda1;
    EulerianData d;
    d.rho_tilde0 = [wc, inv_k](double z) {
        const double wd = wc.w_delta(z);
        return wd <= 0.0 ? 0.0 : std::pow(wd, inv_k);
    };
    // v_tilde = lambda0^{3k/2} lambda1 z / sqrt(1 - lambda1^2 z^2)
    d.v_tilde0 = [vfac, lambda1](double z) {
        return vfac * z / std::sqrt(1.0 - lambda1 * lambda1 * z * z);
    };
    return d;
}

GaugeMap solve_eta0(const RadialGrid& g, const MassFunction& m, const MassFunction& m_ref,
                    double kappa, double mass_tol) {
    GaugeMap out;
    out.mass_total = kFourPi * m.total();
    out.mass_ref = kFourPi * m_ref.total();
    const double M = m.total(), Mr = m_ref.total();
    if (Mr <= 0.0)
        throw SimError(TerminationCause::gauge_incompatibility,
                       "solve_eta0: reference mass vanishes (delta = 0 leaves no gauge)");
    if (std::abs(M - Mr) > mass_tol * Mr) {
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "solve_eta0: mass mismatch: M = %.12g vs M_ref = %.12g (rel %.3g)",
                      out.mass_total, out.mass_ref, std::abs(M - Mr) / Mr);
        throw SimError(TerminationCause::gauge_incompatibility, buf);
    }

    out.eta0.assign(g.size(), 0.0);
    out.eta0[0] = 0.0;
    out.eta0[g.size() - 1] = 1.0;
    const double pk = kappa / (1.0 + kappa);

    double residual = 0.0;
    for (int k = 1; k < g.size() - 1; ++k) {
        const double target = m_ref(g.node(k));
        // bracketed Newton for m(x) = target in the chart suited to the region
        double lo = 0.0, hi = 1.0;
        double x = g.node(k); // monotone maps close to identity seed well
        for (int it = 0; it < 100; ++it) {
            const double mx = m(x);
            const double err = mx - target;
            if (err > 0.0) hi = x; else lo = x;
            double step;
            const double mp = m.density(x) * x * x;
            if (target < 0.1 * M) {
                // chart u = m^{1/3}: u'(x) = m' / (3 m^{2/3}); regular at 0
                const double u = std::cbrt(mx), ut = std::cbrt(target);
                const double up = (mx > 0.0) ? mp / (3.0 * u * u) : m.density(0.0);
                step = (up > 0.0) ? (u - ut) / up : 0.0;
            } else if (target > 0.9 * M) {
                // chart v = (M - m)^{k/(1+k)}: regular at 1
                const double vm = std::pow(std::max(M - mx, 0.0), pk);
                const double vt = std::pow(std::max(M - target, 0.0), pk);
                const double vp = (M - mx > 0.0)
                                      ? -pk * std::pow(M - mx, pk - 1.0) * mp
                                      : -1.0;
                step = (vp != 0.0) ? (vm - vt) / vp : 0.0;
            } else {
                step = (mp > 0.0) ? err / mp : 0.0;
            }
            double xn = x - step;
            if (!(xn > lo) || !(xn < hi) || step == 0.0) xn = 0.5 * (lo + hi);
            if (std::abs(xn - x) < 1e-16 * std::max(1.0, x)) { x = xn; break; }
            x = xn;
        }
        out.eta0[k] = x;
        residual = std::max(residual, std::abs(m(x) - target));
    }
    for (int k = 1; k < g.size(); ++k)
        if (!(out.eta0[k] > out.eta0[k - 1]))
            throw SimError(TerminationCause::gauge_incompatibility,
                           "solve_eta0: eta0 lost monotonicity at node " + std::to_string(k));
    out.max_mass_residual = residual;
    return out;
}

InitialState build_initial_state(const RadialGrid& g, const EulerianData& data,
                                 const SimParams& params, const GaugeMap& gauge) {
    InitialState st;
    st.theta0.parity = Parity::odd;
    st.dtheta0.parity = Parity::odd;
    st.theta0.label = "Theta0";
    st.dtheta0.label = "dTheta0";
    st.theta0.v.resize(g.size());
    st.dtheta0.v.resize(g.size());
    const double lam0_m3k = std::pow(params.lambda0, -3.0 * params.kappa);
    const double lam0_3k2 = std::pow(params.lambda0, 1.5 * params.kappa);
    for (int k = 0; k < g.size(); ++k) {
        const double z = g.node(k);
        const double e = gauge.eta0[k];
        st.theta0.v[k] = e - z;
        const double vt = data.v_tilde0(e);
        const double u0 = std::sqrt(1.0 + lam0_m3k * vt * vt);
        // V = v_tilde/u^0 - (lambda'/lambda) z evaluated at eta0
        const double V = vt / u0 - lam0_3k2 * params.lambda1 * e;
        st.dtheta0.v[k] = V / lam0_3k2; // d_tau Theta = lambda^{-3k/2} V
        const double composed = st.dtheta0.v[k] + params.lambda1 * e;
        if (!(std::abs(composed) < 1.0))
            throw SimError(TerminationCause::causality,
                           "build_initial_state: superluminal speed at zeta = " +
                               std::to_string(z),
                           0.0, z);
    }
    st.theta0.v[0] = 0.0;
    st.dtheta0.v[0] = 0.0;
    return st;
}

double gauge_residual(const RadialGrid& g, const EulerianData& data, const GaugeMap& gauge,
                      const Weight& w, double kappa) {
    const std::vector<double> de = g.deriv(gauge.eta0);
    double worst = 0.0;
    for (int k = 0; k < g.size(); ++k) {
        const double z = g.node(k);
        const double xi = (k == 0) ? de[0] : gauge.eta0[k] / z;
        const double F0 = xi * xi * de[k];
        const double lhs = F0 * data.rho_tilde0(gauge.eta0[k]);
        const double wd = w.w_delta(z);
        const double rhs = wd <= 0.0 ? 0.0 : std::pow(wd, 1.0 / kappa);
        worst = std::max(worst, std::abs(lhs - rhs));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// CSV ingestion with monotone-in-zeta sample grids

namespace {

struct Samples {
    std::vector<double> z, y;
};

// cubic Hermite with centered slopes; clamped at the ends
double interp(const Samples& s, double x) {
    const auto& z = s.z;
    const auto& y = s.y;
    if (x <= z.front()) return y.front();
    if (x >= z.back()) return y.back();
    const auto it = std::upper_bound(z.begin(), z.end(), x);
    const int i = static_cast<int>(it - z.begin()) - 1;
    const int n = static_cast<int>(z.size());
    auto slope = [&](int j) {
        if (j <= 0) return (y[1] - y[0]) / (z[1] - z[0]);
        if (j >= n - 1) return (y[n - 1] - y[n - 2]) / (z[n - 1] - z[n - 2]);
        return (y[j + 1] - y[j - 1]) / (z[j + 1] - z[j - 1]);
    };
    const double h = z[i + 1] - z[i];
    const double u = (x - z[i]) / h;
    const double u2 = u * u, u3 = u2 * u;
    return (2 * u3 - 3 * u2 + 1) * y[i] + (u3 - 2 * u2 + u) * h * slope(i) +
           (-2 * u3 + 3 * u2) * y[i + 1] + (u3 - u2) * h * slope(i + 1);
}

} // namespace

EulerianData load_data_csv(const std::string& filename) {
    std::ifstream in(filename);
    if (!in) throw std::runtime_error("cannot open initial data file " + filename);
    auto rho = std::make_shared<Samples>();
    auto vel = std::make_shared<Samples>();
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (first && line.find("zeta") != std::string::npos) { first = false; continue; }
        first = false;
        std::istringstream ss(line);
        std::string a, b, c;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c, ','))
            throw std::runtime_error("malformed initial data row: " + line);
        const double z = std::stod(a);
        rho->z.push_back(z);
        rho->y.push_back(std::stod(b));
        vel->z.push_back(z);
        vel->y.push_back(std::stod(c));
    }
    if (rho->z.size() < 4) throw std::runtime_error("initial data file has too few rows");
    EulerianData d;
    d.rho_tilde0 = [rho](double z) { return std::max(0.0, interp(*rho, z)); };
    d.v_tilde0 = [vel](double z) { return interp(*vel, z); };
    return d;
}

void write_data_csv(const std::string& filename, const EulerianData& data, int n_samples) {
    std::FILE* f = std::fopen(filename.c_str(), "w");
    if (!f) throw std::runtime_error("cannot open " + filename);
    std::fprintf(f, "zeta,rho_tilde0,v_tilde0\n");
    for (int k = 0; k <= n_samples; ++k) {
        const double z = static_cast<double>(k) / n_samples;
        std::fprintf(f, "%.17g,%.17g,%.17g\n", z, data.rho_tilde0(z), data.v_tilde0(z));
    }
    std::fclose(f);
}

} // namespace vstar
