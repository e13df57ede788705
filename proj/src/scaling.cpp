#include "vstar/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "vstar/errors.hpp"

namespace vstar {

void SimParams::validate() const {
    if (!(kappa > 0.0) || !(kappa <= 2.0 / 3.0))
        throw std::invalid_argument("kappa must lie in (0, 2/3]");
    if (!(delta >= 0.0)) throw std::invalid_argument("delta must be >= 0");
    if (!(lambda0 > 0.0)) throw std::invalid_argument("lambda0 must be > 0");
    if (!(lambda1 > 0.0) || !(lambda1 < 1.0))
        throw std::invalid_argument("lambda1 must lie in (0,1)");
    if (n_grid < 8) throw std::invalid_argument("n_grid must be >= 8");
    if (!(tau_max > 0.0)) throw std::invalid_argument("tau_max must be > 0");
    if (dt_tau < 0.0) throw std::invalid_argument("dt_tau must be >= 0 (0 = auto)");
    if (n_diag < 0 || n_diag > 4) throw std::invalid_argument("n_diag must lie in [0,4]");
}

namespace {

struct OdeState {
    double lam, mu, tau, s; // lambda, d_t lambda, tau, s
};

OdeState rhs(const OdeState& y, double delta, double kappa) {
    OdeState d;
    d.lam = y.mu;
    d.mu = (delta == 0.0) ? 0.0 : delta * std::pow(y.lam, -3.0 * kappa - 1.0);
    d.tau = 1.0 / y.lam;
    d.s = std::pow(y.lam, -1.5 * kappa - 1.0);
    return d;
}

OdeState axpy(const OdeState& y, double a, const OdeState& d) {
    return {y.lam + a * d.lam, y.mu + a * d.mu, y.tau + a * d.tau, y.s + a * d.s};
}

OdeState rk4_step(const OdeState& y, double h, double delta, double kappa) {
    const OdeState k1 = rhs(y, delta, kappa);
    const OdeState k2 = rhs(axpy(y, 0.5 * h, k1), delta, kappa);
    const OdeState k3 = rhs(axpy(y, 0.5 * h, k2), delta, kappa);
    const OdeState k4 = rhs(axpy(y, h, k3), delta, kappa);
    OdeState out = y;
    out.lam += h / 6.0 * (k1.lam + 2 * k2.lam + 2 * k3.lam + k4.lam);
    out.mu += h / 6.0 * (k1.mu + 2 * k2.mu + 2 * k3.mu + k4.mu);
    out.tau += h / 6.0 * (k1.tau + 2 * k2.tau + 2 * k3.tau + k4.tau);
    out.s += h / 6.0 * (k1.s + 2 * k2.s + 2 * k3.s + k4.s);
    return out;
}

// Hermite cubic through (x0,y0,m0), (x1,y1,m1) evaluated at x.
double hermite(double x0, double y0, double m0, double x1, double y1, double m1, double x) {
    const double h = x1 - x0;
    const double u = (x - x0) / h;
    const double u2 = u * u, u3 = u2 * u;
    return (2 * u3 - 3 * u2 + 1) * y0 + (u3 - 2 * u2 + u) * h * m0 +
           (-2 * u3 + 3 * u2) * y1 + (u3 - u2) * h * m1;
}

} // namespace

LambdaPath solve_lambda(const SimParams& params, double t_max, double dt) {
    params.validate();
    if (!(dt > 0.0) || !(t_max > 0.0))
        throw std::invalid_argument("solve_lambda: dt and t_max must be > 0");

    const double delta = params.delta, kappa = params.kappa;
    const long long n_steps = static_cast<long long>(std::ceil(t_max / dt - 1e-12));
    // cap stored samples; the integrator still takes every step
    const long long max_samples = 400000;
    const long long stride = std::max<long long>(1, (n_steps + max_samples - 1) / max_samples);

    LambdaPath path;
    path.kappa = kappa;
    path.delta = delta;
    path.dt = dt;

    OdeState y{params.lambda0, params.lambda1, 0.0, 0.0};
    OdeState yh = y; // step-halved companion for the verification pass
    double halving_err = 0.0;

    auto record = [&](double t, const OdeState& st) {
        path.t.push_back(t);
        path.lambda.push_back(st.lam);
        path.dlambda_dt.push_back(st.mu);
        path.tau.push_back(st.tau);
        path.s.push_back(st.s);
        path.lambda_bar_tau.push_back(st.mu); // d_tau lambda/lambda = d_t lambda
    };
    record(0.0, y);

    double t = 0.0;
    for (long long k = 0; k < n_steps; ++k) {
        const double h = std::min(dt, t_max - t);
        if (h <= 0.0) break;
        if (!(y.lam > 0.0))
            throw SimError(TerminationCause::instability,
                           "solve_lambda: lambda became nonpositive at t = " + std::to_string(t));
        y = rk4_step(y, h, delta, kappa);
        yh = rk4_step(rk4_step(yh, 0.5 * h, delta, kappa), 0.5 * h, delta, kappa);
        halving_err = std::max(halving_err, std::abs(y.lam - yh.lam));
        t += h;
        if ((k + 1) % stride == 0 || k + 1 == n_steps) record(t, y);
    }
    path.step_halving_error = halving_err;
    path.bar_lambda_est = asymptotic_rate(path).rate;
    return path;
}

namespace {

// locate the bracketing sample of xs (strictly increasing) for x
int bracket(const std::vector<double>& xs, double x) {
    if (x < xs.front() - 1e-12 || x > xs.back() + 1e-12)
        throw std::out_of_range("time-conversion query outside the sampled range");
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    int i = static_cast<int>(it - xs.begin()) - 1;
    i = std::clamp(i, 0, static_cast<int>(xs.size()) - 2);
    return i;
}

} // namespace

double tau_of_t(const LambdaPath& p, double t) {
    const int i = bracket(p.t, t);
    // d tau/dt = 1/lambda, known exactly at the samples
    return hermite(p.t[i], p.tau[i], 1.0 / p.lambda[i], p.t[i + 1], p.tau[i + 1],
                   1.0 / p.lambda[i + 1], t);
}

double lambda_of_t(const LambdaPath& p, double t) {
    const int i = bracket(p.t, t);
    return hermite(p.t[i], p.lambda[i], p.dlambda_dt[i], p.t[i + 1], p.lambda[i + 1],
                   p.dlambda_dt[i + 1], t);
}

double t_of_tau(const LambdaPath& p, double tau) {
    const int i = bracket(p.tau, tau);
    // invert the forward Hermite map by Newton, seeded by linear interpolation
    const double t0 = p.t[i], t1 = p.t[i + 1];
    double t = t0 + (tau - p.tau[i]) / (p.tau[i + 1] - p.tau[i]) * (t1 - t0);
    for (int it = 0; it < 12; ++it) {
        const double fval = hermite(t0, p.tau[i], 1.0 / p.lambda[i], t1, p.tau[i + 1],
                                 1.0 / p.lambda[i + 1], t) - tau;
        const double d = 1.0 / hermite(t0, p.lambda[i], p.dlambda_dt[i], t1, p.lambda[i + 1],
                                       p.dlambda_dt[i + 1], t);
        const double step = fval / d;
        t -= step;
        t = std::clamp(t, t0, t1);
        if (std::abs(step) < 1e-15 * std::max(1.0, std::abs(t))) break;
    }
    return t;
}

RateFit asymptotic_rate(const LambdaPath& p, double t_lo, double t_hi) {
    if (t_lo >= t_hi) {
        t_hi = p.t.back();
        t_lo = 0.8 * t_hi; // default: last 20% of the samples
    }
    RateFit fit;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (std::size_t k = 0; k < p.t.size(); ++k) {
        if (p.t[k] < t_lo || p.t[k] > t_hi) continue;
        sx += p.t[k];
        sy += p.lambda[k];
        sxx += p.t[k] * p.t[k];
        sxy += p.t[k] * p.lambda[k];
        ++n;
    }
    if (n < 10)
        throw SimError(TerminationCause::resolution,
                       "asymptotic_rate: fewer than 10 samples in the fit window");
    const double det = n * sxx - sx * sx;
    fit.rate = (n * sxy - sx * sy) / det;
    const double icept = (sy - fit.rate * sx) / n;
    double ss = 0.0;
    for (std::size_t k = 0; k < p.t.size(); ++k) {
        if (p.t[k] < t_lo || p.t[k] > t_hi) continue;
        const double r = p.lambda[k] - (icept + fit.rate * p.t[k]);
        ss += r * r;
    }
    fit.fit_error = std::sqrt(ss / n);
    fit.n_samples = n;
    return fit;
}

void write_lambda_csv(const LambdaPath& p, const std::string& filename) {
    std::FILE* f = std::fopen(filename.c_str(), "w");
    if (!f) throw std::runtime_error("cannot open " + filename);
    std::fprintf(f, "t,lambda,dlambda_dt,tau,s,lambda_bar_tau\n");
    for (std::size_t k = 0; k < p.t.size(); ++k)
        std::fprintf(f, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", p.t[k], p.lambda[k],
                     p.dlambda_dt[k], p.tau[k], p.s[k], p.lambda_bar_tau[k]);
    std::fclose(f);
}

} // namespace vstar
