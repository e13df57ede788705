#pragma once

#include <string>
#include <vector>

#include "vstar/weight.hpp"

namespace vstar {

// Named tolerance bundle. Every threshold the core uses is pinned here.
struct Tolerances {
    double solve_tol = 1e-10;        // back-substitution residual, relative
    double parity_tol = 1e-9;        // allowed even-component drift of odd fields
    double mass_tol = 1e-8;          // relative |M - M_ref| accepted by the gauge map
    double gbar_floor = 1e-3;        // positivity floor on kappa*Gbar
    double a_floor_frac = 0.5;       // quasilinear coefficient floor, fraction of leading part
    double interp_tol = 1e-8;        // time-conversion round-trip, relative
    double decomp_tol = 1e-6;        // pressure-decomposition residual, relative
};

// All physical and numerical parameters of a run.
struct SimParams {
    double kappa = 0.5;   // EOS exponent, p = rho^{1+kappa}, 0 < kappa <= 2/3
    double delta = 0.0;   // mass parameter (w_delta = delta*w), >= 0
    double lambda0 = 1.0; // initial radius, > 0
    double lambda1 = 0.5; // initial expansion rate, in (0,1)
    int n_grid = 64;
    double tau_max = 10.0;
    double dt_tau = 0.0;  // 0 = sound-speed CFL heuristic
    int n_diag = 2;       // diagnostic energy order (small; not the proof order)
    WeightKind weight_kind = WeightKind::poly2;
    Tolerances tol;

    // Throws SimError(bad config semantics are reported by the caller) on
    // violated invariants; returns normally otherwise.
    void validate() const;
};

// Background scaling factor lambda(t) solving
//   d_t^2 lambda = delta * lambda^{-3 kappa - 1},
//   lambda(0) = lambda0, d_t lambda(0) = lambda1,
// sampled together with the rescaled times
//   tau(t) = int dt/lambda,   s(t) = int lambda^{-3 kappa/2 - 1} dt,
// and lambda_bar_tau = d_tau lambda / lambda = d_t lambda.
struct LambdaPath {
    double kappa = 0.0;
    double delta = 0.0;
    double dt = 0.0;
    std::vector<double> t;
    std::vector<double> lambda;
    std::vector<double> dlambda_dt;
    std::vector<double> tau;
    std::vector<double> s;
    std::vector<double> lambda_bar_tau; // equals dlambda_dt identically
    double step_halving_error = 0.0;    // max |lambda_h - lambda_{h/2}| over samples
    double bar_lambda_est = 0.0;        // fitted asymptotic rate over default window

    double t_max() const { return t.empty() ? 0.0 : t.back(); }
    double tau_max() const { return tau.empty() ? 0.0 : tau.back(); }
};

// Classical fixed-step RK4 on (lambda, d_t lambda, tau, s), plus one
// step-halving verification pass. The ODE is smooth and non-stiff for the
// admitted parameter range.
LambdaPath solve_lambda(const SimParams& params, double t_max, double dt);

// Monotone time conversions by cubic Hermite interpolation on the samples
// (derivatives are known exactly at the nodes). Out-of-range queries throw.
double tau_of_t(const LambdaPath& path, double t);
double t_of_tau(const LambdaPath& path, double tau);
double lambda_of_t(const LambdaPath& path, double t);

struct RateFit {
    double rate = 0.0;     // least-squares slope of lambda(t) over the window
    double fit_error = 0.0; // rms residual of the linear fit
    int n_samples = 0;
};

// Least-squares slope of lambda vs t over [t_lo, t_hi]. Fewer than 10 samples
// in the window is an insufficient-data error. Defaults to the last 20% of
// the sampled range when t_lo >= t_hi.
RateFit asymptotic_rate(const LambdaPath& path, double t_lo = 0.0, double t_hi = 0.0);

// CSV columns: t, lambda, dlambda_dt, tau, s, lambda_bar_tau.
void write_lambda_csv(const LambdaPath& path, const std::string& filename);

} // namespace vstar
