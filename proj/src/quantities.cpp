#include "vstar/quantities.hpp"

#include <cmath>
#include <string>

#include "vstar/errors.hpp"

namespace vstar {

LambdaCtx LambdaCtx::make(double lambda, double lambda_bar_tau, double delta, double kappa) {
    LambdaCtx c;
    c.lambda = lambda;
    c.lambda_bar_tau = lambda_bar_tau;
    c.lambda_m3k = std::pow(lambda, -3.0 * kappa);
    c.lambda_3k = 1.0 / c.lambda_m3k;
    c.dlambda_bar_tau = delta * c.lambda_m3k;
    return c;
}

RadialField jacobian_F(const RadialGrid& g, const LagrangianState& state) {
    const RadialField theta_over = divide_by_zeta(g, state.theta);
    const std::vector<double> dz = g.deriv(state.theta.v);
    RadialField F;
    F.parity = Parity::even;
    F.v.resize(g.size());
    for (int k = 0; k < g.size(); ++k) {
        const double xi = 1.0 + theta_over.v[k];
        F.v[k] = xi * xi * (1.0 + dz[k]);
        if (!(F.v[k] > 0.0))
            throw SimError(TerminationCause::diffeomorphism_loss,
                           "jacobian_F: nonpositive F at zeta = " + std::to_string(g.node(k)),
                           state.tau, g.node(k));
    }
    return F;
}

RadialField u0_lagrangian(const RadialGrid& g, const LagrangianState& state,
                          double lambda_bar_tau) {
    RadialField U0;
    U0.parity = Parity::even;
    U0.v.resize(g.size());
    for (int k = 0; k < g.size(); ++k) {
        const double z = g.node(k);
        const double X = state.dtheta.v[k] + lambda_bar_tau * (state.theta.v[k] + z);
        const double rad = 1.0 - X * X;
        if (!(rad > 0.0))
            throw SimError(TerminationCause::causality,
                           "u0_lagrangian: |dTheta + lbar eta| >= 1 at zeta = " +
                               std::to_string(z),
                           state.tau, z);
        U0.v[k] = 1.0 / std::sqrt(rad);
    }
    return U0;
}

GbarResult gbar_closed_form(const RadialGrid& g, const CachedQuantities& pre,
                            const InitialSnapshot& snap, const LambdaCtx& lam,
                            const Weight& w, double kappa, double gbar_floor) {
    GbarResult out;
    out.Gbar.parity = Parity::even;
    out.G.parity = Parity::even;
    out.Gbar.v.resize(g.size());
    out.G.v.resize(g.size());
    const double delta = w.delta_scale;
    for (int k = 0; k < g.size(); ++k) {
        const double z = g.node(k);
        const double U0k = std::pow(pre.U0[k], kappa);
        const double Fmk = std::pow(pre.F[k], -kappa);
        const double kGbar =
            U0k * snap.C0[k] - delta * lam.lambda_m3k * w.w(z) * Fmk;
        if (!(kGbar > gbar_floor))
            throw SimError(TerminationCause::corrector_positivity,
                           "gbar_closed_form: kappa*Gbar hit the positivity floor at zeta = " +
                               std::to_string(z),
                           -1.0, z);
        out.Gbar.v[k] = kGbar / kappa;
        out.G.v[k] = std::exp(-std::log(kGbar) / kappa); // (kappa Gbar)^{-1/kappa}
    }
    return out;
}

std::vector<double> dtau_gbar(const RadialGrid& g, const CachedQuantities& c,
                              const InitialSnapshot& snap, const LambdaCtx& lam,
                              const Weight& w, double kappa,
                              const std::vector<double>& dU0inv2) {
    const double delta = w.delta_scale;
    std::vector<double> kdG(g.size());
    for (int k = 0; k < g.size(); ++k) {
        const double z = g.node(k);
        const double wk = w.w(z);
        const double U0 = c.U0[k];
        kdG[k] = -0.5 * kappa * dU0inv2[k] * std::pow(U0, kappa + 2.0) * snap.C0[k] +
                 kappa * delta * wk * lam.lambda_m3k * std::pow(c.F[k], -kappa - 1.0) * c.dF[k] +
                 3.0 * kappa * lam.lambda_bar_tau * delta * wk * lam.lambda_m3k *
                     std::pow(c.F[k], -kappa);
    }
    return kdG;
}

RadialField density_f(const RadialGrid& g, const std::vector<double>& F,
                      const std::vector<double>& G, const Weight& w, double kappa) {
    RadialField f;
    f.parity = Parity::even;
    f.v.resize(g.size());
    for (int k = 0; k < g.size(); ++k) {
        const double wd = w.w_delta(g.node(k));
        f.v[k] = std::pow(std::max(wd, 0.0), 1.0 / kappa) / F[k] * G[k];
    }
    return f;
}

CachedQuantities build_cache(const RadialGrid& g, const LagrangianState& state,
                             const InitialSnapshot& snap, const LambdaCtx& lam,
                             const Weight& w, double kappa, double gbar_floor) {
    CachedQuantities c;
    const int m = g.size();
    c.eta.resize(m);
    c.X.resize(m);
    c.F.resize(m);
    c.Fm1.resize(m);
    c.U0.resize(m);
    c.U0inv2.resize(m);
    c.xi.resize(m);

    const RadialField th_over = divide_by_zeta(g, state.theta);
    c.theta_over_zeta = th_over.v;
    c.dz_theta = g.deriv(state.theta.v);

    for (int k = 0; k < m; ++k) {
        const double z = g.node(k);
        c.eta[k] = z + state.theta.v[k];
        const double th = c.theta_over_zeta[k];
        c.xi[k] = 1.0 + th;
        if (!(c.xi[k] > 0.0))
            throw SimError(TerminationCause::diffeomorphism_loss,
                           "build_cache: 1 + Theta/zeta <= 0 at zeta = " + std::to_string(z),
                           state.tau, z);
        if (!(1.0 + c.dz_theta[k] > 0.0))
            throw SimError(TerminationCause::diffeomorphism_loss,
                           "build_cache: 1 + d_zeta Theta <= 0 at zeta = " + std::to_string(z),
                           state.tau, z);
        // F - 1 assembled without cancellation: (xi^2-1)(1+dz) + dz
        const double xi2m1 = th * (2.0 + th);
        c.Fm1[k] = xi2m1 * (1.0 + c.dz_theta[k]) + c.dz_theta[k];
        c.F[k] = 1.0 + c.Fm1[k];
        if (!(c.F[k] > 0.0))
            throw SimError(TerminationCause::diffeomorphism_loss,
                           "build_cache: nonpositive Jacobian at zeta = " + std::to_string(z),
                           state.tau, z);
        c.X[k] = state.dtheta.v[k] + lam.lambda_bar_tau * c.eta[k];
        const double rad = 1.0 - c.X[k] * c.X[k];
        if (!(rad > 0.0))
            throw SimError(TerminationCause::causality,
                           "build_cache: superluminal Lagrangian speed at zeta = " +
                               std::to_string(z),
                           state.tau, z);
        c.U0inv2[k] = rad;
        c.U0[k] = 1.0 / std::sqrt(rad);
    }

    const GbarResult gb = gbar_closed_form(g, c, snap, lam, w, kappa, gbar_floor);
    c.kGbar.resize(m);
    c.Gk.resize(m);
    for (int k = 0; k < m; ++k) {
        c.kGbar[k] = kappa * gb.Gbar.v[k];
        c.Gk[k] = 1.0 / c.kGbar[k];
    }
    c.G = gb.G.v;
    c.f = density_f(g, c.F, c.G, w, kappa).v;

    // d_tau F = 2 xi (dTheta/zeta)(1+dz Theta) + xi^2 dz dTheta
    const RadialField dth_over = divide_by_zeta(g, state.dtheta);
    const std::vector<double> dz_dtheta = g.deriv(state.dtheta.v);
    c.dF.resize(m);
    for (int k = 0; k < m; ++k)
        c.dF[k] = 2.0 * c.xi[k] * dth_over.v[k] * (1.0 + c.dz_theta[k]) +
                  c.xi[k] * c.xi[k] * dz_dtheta[k];
    return c;
}

void finalize_cache(const RadialGrid& g, CachedQuantities& c, const InitialSnapshot& snap,
                    const LambdaCtx& lam, const Weight& w, double kappa,
                    const std::vector<double>& accel) {
    const int m = g.size();
    c.accel = accel;
    c.dU0inv2.resize(m);
    for (int k = 0; k < m; ++k) {
        // d_tau X = accel + (d_tau lbar) eta + lbar dTheta, with dTheta = X - lbar eta
        const double dX = accel[k] + lam.dlambda_bar_tau * c.eta[k] +
                          lam.lambda_bar_tau * (c.X[k] - lam.lambda_bar_tau * c.eta[k]);
        c.dU0inv2[k] = -2.0 * c.X[k] * dX;
    }
    c.kdGbar = dtau_gbar(g, c, snap, lam, w, kappa, c.dU0inv2);
    c.dGk.resize(m);
    for (int k = 0; k < m; ++k)
        c.dGk[k] = -c.Gk[k] * c.Gk[k] * c.kdGbar[k]; // G^k = (kGbar)^{-1}
    c.finalized = true;
}

InitialSnapshot freeze_snapshot(const RadialGrid& g, const LagrangianState& state0,
                                const LambdaCtx& lam0, const Weight& w, double kappa) {
    InitialSnapshot snap;
    snap.lambda_at_0 = lam0.lambda;
    snap.U0_at_0 = u0_lagrangian(g, state0, lam0.lambda_bar_tau).v;
    snap.F_at_0 = jacobian_F(g, state0).v;
    snap.C0.resize(g.size());
    const double delta = w.delta_scale;
    for (int k = 0; k < g.size(); ++k) {
        const double z = g.node(k);
        snap.C0[k] = std::pow(snap.U0_at_0[k], -kappa) *
                     (1.0 + delta * lam0.lambda_m3k * w.w(z) * std::pow(snap.F_at_0[k], -kappa));
    }
    return snap;
}

} // namespace vstar
