#pragma once

#include "vstar/grid.hpp"
#include "vstar/scaling.hpp"

namespace vstar {

// Background scaling data at a fixed tau.
struct LambdaCtx {
    double lambda = 1.0;
    double lambda_bar_tau = 0.0;          // d_tau lambda / lambda
    double dlambda_bar_tau = 0.0;         // d_tau lambda_bar_tau = delta * lambda^{-3 kappa}
    double lambda_m3k = 1.0;              // lambda^{-3 kappa}
    double lambda_3k = 1.0;               // lambda^{3 kappa}

    static LambdaCtx make(double lambda, double lambda_bar_tau, double delta, double kappa);
};

// Evolved state: the Lagrangian perturbation Theta = eta - zeta and its
// tau-derivative, both odd.
struct LagrangianState {
    double tau = 0.0;
    RadialField theta;
    RadialField dtheta;
};

// tau = 0 factors entering the closed-form relativistic corrector. Frozen at
// construction, immutable afterwards.
struct InitialSnapshot {
    std::vector<double> U0_at_0;   // U^0(0, zeta)
    std::vector<double> F_at_0;    // F(0, zeta)
    std::vector<double> C0;        // (U^0)^{-kappa}(0) (1 + delta lambda^{-3k}(0) w F^{-k}(0))
    double lambda_at_0 = 1.0;
};

// Everything derived from a state that does not need the acceleration:
//   F    = (1+Theta/zeta)^2 (1+d_zeta Theta)          (even, > 0)
//   U^0  = (1 - (d_tau Theta + lbar (Theta+zeta))^2)^{-1/2}   (even, >= 1)
//   Gbar = closed-form corrector, G = (kappa Gbar)^{-1/kappa}
//   f    = w_delta^{1/kappa} F^{-1} G                 (f F = w_delta^{1/k} G exactly)
//   dF   = d_tau F
// The tau-derivatives that need d_tau^2 Theta (dU0inv2, dGbar) are filled by
// the dynamics layer after the pointwise acceleration solve.
struct CachedQuantities {
    // state-derived helper fields
    std::vector<double> eta;       // zeta + Theta
    std::vector<double> theta_over_zeta; // Theta/zeta (even)
    std::vector<double> xi;        // 1 + Theta/zeta
    std::vector<double> dz_theta;  // d_zeta Theta
    std::vector<double> X;         // d_tau Theta + lbar*(Theta+zeta)
    std::vector<double> F;         // Jacobian
    std::vector<double> Fm1;       // F - 1, assembled without cancellation
    std::vector<double> U0;        // >= 1
    std::vector<double> U0inv2;    // (U^0)^{-2}
    std::vector<double> kGbar;     // kappa * Gbar
    std::vector<double> Gk;        // G^kappa = 1/(kappa Gbar)
    std::vector<double> G;         // relativistic correction
    std::vector<double> f;         // Lagrangian density
    std::vector<double> dF;        // d_tau F

    // filled by finalize_cache once the acceleration is known
    std::vector<double> accel;     // d_tau^2 Theta
    std::vector<double> dU0inv2;   // d_tau (U^0)^{-2}
    std::vector<double> kdGbar;    // kappa * d_tau Gbar
    std::vector<double> dGk;       // d_tau (G^kappa)
    bool finalized = false;
};

// F = (1+Theta/zeta)^2 (1+d_zeta Theta); F(0) = (1+Theta'(0))^3 by parity.
// Nonpositive F anywhere is a diffeomorphism-loss error.
RadialField jacobian_F(const RadialGrid& g, const LagrangianState& state);

// U^0 = (1 - (d_tau Theta + lbar(Theta+zeta))^2)^{-1/2}; radicand <= 0 is a
// causality error reporting the first offending node.
RadialField u0_lagrangian(const RadialGrid& g, const LagrangianState& state,
                          double lambda_bar_tau);

// Closed-form corrector:
//   Gbar = (U^0)^k (1/k) C0 - (delta/k) lambda^{-3k} w F^{-k},
//   G = (kappa Gbar)^{-1/kappa}.
// kappa*Gbar at or below the positivity floor stops the run
// (corrector-positivity error).
struct GbarResult {
    RadialField Gbar;
    RadialField G;
};
GbarResult gbar_closed_form(const RadialGrid& g, const CachedQuantities& pre,
                            const InitialSnapshot& snap, const LambdaCtx& lam,
                            const Weight& w, double kappa, double gbar_floor);

// kappa d_tau Gbar =
//   -(k/2) d_tau(U^0)^{-2} (U^0)^{k+2} C0
//   + k delta w lambda^{-3k} F^{-k-1} d_tau F
//   + 3k lbar delta w lambda^{-3k} F^{-k}.
std::vector<double> dtau_gbar(const RadialGrid& g, const CachedQuantities& c,
                              const InitialSnapshot& snap, const LambdaCtx& lam,
                              const Weight& w, double kappa,
                              const std::vector<double>& dU0inv2);

// f = w_delta^{1/kappa} F^{-1} G.
RadialField density_f(const RadialGrid& g, const std::vector<double>& F,
                      const std::vector<double>& G, const Weight& w, double kappa);

// Builds every accel-independent cached quantity. Throws on causality /
// diffeomorphism / corrector-positivity violations.
CachedQuantities build_cache(const RadialGrid& g, const LagrangianState& state,
                             const InitialSnapshot& snap, const LambdaCtx& lam,
                             const Weight& w, double kappa, double gbar_floor);

// Fills dU0inv2, kdGbar, dGk from the solved acceleration.
void finalize_cache(const RadialGrid& g, CachedQuantities& c, const InitialSnapshot& snap,
                    const LambdaCtx& lam, const Weight& w, double kappa,
                    const std::vector<double>& accel);

// Snapshot from the tau = 0 state.
InitialSnapshot freeze_snapshot(const RadialGrid& g, const LagrangianState& state0,
                                const LambdaCtx& lam0, const Weight& w, double kappa);

} // namespace vstar
