#pragma once

#include <map>
#include <string>
#include <vector>

#include "vstar/dynamics.hpp"
#include "vstar/grid.hpp"
#include "vstar/quantities.hpp"

namespace vstar {

// Weighted energy hierarchy at one instant:
//   calE_i = delta^{-1} lambda^{3k} ||D_i dTheta||_i^2 + ||D_i Theta||_i^2
//            + ||D_{i+1} Theta||_{i+1}^2
//   mfE_i  = the coefficient-weighted version entering the energy identity
//   mfD_i  = (1 - 3k/2) lbar delta^{-1} lambda^{3k} || d_tau D_i Theta ||_i^2
// For delta = 0 the delta^{-1} factor is dropped (dust regime; documented).
struct EnergyTriple {
    double calE = 0.0;
    double mfE = 0.0;
    double mfD = 0.0;
};

EnergyTriple energy(const RadialGrid& g, const LagrangianState& state,
                    const CachedQuantities& c, const LambdaCtx& lam, double delta,
                    const Weight& w, double kappa, int i);

// Exact asymptotic expansion rate from the first integral of the lambda ODE.
double bar_lambda_exact(const SimParams& p);

struct BootstrapFlags {
    bool en_ok = true;
    bool u0_ok = true;
    bool fg_ok = true;
    double en_margin = 0.0;   // threshold - value (positive = inside the band)
    double u0_margin = 0.0;
    double fg_margin = 0.0;
    double en_value = 0.0;    // running sup of calE^{n_diag}
    double fg_value = 0.0;    // ||F-1||_inf + ||kappa Gbar - 1||_inf
    bool ok() const { return en_ok && u0_ok && fg_ok; }
};

// Flags against the bootstrap bands: E^{n_diag} <= M* eps, the (U^0)^{-2}
// band [1/2, 3/2]x(1 - lbar_inf^2 zeta^2), and ||F-1|| + ||kGbar-1|| <= 1/100.
BootstrapFlags bootstrap_monitor(const RadialGrid& g, const CachedQuantities& c,
                                 double running_sup_EN, double M_star, double epsilon,
                                 double bar_lambda);

struct EnergyReport {
    double tau = 0.0;
    std::vector<double> calE; // i = 0..n_diag
    std::vector<double> mfE;
    std::vector<double> mfD;
    double S_contribution = 0.0; // ||d_tau^2 Theta||_0^2
    BootstrapFlags flags;
    std::map<std::string, double> identity_residuals;
};

// Full report at one sample (computes the acceleration internally).
EnergyReport energy_report(const RadialGrid& g, const TrajectorySample& smp,
                           const InitialSnapshot& snap, const SimParams& params,
                           const DynOptions& opt, double running_sup_EN,
                           double M_star, double epsilon, double bar_lambda);

// Residual of the order-0 energy balance
//   d/dtau mfE_0 + mfD_0 + (R1+R2+R3 + sum E_j, d_tau Theta)_0 + sum I_j = 0
// along a trajectory, with d/dtau mfE_0 by central differences over the
// sample cadence. Entries are normalized by the largest constituent term.
struct BalanceSeries {
    std::vector<double> tau;
    std::vector<double> residual;       // normalized
    std::vector<double> largest_term;   // normalization scale
};
BalanceSeries energy_balance_residual(const RadialGrid& g, const Trajectory& traj,
                                      const InitialSnapshot& snap, const SimParams& params,
                                      const DynOptions& opt);

// Named, scale-normalized residuals of the structural identities at one state.
//   lemma6.1      : F - 1 = D_z(Theta + Theta^2/zeta) + (1/3) D_z(Theta^3/zeta^2)
//   lemma4.1      : pressure direct vs elliptic + R1 + R2 + R3
//   lemma4.2      : D_z R3 expansion into first-derivative terms
//   lemma5.1      : M = M1 + M2 + M3
//   product_rule  : D_z(fg) = (D_z f) g + f d_z g on the state fields
//   Dz_zeta_shift : D_z(zeta f) = 3 f + zeta d_z f
std::map<std::string, double> identity_suite(const RadialGrid& g, const CachedQuantities& c,
                                             const Weight& w, double kappa,
                                             const DynOptions& opt = {});

// d_tau U^0 along a trajectory (central differences) vs the material-derivative
// identity d_tau U^0 = (U^0)^3 X (d_tau^2 Theta + lbar d_tau Theta + delta
// lambda^{-3k} eta); returns the max normalized residual over interior samples.
double material_u0_residual(const RadialGrid& g, const Trajectory& traj,
                            const InitialSnapshot& snap, const SimParams& params,
                            const DynOptions& opt);

// Support radius r(t) = lambda(t) (1 + Theta(tau(t), 1)) and its tail slope.
struct SupportReport {
    std::vector<double> t;
    std::vector<double> r;
    double fitted_slope = 0.0;
    double slope_fit_error = 0.0;
    double theta_end_at_1 = 0.0;     // Theta(tau_end, 1)
    double cauchy_rate = 0.0;        // fitted decay rate of |Theta(tau,1) - Theta_end(1)|
    bool partial = false;            // trajectory terminated early
};
SupportReport support_radius(const Trajectory& traj, double tail_fraction = 0.2);

} // namespace vstar
