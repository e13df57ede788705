#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vstar/errors.hpp"
#include "vstar/gauge.hpp"
#include "vstar/grid.hpp"
#include "vstar/quantities.hpp"
#include "vstar/scaling.hpp"

namespace vstar {

// Spatial terms of the momentum equation at one state. The equation solved is
//
//   A [ delta^{-1} lambda^{3k} (d_tau^2 Theta + lbar d_tau Theta) + Theta ]
//     + (1+k) F^{-k-2} (U^0)^{-4} xi^4 L_0(Theta)
//     + R1 + R2 + R3 + E1 + ... + E6 = 0,
//   A = 1 + delta lambda^{-3k} w F^{-k} G^k,
//
// stored here in the delta-scaled form (every term multiplied by delta) so
// that delta = 0 stays regular. E4 is split into an acceleration-independent
// part plus e4_coeff * d_tau^2 Theta; the full relation collapses to the
// pointwise linear solve a(zeta) d_tau^2 Theta = b(zeta).
struct RhsBreakdown {
    std::vector<double> pressure_direct;    // (U0)^-4 xi^2 w^{-1/k} d_z(w^{1+1/k}(F^{-1-k}-1))
    std::vector<double> L0_term;            // (1+k) F^{-k-2} (U0)^-4 xi^4 L0(Theta)
    std::vector<double> R1, R2, R3;
    std::vector<double> E1, E2, E3, E4_indep, E5, E6;
    std::vector<double> e4_coeff;           // pointwise coefficient of d_tau^2 Theta in E4
    std::vector<double> accel_coeff_a;      // delta-scaled: A lambda^{3k} + delta e4_coeff
    std::vector<double> accel_rhs_b;        // delta-scaled right side
    double decomposition_residual = 0.0;    // |direct - (L0_term + R1+R2+R3)| normalized
};

struct DynOptions {
    bool classical_limit = false;   // U^0 == 1, G == 1, E1..E5 off
    bool filter_on = false;
    SpectralFilter filter;
    // test hook: flips the sign of R2 so the decomposition check must fail
    bool inject_r2_sign_flip = false;
};

// Pressure-gradient evaluation: the direct form and the elliptic-plus-
// remainders decomposition, with their normalized pointwise residual. Every
// term near zeta = 1 carries at least one factor of w or w'. A residual above
// decomp_tol signals under-resolution (discretization-inconsistency error).
struct PressureDecomposition {
    std::vector<double> direct;
    std::vector<double> decomposed;
    double residual = 0.0; // normalized by the largest constituent magnitude
};
PressureDecomposition pressure_gradient(const RadialGrid& g, const CachedQuantities& c,
                                        const Weight& w, double kappa,
                                        const DynOptions& opt = {});

// Cancellation diagnostic on M(Theta) = D_zeta R3 + (1+k) R4: evaluates both
// the direct form and the split M1 + M2 + M3, plus the assembled coefficient
// of d_zeta D_zeta Theta, which must vanish at zeta = 1 (it carries a factor
// of w).
struct CancellationReport {
    double residual = 0.0;            // |M_direct - (M1+M2+M3)| normalized
    double d2_coeff_at_1 = 0.0;       // second-derivative coefficient at zeta = 1
    double d2_coeff_max = 0.0;        // its max magnitude on the grid
};
CancellationReport m_cancellation_check(const RadialGrid& g, const CachedQuantities& c,
                                        const Weight& w, double kappa);

// All spatial terms and the pointwise linear relation for the acceleration.
RhsBreakdown assemble_rhs(const RadialGrid& g, const CachedQuantities& c,
                          const InitialSnapshot& snap, const LambdaCtx& lam,
                          const Weight& w, double kappa, const DynOptions& opt = {});

// Solves a(zeta) d_tau^2 Theta = b(zeta). |a| below the floor (default: half
// its leading lambda^{3k} part) is a quasilinearity-degeneration error.
RadialField acceleration(const RadialGrid& g, const CachedQuantities& c,
                         const InitialSnapshot& snap, const LambdaCtx& lam,
                         const Weight& w, double kappa, const DynOptions& opt,
                         const Tolerances& tol, RhsBreakdown* breakdown = nullptr);

// Independent verifier: substitutes (state, accel) into the primitive
// Lagrangian momentum equation
//   (1 + lambda^{-3k} f^k)[ lambda^{3k}(d_tau^2 Theta + lbar d_tau Theta) + delta eta ]
//   + (1+k)/k (U^0)^{-4} (d_zeta eta)^{-1} d_zeta(f^k)
//   + (1+k)/k (U^0)^{-2} X (d_tau f^k - 3 k lbar f^k) = 0
// with f^k differentiated directly on the grid, and returns the residual
// normalized by the largest constituent term.
double back_substitution_residual(const RadialGrid& g, const CachedQuantities& c,
                                  const InitialSnapshot& snap, const LambdaCtx& lam,
                                  const Weight& w, double kappa,
                                  const std::vector<double>& accel,
                                  const DynOptions& opt = {});

// One recorded sample of a trajectory.
struct TrajectorySample {
    double tau = 0.0;
    double t = 0.0;
    double s = 0.0;
    double lambda = 1.0;
    double lambda_bar_tau = 0.0;
    RadialField theta;
    RadialField dtheta;
    std::vector<double> gbar_ode;   // Gbar evolved by its ODE (cross-check passenger)
    double parity_drift = 0.0;      // even-component magnitude at the origin before pinning
    double back_sub_residual = 0.0;
};

struct Trajectory {
    std::vector<TrajectorySample> samples;
    TerminationCause cause = TerminationCause::none;
    std::string cause_detail;
    double tau_end = 0.0;
    long long n_steps = 0;
    double dt_tau = 0.0;
};

// Full evolution state advanced by RK4: (Theta, dTheta, Gbar_ode, lambda,
// lambda_bar_tau, t, s).
struct EvolveState {
    double tau = 0.0;
    std::vector<double> theta;
    std::vector<double> dtheta;
    std::vector<double> gbar_ode;
    double lambda = 1.0;
    double lambda_bar_tau = 0.0;
    double t = 0.0;
    double s = 0.0;
};

struct RunSetup {
    SimParams params;
    DynOptions options;
    int cadence = 10;             // record every this many steps
    bool check_back_substitution = true;
    bool stop_on_bootstrap = false; // bands are diagnostics unless opted in
    double bootstrap_M_star = 100.0;
    double bootstrap_epsilon = 0.0; // 0 = max(E^{n_diag}(0), delta)
    // invoked at every record point (checkpointing hook)
    std::function<void(const EvolveState&, const InitialSnapshot&, long long)> on_record;
};

// CFL heuristic: dt = 0.5 * min spacing / max(sqrt(w_delta F^{-k-1}) lambda^{-3k/2}, lbar).
double default_dt_tau(const RadialGrid& g, const SimParams& params,
                      const InitialState& init);

// Method of lines in tau on (Theta, d_tau Theta) with the Gbar ODE and the
// background scaling carried as passengers. One classical RK4 step; the
// output is re-tagged odd and the origin node pinned to zero, recording the
// drift magnitude.
class Evolver {
public:
    Evolver(const RadialGrid& g, const SimParams& params, const DynOptions& opt,
            const InitialState& init);
    // resume constructor: state restored verbatim
    Evolver(const RadialGrid& g, const SimParams& params, const DynOptions& opt,
            EvolveState state, InitialSnapshot snap);

    void step(double dt);
    const EvolveState& state() const { return state_; }
    const InitialSnapshot& snapshot() const { return snap_; }
    const RadialGrid& grid() const { return grid_; }
    const Weight& weight() const { return weight_; }
    double parity_drift() const { return parity_drift_; }
    double last_back_sub_residual() const { return last_residual_; }
    LagrangianState lagrangian_state() const;
    LambdaCtx lambda_ctx() const;

private:
    struct Deriv;
    Deriv rhs(const EvolveState& y) const;

    const RadialGrid& grid_;
    SimParams params_;
    DynOptions opt_;
    Weight weight_;
    InitialSnapshot snap_;
    EvolveState state_;
    double parity_drift_ = 0.0;
    double last_residual_ = 0.0;
};

// Drives the evolver from tau = 0 (or a restored state) to tau_max or the
// first error, recording samples at the configured cadence. Errors are caught
// and converted into the trajectory's termination cause with a tau-stamp.
Trajectory run(const RadialGrid& g, const RunSetup& setup, const InitialState& init);
Trajectory run_resumed(const RadialGrid& g, const RunSetup& setup, EvolveState state,
                       InitialSnapshot snap);

} // namespace vstar
