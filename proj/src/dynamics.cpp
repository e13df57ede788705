#include "vstar/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vstar/errors.hpp"

namespace vstar {

namespace {

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

// F^p - 1 without cancellation for F near 1.
inline double pow_m1(double Fm1, double p) { return std::expm1(p * std::log1p(Fm1)); }

// shared per-state scratch used by the term assembly
struct Terms {
    std::vector<double> DzT;       // D_zeta Theta
    std::vector<double> dzDzT;     // d_zeta D_zeta Theta
    std::vector<double> dth_z;     // d_zeta (Theta/zeta)
    std::vector<double> L0;        // L_0(Theta)
    std::vector<double> u0m4;      // (U^0)^{-4} (or 1 under the classical switch)
    std::vector<double> u0m2;      // (U^0)^{-2} (or 1)
    std::vector<double> Gk;        // G^kappa (or 1)
    std::vector<double> A;         // 1 + delta lam^{-3k} w F^{-k} G^k
    std::vector<double> hm1;       // F^{-1-k} - 1
    std::vector<double> gm2;       // F^{-k-2} - 1
    std::vector<double> Fmk;       // F^{-k}
    std::vector<double> Fmk1;      // F^{-k-1}
    std::vector<double> Fmk2;      // F^{-k-2}
};

Terms build_terms(const RadialGrid& g, const CachedQuantities& c, const LambdaCtx& lam,
                  const Weight& w, double kappa, const DynOptions& opt) {
    const int m = g.size();
    Terms t;
    t.DzT.resize(m);
    for (int k = 0; k < m; ++k) t.DzT[k] = c.dz_theta[k] + 2.0 * c.theta_over_zeta[k];
    t.dzDzT = g.deriv(t.DzT);
    t.dth_z = g.deriv(c.theta_over_zeta);
    t.L0.resize(m);
    const double p1 = 1.0 + 1.0 / kappa;
    for (int k = 0; k < m; ++k) {
        const double z = g.node(k);
        t.L0[k] = -(p1 * w.dw(z) * t.DzT[k] + w.w(z) * t.dzDzT[k]);
    }
    t.u0m4.resize(m);
    t.u0m2.resize(m);
    t.Gk.resize(m);
    t.A.resize(m);
    t.hm1.resize(m);
    t.gm2.resize(m);
    t.Fmk.resize(m);
    t.Fmk1.resize(m);
    t.Fmk2.resize(m);
    const double delta = w.delta_scale;
    for (int k = 0; k < m; ++k) {
        const double z = g.node(k);
        t.u0m2[k] = opt.classical_limit ? 1.0 : c.U0inv2[k];
        t.u0m4[k] = t.u0m2[k] * t.u0m2[k];
        t.Gk[k] = opt.classical_limit ? 1.0 : c.Gk[k];
        t.hm1[k] = pow_m1(c.Fm1[k], -1.0 - kappa);
        t.gm2[k] = pow_m1(c.Fm1[k], -kappa - 2.0);
        t.Fmk[k] = std::pow(c.F[k], -kappa);
        t.Fmk1[k] = t.Fmk[k] / c.F[k];
        t.Fmk2[k] = t.Fmk1[k] / c.F[k];
        t.A[k] = 1.0 + delta * lam.lambda_m3k * w.w(z) * t.Fmk[k] * t.Gk[k];
    }
    return t;
}

void fill_remainders(const RadialGrid& g, const CachedQuantities& c, const Terms& t,
                     const Weight& w, double kappa, const DynOptions& opt,
                     std::vector<double>& R1, std::vector<double>& R2,
                     std::vector<double>& R3, std::vector<double>& L0_term) {
    const int m = g.size();
    R1.resize(m);
    R2.resize(m);
    R3.resize(m);
    L0_term.resize(m);
    const double kp1 = 1.0 + kappa;
    const double r2sign = opt.inject_r2_sign_flip ? -1.0 : 1.0;
    for (int k = 0; k < m; ++k) {
        const double z = g.node(k);
        const double xi = c.xi[k];
        const double xi2 = xi * xi;
        const double th = c.theta_over_zeta[k];
        const double wv = w.w(z);
        const double dw = w.dw(z);
        const double pre2 = t.u0m4[k] * xi2; // (U0)^-4 xi^2
        L0_term[k] = kp1 * (1.0 + t.gm2[k]) * t.u0m4[k] * xi2 * xi2 * t.L0[k];
        R1[k] = -2.0 * kp1 * (1.0 + t.gm2[k]) * t.u0m4[k] * xi2 * xi * wv * z *
                t.dth_z[k] * t.dth_z[k];
        R2[k] = r2sign * (kp1 * kp1 / kappa) * pre2 * dw * (3.0 * th * th + 2.0 * th * th * th);
        R3[k] = (kp1 / kappa) * pre2 * dw *
                (t.hm1[k] + kp1 * c.Fm1[k] + kp1 * t.gm2[k] * xi2 * t.DzT[k]);
    }
}

} // namespace

PressureDecomposition pressure_gradient(const RadialGrid& g, const CachedQuantities& c,
                                        const Weight& w, double kappa, const DynOptions& opt) {
    const Terms t = build_terms(g, c, LambdaCtx{}, w, kappa, opt);
    const int m = g.size();
    PressureDecomposition out;
    out.direct.resize(m);
    // direct evaluation with the w(1) = 0 interior-limit form:
    //   w^{-1/k} d_z(w^{1+1/k} h) = (1+1/k) w' h + w d_z h,  h = F^{-1-k} - 1
    const std::vector<double> dh = g.deriv(t.hm1);
    const double p1 = 1.0 + 1.0 / kappa;
    for (int k = 0; k < m; ++k) {
        const double z = g.node(k);
        out.direct[k] =
            t.u0m4[k] * c.xi[k] * c.xi[k] * (p1 * w.dw(z) * t.hm1[k] + w.w(z) * dh[k]);
    }
    std::vector<double> R1, R2, R3, L0t;
    fill_remainders(g, c, t, w, kappa, opt, R1, R2, R3, L0t);
    out.decomposed.resize(m);
    double num = 0.0, den = 0.0;
    for (int k = 0; k < m; ++k) {
        out.decomposed[k] = L0t[k] + R1[k] + R2[k] + R3[k];
        num = std::max(num, std::abs(out.direct[k] - out.decomposed[k]));
        den = std::max({den, std::abs(out.direct[k]), std::abs(L0t[k]), std::abs(R1[k]),
                        std::abs(R2[k]), std::abs(R3[k])});
    }
    out.residual = (den > 0.0) ? num / den : num;
    return out;
}

CancellationReport m_cancellation_check(const RadialGrid& g, const CachedQuantities& c,
                                        const Weight& w, double kappa) {
    const DynOptions opt; // relativistic factors live
    const Terms t = build_terms(g, c, LambdaCtx{}, w, kappa, opt);
    const int m = g.size();
    const double kp1 = 1.0 + kappa;

    // frakR3 (odd) and the elliptic coefficient F^{-k-2} (U0)^-4 xi^4 (even)
    std::vector<double> frakR3(m), coefEll(m), u0m4xi4(m);
    for (int k = 0; k < m; ++k) {
        const double z = g.node(k);
        const double xi2 = c.xi[k] * c.xi[k];
        frakR3[k] = (kp1 / kappa) * t.u0m4[k] * xi2 * w.dw(z) *
                    (t.hm1[k] + kp1 * c.Fm1[k] + kp1 * t.gm2[k] * xi2 * t.DzT[k]);
        u0m4xi4[k] = t.u0m4[k] * xi2 * xi2;
        coefEll[k] = t.Fmk2[k] * u0m4xi4[k];
    }
    const std::vector<double> d_coefEll = g.deriv(coefEll);
    const std::vector<double> d_u0m4xi4 = g.deriv(u0m4xi4);
    const std::vector<double> dF = g.deriv(c.F);

    // direct: M = D_z frakR3 + (1+k) R4,  R4 = d_z(coefEll) L0(Theta)
    RadialField fr3{frakR3, Parity::odd};
    const std::vector<double> DzR3 = apply_Dz(g, fr3).v;
    std::vector<double> M_direct(m);
    for (int k = 0; k < m; ++k) M_direct[k] = DzR3[k] + kp1 * d_coefEll[k] * t.L0[k];

    // split: M1 + M2 + M3
    std::vector<double> Pfield(m);
    for (int k = 0; k < m; ++k)
        Pfield[k] = t.u0m4[k] * c.xi[k] * c.xi[k] * w.dw(g.node(k)); // odd
    const std::vector<double> DzP = apply_Dz(g, RadialField{Pfield, Parity::odd}).v;

    CancellationReport rep;
    double num = 0.0, den = 0.0;
    std::vector<double> c2(m);
    for (int k = 0; k < m; ++k) {
        const double z = g.node(k);
        const double xi = c.xi[k];
        const double B = t.hm1[k] + kp1 * c.Fm1[k] + kp1 * t.gm2[k] * xi * xi * t.DzT[k];
        const double M1 = (kp1 / kappa) * DzP[k] * B;
        const double M2 = (6.0 * kp1 * kp1 / kappa) * Pfield[k] * t.gm2[k] * xi *
                          c.theta_over_zeta[k] * t.dth_z[k];
        const double M3 =
            kp1 * w.w(z) * (kappa + 2.0) * t.Fmk2[k] / c.F[k] * dF[k] * u0m4xi4[k] *
                t.dzDzT[k] -
            kp1 * t.Fmk2[k] * d_u0m4xi4[k] *
                ((kp1 / kappa) * w.dw(z) * t.DzT[k] + w.w(z) * t.dzDzT[k]);
        const double Msplit = M1 + M2 + M3;
        num = std::max(num, std::abs(M_direct[k] - Msplit));
        den = std::max({den, std::abs(M1), std::abs(M2), std::abs(M3), std::abs(M_direct[k])});
        // assembled coefficient of d_z D_z Theta; carries w, so it vanishes at 1
        c2[k] = kp1 * w.w(z) *
                ((kappa + 2.0) * t.Fmk2[k] / c.F[k] * dF[k] * u0m4xi4[k] -
                 t.Fmk2[k] * d_u0m4xi4[k]);
    }
    rep.residual = (den > 0.0) ? num / den : num;
    rep.d2_coeff_at_1 = c2[m - 1];
    rep.d2_coeff_max = max_abs(c2);
    return rep;
}

RhsBreakdown assemble_rhs(const RadialGrid& g, const CachedQuantities& c,
                          const InitialSnapshot& snap, const LambdaCtx& lam,
                          const Weight& w, double kappa, const DynOptions& opt) {
    const int m = g.size();
    const double delta = w.delta_scale;
    const double kp1 = 1.0 + kappa;
    const Terms t = build_terms(g, c, lam, w, kappa, opt);

    RhsBreakdown rb;
    fill_remainders(g, c, t, w, kappa, opt, rb.R1, rb.R2, rb.R3, rb.L0_term);

    rb.E1.assign(m, 0.0);
    rb.E2.assign(m, 0.0);
    rb.E3.assign(m, 0.0);
    rb.E4_indep.assign(m, 0.0);
    rb.E5.assign(m, 0.0);
    rb.E6.resize(m);
    rb.e4_coeff.assign(m, 0.0);

    std::vector<double> dGk_z;
    if (!opt.classical_limit) dGk_z = g.deriv(c.Gk);

    for (int k = 0; k < m; ++k) {
        const double z = g.node(k);
        rb.E6[k] = t.A[k] * z;
        if (opt.classical_limit) continue;

        const double xi2 = c.xi[k] * c.xi[k];
        const double pre2 = t.u0m4[k] * xi2;
        const double Gkm1 = (1.0 - c.kGbar[k]) / c.kGbar[k]; // G^k - 1
        rb.E1[k] = (rb.L0_term[k] + rb.R1[k] + rb.R2[k] + rb.R3[k]) * Gkm1;
        rb.E2[k] = pre2 * (1.0 + 1.0 / kappa) * w.dw(z) * c.Gk[k];
        rb.E3[k] = (kp1 / kappa) * pre2 * t.Fmk1[k] * w.w(z) * dGk_z[k];

        // E4 = q w d_tau(F^{-k} G^k), split into accel-independent + coeff*accel
        const double dtheta = c.X[k] - lam.lambda_bar_tau * c.eta[k];
        const double q = (kp1 / kappa) * c.U0inv2[k] * c.X[k];
        const double dpF = -kappa * t.Fmk1[k] * c.dF[k];
        const double cG = -0.5 * kappa * std::pow(c.U0[k], kappa + 2.0) * snap.C0[k];
        const double dG_ind = kappa * delta * w.w(z) * lam.lambda_m3k * t.Fmk1[k] * c.dF[k] +
                              3.0 * kappa * lam.lambda_bar_tau * delta * w.w(z) *
                                  lam.lambda_m3k * t.Fmk[k];
        const double aU = -2.0 * c.X[k];
        const double bU = -2.0 * c.X[k] *
                          (lam.dlambda_bar_tau * c.eta[k] + lam.lambda_bar_tau * dtheta);
        const double Gk2 = c.Gk[k] * c.Gk[k];
        rb.E4_indep[k] =
            q * w.w(z) * (dpF * c.Gk[k] + t.Fmk[k] * (-Gk2) * (cG * bU + dG_ind));
        rb.e4_coeff[k] = q * w.w(z) * t.Fmk[k] * (-Gk2) * cG * aU;
        rb.E5[k] = -3.0 * kp1 * lam.lambda_bar_tau * c.U0inv2[k] * c.X[k] * w.w(z) *
                   t.Fmk[k] * c.Gk[k];
    }

    // delta-scaled pointwise linear relation a * accel = b
    rb.accel_coeff_a.resize(m);
    rb.accel_rhs_b.resize(m);
    for (int k = 0; k < m; ++k) {
        const double z = g.node(k);
        const double theta_k = c.eta[k] - z;
        const double dtheta = c.X[k] - lam.lambda_bar_tau * c.eta[k];
        rb.accel_coeff_a[k] = t.A[k] * lam.lambda_3k + delta * rb.e4_coeff[k];
        rb.accel_rhs_b[k] =
            -(t.A[k] * lam.lambda_3k * lam.lambda_bar_tau * dtheta +
              delta * (t.A[k] * theta_k + rb.L0_term[k] + rb.R1[k] + rb.R2[k] + rb.R3[k] +
                       rb.E1[k] + rb.E2[k] + rb.E3[k] + rb.E4_indep[k] + rb.E5[k] + rb.E6[k]));
    }
    return rb;
}

RadialField acceleration(const RadialGrid& g, const CachedQuantities& c,
                         const InitialSnapshot& snap, const LambdaCtx& lam,
                         const Weight& w, double kappa, const DynOptions& opt,
                         const Tolerances& tol, RhsBreakdown* breakdown) {
    RhsBreakdown rb = assemble_rhs(g, c, snap, lam, w, kappa, opt);
    RadialField acc;
    acc.parity = Parity::odd;
    acc.v.resize(g.size());
    const double floor = tol.a_floor_frac * lam.lambda_3k;
    for (int k = 0; k < g.size(); ++k) {
        if (std::abs(rb.accel_coeff_a[k]) < floor)
            throw SimError(TerminationCause::instability,
                           "acceleration: quasilinear coefficient degenerated at zeta = " +
                               std::to_string(g.node(k)),
                           -1.0, g.node(k));
        acc.v[k] = rb.accel_rhs_b[k] / rb.accel_coeff_a[k];
        if (!std::isfinite(acc.v[k]))
            throw SimError(TerminationCause::instability,
                           "acceleration: non-finite value at zeta = " +
                               std::to_string(g.node(k)));
    }
    if (breakdown) *breakdown = std::move(rb);
    return acc;
}

double back_substitution_residual(const RadialGrid& g, const CachedQuantities& c,
                                  const InitialSnapshot& snap, const LambdaCtx& lam,
                                  const Weight& w, double kappa,
                                  const std::vector<double>& accel, const DynOptions& opt) {
    const int m = g.size();
    const double delta = w.delta_scale;
    const double kp1 = 1.0 + kappa;

    if (opt.classical_limit) {
        // cross-path check: direct pressure form against the assembled solve
        const PressureDecomposition pd = pressure_gradient(g, c, w, kappa, opt);
        double num = 0.0, den = 0.0;
        for (int k = 0; k < m; ++k) {
            const double z = g.node(k);
            const double theta_k = c.eta[k] - z;
            const double dtheta = c.X[k] - lam.lambda_bar_tau * c.eta[k];
            const double Fmk = std::pow(c.F[k], -kappa);
            const double A = 1.0 + delta * lam.lambda_m3k * w.w(z) * Fmk;
            const double inertial =
                A * (lam.lambda_3k * (accel[k] + lam.lambda_bar_tau * dtheta) +
                     delta * (theta_k + z));
            const double total = inertial + delta * pd.direct[k];
            num = std::max(num, std::abs(total));
            den = std::max({den, std::abs(inertial), delta * std::abs(pd.direct[k])});
        }
        return den > 0.0 ? num / den : num;
    }

    // primitive Lagrangian momentum equation with f^k differentiated directly
    CachedQuantities cc = c;
    finalize_cache(g, cc, snap, lam, w, kappa, accel);
    std::vector<double> fk(m), dfk_dtau(m);
    for (int k = 0; k < m; ++k) {
        const double z = g.node(k);
        const double Fmk = std::pow(cc.F[k], -kappa);
        const double Fmk1 = Fmk / cc.F[k];
        fk[k] = delta * w.w(z) * Fmk * cc.Gk[k];
        dfk_dtau[k] =
            delta * w.w(z) * (-kappa * Fmk1 * cc.dF[k] * cc.Gk[k] + Fmk * cc.dGk[k]);
    }
    const std::vector<double> dfk_dz = g.deriv(fk);

    double num = 0.0, den = 0.0;
    for (int k = 0; k < m; ++k) {
        const double dtheta = cc.X[k] - lam.lambda_bar_tau * cc.eta[k];
        const double T1 = (1.0 + lam.lambda_m3k * fk[k]) *
                          (lam.lambda_3k * (accel[k] + lam.lambda_bar_tau * dtheta) +
                           delta * cc.eta[k]);
        const double T2 = (kp1 / kappa) * cc.U0inv2[k] * cc.U0inv2[k] *
                          dfk_dz[k] / (1.0 + cc.dz_theta[k]);
        const double T3 = (kp1 / kappa) * cc.U0inv2[k] * cc.X[k] *
                          (dfk_dtau[k] - 3.0 * kappa * lam.lambda_bar_tau * fk[k]);
        const double total = T1 + T2 + T3;
        num = std::max(num, std::abs(total));
        den = std::max({den, std::abs(T1), std::abs(T2), std::abs(T3)});
    }
    return den > 0.0 ? num / den : num;
}

double default_dt_tau(const RadialGrid& g, const SimParams& params, const InitialState& init) {
    const Weight w = make_weight(params.weight_kind, params.delta);
    LagrangianState st{0.0, init.theta0, init.dtheta0};
    const RadialField F = jacobian_F(g, st);
    const double lam_m3k2 = std::pow(params.lambda0, -1.5 * params.kappa);
    double speed = params.lambda1;
    for (int k = 0; k < g.size(); ++k) {
        const double wd = w.w_delta(g.node(k));
        const double cs = std::sqrt(std::max(0.0, wd * std::pow(F.v[k], -params.kappa - 1.0))) *
                          lam_m3k2;
        speed = std::max(speed, cs);
    }
    return 0.5 * g.min_spacing() / std::max(speed, 1e-12);
}

// ---------------------------------------------------------------------------
// Evolver

struct Evolver::Deriv {
    std::vector<double> dtheta;
    std::vector<double> ddtheta;
    std::vector<double> dgbar;
    double dlambda = 0.0;
    double dlbar = 0.0;
    double dt = 0.0;
    double ds = 0.0;
};

Evolver::Evolver(const RadialGrid& g, const SimParams& params, const DynOptions& opt,
                 const InitialState& init)
    : grid_(g), params_(params), opt_(opt),
      weight_(make_weight(params.weight_kind, params.delta)) {
    state_.tau = 0.0;
    state_.theta = init.theta0.v;
    state_.dtheta = init.dtheta0.v;
    state_.lambda = params.lambda0;
    state_.lambda_bar_tau = params.lambda1;
    state_.t = 0.0;
    state_.s = 0.0;
    state_.gbar_ode.assign(g.size(), 1.0 / params.kappa);
    LagrangianState st{0.0, init.theta0, init.dtheta0};
    snap_ = freeze_snapshot(g, st,
                            LambdaCtx::make(params.lambda0, params.lambda1, params.delta,
                                            params.kappa),
                            weight_, params.kappa);
}

Evolver::Evolver(const RadialGrid& g, const SimParams& params, const DynOptions& opt,
                 EvolveState state, InitialSnapshot snap)
    : grid_(g), params_(params), opt_(opt),
      weight_(make_weight(params.weight_kind, params.delta)), snap_(std::move(snap)),
      state_(std::move(state)) {}

LagrangianState Evolver::lagrangian_state() const {
    LagrangianState st;
    st.tau = state_.tau;
    st.theta = RadialField{state_.theta, Parity::odd, "Theta"};
    st.dtheta = RadialField{state_.dtheta, Parity::odd, "dTheta"};
    return st;
}

LambdaCtx Evolver::lambda_ctx() const {
    return LambdaCtx::make(state_.lambda, state_.lambda_bar_tau, params_.delta, params_.kappa);
}

Evolver::Deriv Evolver::rhs(const EvolveState& y) const {
    const double kappa = params_.kappa;
    const LambdaCtx lam = LambdaCtx::make(y.lambda, y.lambda_bar_tau, params_.delta, kappa);
    LagrangianState st;
    st.tau = y.tau;
    st.theta = RadialField{y.theta, Parity::odd};
    st.dtheta = RadialField{y.dtheta, Parity::odd};
    CachedQuantities c = build_cache(grid_, st, snap_, lam, weight_, kappa,
                                     params_.tol.gbar_floor);
    RhsBreakdown rb;
    const RadialField acc =
        acceleration(grid_, c, snap_, lam, weight_, kappa, opt_, params_.tol, &rb);

    Deriv d;
    d.dtheta = y.dtheta;
    d.ddtheta = acc.v;
    d.dlambda = y.lambda_bar_tau * y.lambda;
    d.dlbar = lam.dlambda_bar_tau;
    d.dt = y.lambda;
    d.ds = std::pow(y.lambda, -1.5 * kappa);

    // Gbar passenger: d_tau Gbar = (-k/2 dlog) Gbar
    //                + delta lam^{-3k} w F^{-k} [ -dlog/2 + dF/F + 3 lbar ]
    d.dgbar.resize(grid_.size());
    const double delta = params_.delta;
    for (int k = 0; k < grid_.size(); ++k) {
        double dlog = 0.0;
        if (!opt_.classical_limit) {
            const double dX = acc.v[k] + lam.dlambda_bar_tau * c.eta[k] +
                              lam.lambda_bar_tau * y.dtheta[k];
            dlog = -2.0 * c.X[k] * dX / c.U0inv2[k];
        }
        const double Fmk = std::pow(c.F[k], -kappa);
        d.dgbar[k] = -0.5 * kappa * dlog * y.gbar_ode[k] +
                     delta * lam.lambda_m3k * weight_.w(grid_.node(k)) * Fmk *
                         (-0.5 * dlog + c.dF[k] / c.F[k] + 3.0 * lam.lambda_bar_tau);
    }
    return d;
}

void Evolver::step(double dt) {
    const EvolveState& y0 = state_;
    auto advance = [&](const EvolveState& y, const Deriv& d, double h) {
        EvolveState out = y;
        out.tau = y.tau + h;
        for (std::size_t k = 0; k < y.theta.size(); ++k) {
            out.theta[k] = y.theta[k] + h * d.dtheta[k];
            out.dtheta[k] = y.dtheta[k] + h * d.ddtheta[k];
            out.gbar_ode[k] = y.gbar_ode[k] + h * d.dgbar[k];
        }
        out.lambda = y.lambda + h * d.dlambda;
        out.lambda_bar_tau = y.lambda_bar_tau + h * d.dlbar;
        out.t = y.t + h * d.dt;
        out.s = y.s + h * d.ds;
        return out;
    };

    const Deriv k1 = rhs(y0);
    const Deriv k2 = rhs(advance(y0, k1, 0.5 * dt));
    const Deriv k3 = rhs(advance(y0, k2, 0.5 * dt));
    const Deriv k4 = rhs(advance(y0, k3, dt));

    EvolveState out = y0;
    out.tau = y0.tau + dt;
    for (std::size_t k = 0; k < y0.theta.size(); ++k) {
        out.theta[k] =
            y0.theta[k] + dt / 6.0 *
                              (k1.dtheta[k] + 2 * k2.dtheta[k] + 2 * k3.dtheta[k] + k4.dtheta[k]);
        out.dtheta[k] = y0.dtheta[k] + dt / 6.0 * (k1.ddtheta[k] + 2 * k2.ddtheta[k] +
                                                   2 * k3.ddtheta[k] + k4.ddtheta[k]);
        out.gbar_ode[k] = y0.gbar_ode[k] + dt / 6.0 * (k1.dgbar[k] + 2 * k2.dgbar[k] +
                                                       2 * k3.dgbar[k] + k4.dgbar[k]);
    }
    out.lambda =
        y0.lambda + dt / 6.0 * (k1.dlambda + 2 * k2.dlambda + 2 * k3.dlambda + k4.dlambda);
    out.lambda_bar_tau =
        y0.lambda_bar_tau + dt / 6.0 * (k1.dlbar + 2 * k2.dlbar + 2 * k3.dlbar + k4.dlbar);
    out.t = y0.t + dt / 6.0 * (k1.dt + 2 * k2.dt + 2 * k3.dt + k4.dt);
    out.s = y0.s + dt / 6.0 * (k1.ds + 2 * k2.ds + 2 * k3.ds + k4.ds);

    // parity pinning at the origin node; the drift is pure round-off
    parity_drift_ = std::max(std::abs(out.theta[0]), std::abs(out.dtheta[0]));
    out.theta[0] = 0.0;
    out.dtheta[0] = 0.0;
    if (opt_.filter_on) {
        opt_.filter.apply(grid_, out.theta);
        opt_.filter.apply(grid_, out.dtheta);
        out.theta[0] = 0.0;
        out.dtheta[0] = 0.0;
    }
    if (!std::isfinite(out.theta[grid_.n()]) || !std::isfinite(out.dtheta[grid_.n()]))
        throw SimError(TerminationCause::instability, "step: non-finite state", out.tau);
    state_ = std::move(out);
}

namespace {

TrajectorySample record_sample(Evolver& ev, const SimParams& params, const DynOptions& opt,
                               bool check_back_sub, bool stop_on_bootstrap) {
    TrajectorySample smp;
    const EvolveState& y = ev.state();
    smp.tau = y.tau;
    smp.t = y.t;
    smp.s = y.s;
    smp.lambda = y.lambda;
    smp.lambda_bar_tau = y.lambda_bar_tau;
    smp.theta = RadialField{y.theta, Parity::odd, "Theta"};
    smp.dtheta = RadialField{y.dtheta, Parity::odd, "dTheta"};
    smp.gbar_ode = y.gbar_ode;
    smp.parity_drift = ev.parity_drift();
    if (check_back_sub || stop_on_bootstrap) {
        const LambdaCtx lam = ev.lambda_ctx();
        const LagrangianState st = ev.lagrangian_state();
        CachedQuantities c = build_cache(ev.grid(), st, ev.snapshot(), lam, ev.weight(),
                                         params.kappa, params.tol.gbar_floor);
        if (check_back_sub) {
            const RadialField acc = acceleration(ev.grid(), c, ev.snapshot(), lam,
                                                 ev.weight(), params.kappa, opt, params.tol);
            smp.back_sub_residual = back_substitution_residual(
                ev.grid(), c, ev.snapshot(), lam, ev.weight(), params.kappa, acc.v, opt);
            if (smp.back_sub_residual > params.tol.solve_tol * 1e2)
                throw SimError(TerminationCause::instability,
                               "back-substitution residual " +
                                   std::to_string(smp.back_sub_residual) + " above tolerance",
                               y.tau);
        }
        if (stop_on_bootstrap && !opt.classical_limit) {
            // first integral of the lambda ODE gives the asymptotic rate exactly
            const double bar2 = params.lambda1 * params.lambda1 +
                                (2.0 * params.delta / (3.0 * params.kappa)) *
                                    std::pow(params.lambda0, -3.0 * params.kappa);
            double fg = 0.0;
            bool u0_ok = true;
            for (int k = 0; k < ev.grid().size(); ++k) {
                const double z = ev.grid().node(k);
                fg = std::max(fg, std::abs(c.F[k] - 1.0) + std::abs(c.kGbar[k] - 1.0));
                const double band = 1.0 - bar2 * z * z;
                if (c.U0inv2[k] < 0.5 * band || c.U0inv2[k] > 1.5 * band) u0_ok = false;
            }
            if (fg > 0.01 || !u0_ok)
                throw SimError(TerminationCause::instability,
                               std::string("bootstrap band violated (") +
                                   (u0_ok ? "F/Gbar" : "U0") + ")",
                               y.tau);
        }
    }
    return smp;
}

} // namespace

static Trajectory drive(const RunSetup& setup, Evolver& ev) {
    Trajectory traj;
    const SimParams& params = setup.params;
    double dt = params.dt_tau;
    traj.dt_tau = dt;
    long long k = 0;
    try {
        traj.samples.push_back(record_sample(ev, params, setup.options,
                                             setup.check_back_substitution,
                                             setup.stop_on_bootstrap));
        if (setup.on_record) setup.on_record(ev.state(), ev.snapshot(), 0);
        while (ev.state().tau < params.tau_max - 1e-12) {
            const double h = std::min(dt, params.tau_max - ev.state().tau);
            ev.step(h);
            ++k;
            if (params.tol.parity_tol > 0.0) {
                double sup = 0.0;
                for (double x : ev.state().theta) sup = std::max(sup, std::abs(x));
                if (ev.parity_drift() > params.tol.parity_tol * std::max(1.0, sup))
                    throw SimError(TerminationCause::instability,
                                   "parity drift above tolerance", ev.state().tau);
            }
            if (k % setup.cadence == 0 || ev.state().tau >= params.tau_max - 1e-12) {
                traj.samples.push_back(record_sample(ev, params, setup.options,
                                                     setup.check_back_substitution,
                                                     setup.stop_on_bootstrap));
                if (setup.on_record) setup.on_record(ev.state(), ev.snapshot(), k);
            }
        }
        traj.tau_end = ev.state().tau;
    } catch (const SimError& e) {
        traj.cause = e.cause();
        traj.cause_detail = e.what();
        traj.tau_end = ev.state().tau;
    }
    traj.n_steps = k;
    return traj;
}

Trajectory run(const RadialGrid& g, const RunSetup& setup, const InitialState& init) {
    RunSetup s = setup;
    s.params.validate();
    if (s.params.dt_tau <= 0.0) s.params.dt_tau = default_dt_tau(g, s.params, init);
    Evolver ev(g, s.params, s.options, init);
    return drive(s, ev);
}

Trajectory run_resumed(const RadialGrid& g, const RunSetup& setup, EvolveState state,
                       InitialSnapshot snap) {
    RunSetup s = setup;
    s.params.validate();
    if (s.params.dt_tau <= 0.0)
        throw std::invalid_argument("run_resumed: dt_tau must be pinned for resumed runs");
    Evolver ev(g, s.params, s.options, std::move(state), std::move(snap));
    return drive(s, ev);
}

} // namespace vstar
