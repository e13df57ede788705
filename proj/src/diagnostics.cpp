#include "vstar/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "vstar/errors.hpp"

namespace vstar {

namespace {

double pow_m1(double xm1, double p) { return std::expm1(p * std::log1p(xm1)); }

} // namespace

// Asymptotic expansion rate from the first integral of the lambda ODE:
// (d_t lambda)^2 = lambda1^2 + (2 delta/3k)(lambda0^{-3k} - lambda^{-3k}).
double bar_lambda_exact(const SimParams& p) {
    return std::sqrt(p.lambda1 * p.lambda1 +
                     (2.0 * p.delta / (3.0 * p.kappa)) * std::pow(p.lambda0, -3.0 * p.kappa));
}

EnergyTriple energy(const RadialGrid& g, const LagrangianState& state,
                    const CachedQuantities& c, const LambdaCtx& lam, double delta,
                    const Weight& w, double kappa, int i) {
    EnergyTriple out;
    const RadialField di_th = apply_Di(g, state.theta, i);
    const RadialField di_dth = apply_Di(g, state.dtheta, i);
    const RadialField di1_th = apply_Di(g, state.theta, i + 1);

    const double inv_delta = (delta > 0.0) ? 1.0 / delta : 1.0; // dust: factor dropped
    const double wkin = inv_delta * lam.lambda_3k;

    const double n_dth = weighted_norm(g, di_dth, i, w, kappa);
    const double n_th = weighted_norm(g, di_th, i, w, kappa);
    const double n_th1 = weighted_norm(g, di1_th, i + 1, w, kappa);
    out.calE = wkin * n_dth * n_dth + n_th * n_th + n_th1 * n_th1;

    // coefficient-weighted version
    std::vector<double> Acoef(g.size()), ell(g.size());
    for (int k = 0; k < g.size(); ++k) {
        const double z = g.node(k);
        const double Fmk = std::pow(c.F[k], -kappa);
        Acoef[k] = 1.0 + delta * lam.lambda_m3k * w.w(z) * Fmk * c.Gk[k];
        ell[k] = Fmk / (c.F[k] * c.F[k]) * c.U0inv2[k] * c.U0inv2[k] * std::pow(c.xi[k], 4);
    }
    auto wint = [&](const std::vector<double>& f, const std::vector<double>& coef, int ord,
                    double extra_w_pow) {
        std::vector<double> integ(g.size());
        for (int k = 0; k < g.size(); ++k) {
            const double z = g.node(k);
            integ[k] = w.w_pow(z, 1.0 / kappa + ord + extra_w_pow) * z * z * coef[k] * f[k] *
                       f[k];
        }
        return g.integrate(integ);
    };
    out.mfE = 0.5 * wkin * wint(di_dth.v, Acoef, i, 0.0) + 0.5 * wint(di_th.v, Acoef, i, 0.0) +
              0.5 * (1.0 + kappa) * wint(di1_th.v, ell, i + 1, 0.0);
    out.mfD = (1.0 - 1.5 * kappa) * lam.lambda_bar_tau * wkin * n_dth * n_dth;
    return out;
}

BootstrapFlags bootstrap_monitor(const RadialGrid& g, const CachedQuantities& c,
                                 double running_sup_EN, double M_star, double epsilon,
                                 double bar_lambda) {
    BootstrapFlags f;
    f.en_value = running_sup_EN;
    const double en_threshold = M_star * epsilon;
    f.en_ok = running_sup_EN <= en_threshold;
    f.en_margin = en_threshold - running_sup_EN;

    double fg = 0.0;
    double u0_margin = 1e300;
    bool u0_ok = true;
    for (int k = 0; k < g.size(); ++k) {
        const double z = g.node(k);
        fg = std::max(fg, std::abs(c.F[k] - 1.0) + std::abs(c.kGbar[k] - 1.0));
        const double band = 1.0 - bar_lambda * bar_lambda * z * z;
        const double lo = 0.5 * band, hi = 1.5 * band;
        if (c.U0inv2[k] < lo || c.U0inv2[k] > hi) u0_ok = false;
        u0_margin = std::min(u0_margin, std::min(c.U0inv2[k] - lo, hi - c.U0inv2[k]));
    }
    f.fg_value = fg;
    f.fg_ok = fg <= 0.01;
    f.fg_margin = 0.01 - fg;
    f.u0_ok = u0_ok;
    f.u0_margin = u0_margin;
    return f;
}

std::map<std::string, double> identity_suite(const RadialGrid& g, const CachedQuantities& c,
                                             const Weight& w, double kappa,
                                             const DynOptions& opt) {
    std::map<std::string, double> res;
    const int m = g.size();
    const double kp1 = 1.0 + kappa;

    // Lemma on F - 1: F - 1 = D_z(Theta + Theta^2/zeta) + (1/3) D_z(Theta^3/zeta^2)
    {
        std::vector<double> theta(m);
        for (int k = 0; k < m; ++k) theta[k] = c.eta[k] - g.node(k);
        std::vector<double> q1(m), q2(m);
        q1[0] = q2[0] = 0.0;
        for (int k = 1; k < m; ++k) {
            const double z = g.node(k);
            q1[k] = theta[k] + theta[k] * theta[k] / z;
            q2[k] = theta[k] * theta[k] * theta[k] / (z * z);
        }
        const std::vector<double> a = apply_Dz(g, RadialField{q1, Parity::odd}).v;
        const std::vector<double> b = apply_Dz(g, RadialField{q2, Parity::odd}).v;
        double num = 0.0, den = 0.0;
        for (int k = 0; k < m; ++k) {
            const double rhs = a[k] + b[k] / 3.0;
            num = std::max(num, std::abs(c.Fm1[k] - rhs));
            den = std::max({den, std::abs(c.Fm1[k]), std::abs(rhs), 1e-300});
        }
        res["lemma6.1"] = num / den;
    }

    // pressure decomposition (direct vs elliptic + remainders)
    res["lemma4.1"] = pressure_gradient(g, c, w, kappa, opt).residual;

    // D_z R3 expansion into first-derivative terms
    {
        std::vector<double> DzT(m), hm1(m), gm2(m), Fmk3(m);
        for (int k = 0; k < m; ++k) {
            DzT[k] = c.dz_theta[k] + 2.0 * c.theta_over_zeta[k];
            hm1[k] = pow_m1(c.Fm1[k], -1.0 - kappa);
            gm2[k] = pow_m1(c.Fm1[k], -kappa - 2.0);
            Fmk3[k] = std::pow(c.F[k], -kappa - 3.0);
        }
        const std::vector<double> dthz = g.deriv(c.theta_over_zeta);
        const std::vector<double> dF = g.deriv(c.F);
        std::vector<double> R3low(m), B(m);
        for (int k = 0; k < m; ++k) {
            const double xi2 = c.xi[k] * c.xi[k];
            B[k] = hm1[k] + kp1 * c.Fm1[k] + kp1 * gm2[k] * xi2 * DzT[k];
            R3low[k] = (kp1 / kappa) * w.dw(g.node(k)) * B[k];
        }
        const std::vector<double> lhs = apply_Dz(g, RadialField{R3low, Parity::odd}).v;
        double num = 0.0, den = 0.0;
        for (int k = 0; k < m; ++k) {
            const double z = g.node(k);
            // D_z w' = w'' + 2 w'/zeta, with the origin limit 3 w''(0)
            const double Dzdw =
                (k == 0) ? 3.0 * w.ddw(0.0) : w.ddw(z) + 2.0 * w.dw(z) / z;
            const double rhs =
                (kp1 / kappa) * Dzdw * B[k] +
                (kp1 / kappa) * w.dw(z) *
                    (6.0 * kp1 * gm2[k] * c.xi[k] * c.theta_over_zeta[k] * dthz[k] -
                     kp1 * (kappa + 2.0) * Fmk3[k] * c.xi[k] * c.xi[k] * dF[k] * DzT[k]);
            num = std::max(num, std::abs(lhs[k] - rhs));
            den = std::max({den, std::abs(lhs[k]), std::abs(rhs), 1e-300});
        }
        res["lemma4.2"] = num / den;
    }

    // cancellation on M(Theta)
    res["lemma5.1"] = m_cancellation_check(g, c, w, kappa).residual;

    // product rule D_z(fg) = (D_z f) g + f d_z g on state fields (f odd, g even)
    {
        std::vector<double> theta(m), prod(m);
        for (int k = 0; k < m; ++k) {
            theta[k] = c.eta[k] - g.node(k);
            prod[k] = theta[k] * c.F[k];
        }
        const std::vector<double> lhs = apply_Dz(g, RadialField{prod, Parity::odd}).v;
        const std::vector<double> Dzf = apply_Dz(g, RadialField{theta, Parity::odd}).v;
        const std::vector<double> dg = g.deriv(c.F);
        double num = 0.0, den = 0.0;
        for (int k = 0; k < m; ++k) {
            const double rhs = Dzf[k] * c.F[k] + theta[k] * dg[k];
            num = std::max(num, std::abs(lhs[k] - rhs));
            den = std::max({den, std::abs(lhs[k]), std::abs(rhs), 1e-300});
        }
        res["product_rule"] = num / den;
    }

    // D_z(zeta f) = 3 f + zeta d_z f on the even field F
    {
        std::vector<double> zf(m);
        for (int k = 0; k < m; ++k) zf[k] = g.node(k) * c.F[k];
        const std::vector<double> lhs = apply_Dz(g, RadialField{zf, Parity::odd}).v;
        const std::vector<double> dF = g.deriv(c.F);
        double num = 0.0, den = 0.0;
        for (int k = 0; k < m; ++k) {
            const double rhs = 3.0 * c.F[k] + g.node(k) * dF[k];
            num = std::max(num, std::abs(lhs[k] - rhs));
            den = std::max({den, std::abs(lhs[k]), std::abs(rhs), 1e-300});
        }
        res["Dz_zeta_shift"] = num / den;
    }
    return res;
}

EnergyReport energy_report(const RadialGrid& g, const TrajectorySample& smp,
                           const InitialSnapshot& snap, const SimParams& params,
                           const DynOptions& opt, double running_sup_EN, double M_star,
                           double epsilon, double bar_lambda) {
    EnergyReport rep;
    rep.tau = smp.tau;
    const Weight w = make_weight(params.weight_kind, params.delta);
    const LambdaCtx lam =
        LambdaCtx::make(smp.lambda, smp.lambda_bar_tau, params.delta, params.kappa);
    LagrangianState st{smp.tau, smp.theta, smp.dtheta};
    CachedQuantities c =
        build_cache(g, st, snap, lam, w, params.kappa, params.tol.gbar_floor);
    for (int i = 0; i <= params.n_diag; ++i) {
        const EnergyTriple e = energy(g, st, c, lam, params.delta, w, params.kappa, i);
        rep.calE.push_back(e.calE);
        rep.mfE.push_back(e.mfE);
        rep.mfD.push_back(e.mfD);
    }
    const RadialField acc =
        acceleration(g, c, snap, lam, w, params.kappa, opt, params.tol);
    const RadialField accf{acc.v, Parity::odd};
    const double s0 = weighted_norm(g, accf, 0, w, params.kappa);
    rep.S_contribution = s0 * s0;
    rep.flags = bootstrap_monitor(g, c, running_sup_EN, M_star, epsilon, bar_lambda);
    rep.identity_residuals = identity_suite(g, c, w, params.kappa, opt);
    rep.identity_residuals["back_substitution"] = back_substitution_residual(
        g, c, snap, lam, w, params.kappa, acc.v, opt);
    return rep;
}

BalanceSeries energy_balance_residual(const RadialGrid& g, const Trajectory& traj,
                                      const InitialSnapshot& snap, const SimParams& params,
                                      const DynOptions& opt) {
    BalanceSeries out;
    if (traj.samples.size() < 3)
        throw SimError(TerminationCause::resolution,
                       "energy_balance_residual: need at least 3 samples");
    const Weight w = make_weight(params.weight_kind, params.delta);
    const double kappa = params.kappa;
    const double delta = params.delta;
    const double kp1 = 1.0 + kappa;

    // per-sample mfE_0 plus the flux/error terms of the order-0 balance
    struct Row {
        double tau, mfE0, mfD0, flux, Isum;
        double scale;
    };
    std::vector<Row> rows;
    rows.reserve(traj.samples.size());

    for (const TrajectorySample& smp : traj.samples) {
        const LambdaCtx lam =
            LambdaCtx::make(smp.lambda, smp.lambda_bar_tau, delta, kappa);
        LagrangianState st{smp.tau, smp.theta, smp.dtheta};
        CachedQuantities c = build_cache(g, st, snap, lam, w, kappa, params.tol.gbar_floor);
        RhsBreakdown rb;
        const RadialField acc = acceleration(g, c, snap, lam, w, kappa, opt, params.tol, &rb);
        finalize_cache(g, c, snap, lam, w, kappa, acc.v);

        const EnergyTriple e0 = energy(g, st, c, lam, delta, w, kappa, 0);

        // flux terms (R1+R2+R3 + sum E_j, dTheta)_0 with the full E4
        std::vector<double> terms(g.size());
        for (int k = 0; k < g.size(); ++k) {
            const double E4 = rb.E4_indep[k] + rb.e4_coeff[k] * acc.v[k];
            terms[k] = rb.R1[k] + rb.R2[k] + rb.R3[k] + rb.E1[k] + rb.E2[k] + rb.E3[k] +
                       E4 + rb.E5[k] + rb.E6[k];
        }
        const double flux = weighted_inner(g, terms, smp.dtheta.v, 0, w, kappa);

        // I_1..I_5 with the coefficient tau-derivatives from the finalized cache
        const int m = g.size();
        std::vector<double> wFG(m), dwFG(m), coefEll(m), dcoefEll_tau(m);
        const RadialField dth_over = divide_by_zeta(g, smp.dtheta);
        for (int k = 0; k < m; ++k) {
            const double z = g.node(k);
            const double Fmk = std::pow(c.F[k], -kappa);
            const double Fmk1 = Fmk / c.F[k];
            wFG[k] = w.w(z) * Fmk * c.Gk[k];
            dwFG[k] = w.w(z) * (-kappa * Fmk1 * c.dF[k] * c.Gk[k] + Fmk * c.dGk[k]);
            const double xi4 = std::pow(c.xi[k], 4);
            coefEll[k] = Fmk / (c.F[k] * c.F[k]) * c.U0inv2[k] * c.U0inv2[k] * xi4;
            // d_tau log coefEll = -(k+2) dF/F - 4 dU0/U0 + 4 dxi/xi,
            // dU0/U0 = -(1/2) dU0inv2 / U0inv2, dxi = dTheta/zeta
            const double dlog = -(kappa + 2.0) * c.dF[k] / c.F[k] +
                                2.0 * c.dU0inv2[k] / c.U0inv2[k] +
                                4.0 * dth_over.v[k] / c.xi[k];
            dcoefEll_tau[k] = coefEll[k] * dlog;
        }
        auto wint = [&](auto&& f) {
            std::vector<double> integ(m);
            for (int k = 0; k < m; ++k) {
                const double z = g.node(k);
                integ[k] = w.w_pow(z, 1.0 / kappa) * z * z * f(k);
            }
            return g.integrate(integ);
        };
        const double I1 = -0.5 * wint([&](int k) {
            return dwFG[k] * smp.dtheta.v[k] * smp.dtheta.v[k];
        });
        const double I2 = wint([&](int k) {
            return wFG[k] * lam.lambda_bar_tau * smp.dtheta.v[k] * smp.dtheta.v[k];
        });
        const double I3 = -0.5 * wint([&](int k) {
            const double th = c.eta[k] - g.node(k);
            const double dcoef =
                delta * lam.lambda_m3k *
                (dwFG[k] - 3.0 * kappa * lam.lambda_bar_tau * wFG[k]);
            return dcoef * th * th;
        });
        std::vector<double> DzT(m);
        for (int k = 0; k < m; ++k) DzT[k] = c.dz_theta[k] + 2.0 * c.theta_over_zeta[k];
        auto wint1 = [&](auto&& f) {
            std::vector<double> integ(m);
            for (int k = 0; k < m; ++k) {
                const double z = g.node(k);
                integ[k] = w.w_pow(z, 1.0 + 1.0 / kappa) * z * z * f(k);
            }
            return g.integrate(integ);
        };
        const double I4 = -0.5 * kp1 * wint1([&](int k) {
            return dcoefEll_tau[k] * DzT[k] * DzT[k];
        });
        const std::vector<double> dcoefEll_z = g.deriv(coefEll);
        const double I5 = kp1 * wint1([&](int k) {
            return dcoefEll_z[k] * smp.dtheta.v[k] * DzT[k];
        });

        Row r;
        r.tau = smp.tau;
        r.mfE0 = e0.mfE;
        r.mfD0 = e0.mfD;
        r.flux = flux;
        r.Isum = I1 + I2 + I3 + I4 + I5;
        r.scale = std::max({std::abs(e0.mfD), std::abs(flux), std::abs(I1), std::abs(I2),
                            std::abs(I3), std::abs(I4), std::abs(I5), 1e-300});
        rows.push_back(r);
    }

    for (std::size_t k = 1; k + 1 < rows.size(); ++k) {
        const double dE = (rows[k + 1].mfE0 - rows[k - 1].mfE0) /
                          (rows[k + 1].tau - rows[k - 1].tau);
        const double resid = dE + rows[k].mfD0 + rows[k].flux + rows[k].Isum;
        const double scale = std::max(rows[k].scale, std::abs(dE));
        out.tau.push_back(rows[k].tau);
        out.residual.push_back(resid / scale);
        out.largest_term.push_back(scale);
    }
    return out;
}

double material_u0_residual(const RadialGrid& g, const Trajectory& traj,
                            const InitialSnapshot& snap, const SimParams& params,
                            const DynOptions& opt) {
    if (traj.samples.size() < 3)
        throw SimError(TerminationCause::resolution, "material_u0_residual: need 3 samples");
    const Weight w = make_weight(params.weight_kind, params.delta);
    const double kappa = params.kappa;
    double worst = 0.0;
    for (std::size_t j = 1; j + 1 < traj.samples.size(); ++j) {
        const TrajectorySample& sm = traj.samples[j];
        const TrajectorySample& sl = traj.samples[j - 1];
        const TrajectorySample& sr = traj.samples[j + 1];
        const LambdaCtx lam = LambdaCtx::make(sm.lambda, sm.lambda_bar_tau, params.delta, kappa);
        LagrangianState st{sm.tau, sm.theta, sm.dtheta};
        CachedQuantities c = build_cache(g, st, snap, lam, w, kappa, params.tol.gbar_floor);
        const RadialField acc = acceleration(g, c, snap, lam, w, kappa, opt, params.tol);

        LagrangianState stl{sl.tau, sl.theta, sl.dtheta};
        LagrangianState str{sr.tau, sr.theta, sr.dtheta};
        const RadialField U0l = u0_lagrangian(g, stl, sl.lambda_bar_tau);
        const RadialField U0r = u0_lagrangian(g, str, sr.lambda_bar_tau);
        const double h2 = sr.tau - sl.tau;
        double num = 0.0, den = 0.0;
        for (int k = 0; k < g.size(); ++k) {
            const double fd = (U0r.v[k] - U0l.v[k]) / h2;
            const double rhs = std::pow(c.U0[k], 3) * c.X[k] *
                               (acc.v[k] + lam.lambda_bar_tau * sm.dtheta.v[k] +
                                params.delta * lam.lambda_m3k * c.eta[k]);
            num = std::max(num, std::abs(fd - rhs));
            den = std::max({den, std::abs(fd), std::abs(rhs), 1e-300});
        }
        worst = std::max(worst, num / den);
    }
    return worst;
}

SupportReport support_radius(const Trajectory& traj, double tail_fraction) {
    SupportReport rep;
    rep.partial = traj.cause != TerminationCause::none;
    const int last = static_cast<int>(traj.samples.size()) - 1;
    if (last < 2) {
        rep.partial = true;
        return rep;
    }
    const int nn = static_cast<int>(traj.samples.front().theta.v.size()) - 1;
    for (const TrajectorySample& s : traj.samples) {
        rep.t.push_back(s.t);
        rep.r.push_back(s.lambda * (1.0 + s.theta.v[nn]));
    }
    rep.theta_end_at_1 = traj.samples[last].theta.v[nn];

    // least-squares slope of r(t) over the tail window
    const double t_end = rep.t.back();
    const double t_lo = (1.0 - tail_fraction) * t_end;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (std::size_t k = 0; k < rep.t.size(); ++k) {
        if (rep.t[k] < t_lo) continue;
        sx += rep.t[k];
        sy += rep.r[k];
        sxx += rep.t[k] * rep.t[k];
        sxy += rep.t[k] * rep.r[k];
        ++n;
    }
    if (n >= 10) {
        const double det = n * sxx - sx * sx;
        rep.fitted_slope = (n * sxy - sx * sy) / det;
        const double icept = (sy - rep.fitted_slope * sx) / n;
        double ss = 0.0;
        for (std::size_t k = 0; k < rep.t.size(); ++k) {
            if (rep.t[k] < t_lo) continue;
            const double r = rep.r[k] - (icept + rep.fitted_slope * rep.t[k]);
            ss += r * r;
        }
        rep.slope_fit_error = std::sqrt(ss / n);
    } else {
        rep.partial = true;
    }

    // decay rate of the boundary Cauchy differences |Theta(tau,1) - Theta_end(1)|
    double sxt = 0, syt = 0, sxxt = 0, sxyt = 0;
    int nt = 0;
    const double tau_end = traj.samples[last].tau;
    for (int k = 0; k <= last; ++k) {
        const double tau = traj.samples[k].tau;
        if (tau < 0.2 * tau_end || tau > 0.85 * tau_end) continue;
        const double diff = std::abs(traj.samples[k].theta.v[nn] - rep.theta_end_at_1);
        if (diff < 1e-14) continue;
        const double y = std::log(diff);
        sxt += tau;
        syt += y;
        sxxt += tau * tau;
        sxyt += tau * y;
        ++nt;
    }
    if (nt >= 5) {
        const double det = nt * sxxt - sxt * sxt;
        rep.cauchy_rate = -(nt * sxyt - sxt * syt) / det; // positive = decaying
    }
    return rep;
}

} // namespace vstar
