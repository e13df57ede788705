#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vstar/grid.hpp"
#include "vstar/scaling.hpp"

namespace vstar {

// Spherically symmetric Eulerian data already in rescaled variables:
//   rho_tilde0(z) = lambda0^3 * rho(0, lambda0 z)      (even in z)
//   v_tilde0(z)   = lambda0^{3 kappa/2} * v(0, lambda0 z)  (odd in z)
// supplied as closures on [0,1].
struct EulerianData {
    std::function<double(double)> rho_tilde0;
    std::function<double(double)> v_tilde0;
};

// rho_ref = (delta w)^{1/kappa}, u_ref the pure background expansion at rate
// lambda1. This data maps to (Theta0, U0) = (0, 0) exactly.
EulerianData reference_data(const Weight& w, double kappa, double lambda0, double lambda1);

// Data from a CSV with columns (zeta, rho_tilde0, v_tilde0); intermediate
// queries use monotone cubic interpolation of the samples.
EulerianData load_data_csv(const std::string& filename);
void write_data_csv(const std::string& filename, const EulerianData& data, int n_samples);

// m(x) = int_0^x rho_tilde0(z) z^2 dz by composite Gauss-Legendre panels.
// Negative density anywhere in the panel samples is an input-domain error.
class MassFunction {
public:
    MassFunction(std::function<double(double)> rho, int n_panels = 64);
    double operator()(double x) const; // m(x)
    double density(double x) const;    // rho(x)
    double total() const { return total_; }

private:
    std::function<double(double)> rho_;
    int n_panels_;
    std::vector<double> panel_cum_; // cumulative mass at panel ends
    double total_;
};

MassFunction mass_function(const EulerianData& data);
MassFunction reference_mass_function(const Weight& w, double kappa);

// Gauge-fixing diffeomorphism eta0 = m^{-1} o m_ref, so that
//   F_0 f_0 = (delta w)^{1/kappa}   with F_0 = (eta0/zeta)^2 d_zeta eta0.
// Inversion runs per node with bracketed Newton on the regularized charts
// m^{1/3} near 0 and (M - m)^{kappa/(1+kappa)} near 1, which are the
// diffeomorphic variables at the endpoints.
struct GaugeMap {
    std::vector<double> eta0;     // on the grid nodes
    double mass_total = 0.0;      // M = 4 pi m(1)
    double mass_ref = 0.0;        // M_ref = 4 pi m_ref(1)
    double max_mass_residual = 0.0; // sup |m(eta0) - m_ref| after inversion
};

// Requires |M - M_ref| <= mass_tol * M_ref; otherwise a gauge-incompatibility
// error naming both masses.
GaugeMap solve_eta0(const RadialGrid& g, const MassFunction& m, const MassFunction& m_ref,
                    double kappa, double mass_tol);

// (Theta0, dTheta0) from Eulerian data through the gauge map:
//   Theta0 = eta0 - zeta,
//   d_tau Theta(0) = lambda0^{-3 kappa/2} V(0, eta0(zeta)),
//   V = v_tilde/u^0 - (lambda'/lambda) z,  (u^0)^2 = 1 + lambda0^{-3 kappa} v_tilde^2.
// Both fields are tagged odd. Superluminal composed speed is a causality error.
struct InitialState {
    RadialField theta0;
    RadialField dtheta0;
};

InitialState build_initial_state(const RadialGrid& g, const EulerianData& data,
                                 const SimParams& params, const GaugeMap& gauge);

// Discrete gauge residual sup | F_0 (rho_tilde0 o eta0) - (delta w)^{1/kappa} |
// with F_0 from the spectral derivative of the sampled eta0.
double gauge_residual(const RadialGrid& g, const EulerianData& data, const GaugeMap& gauge,
                      const Weight& w, double kappa);

} // namespace vstar
