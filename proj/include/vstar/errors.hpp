#pragma once

#include <stdexcept>
#include <string>

namespace vstar {

// Reasons a simulation can stop before tau_max. Each maps to a distinct
// process exit code in the CLI driver.
enum class TerminationCause {
    none = 0,
    causality,            // |d_tau Theta + lambda_bar_tau*(Theta+zeta)| >= 1 somewhere
    corrector_positivity, // kappa*Gbar dropped below its positivity floor
    diffeomorphism_loss,  // F = (eta/zeta)^2 d_zeta eta <= 0 somewhere
    resolution,           // requested derivative order beyond what the grid supports
    instability,          // NaN/overflow or back-substitution residual blow-up
    gauge_incompatibility // total mass of the data does not match the reference mass
};

const char* to_string(TerminationCause c);
int exit_code(TerminationCause c);

// Error thrown by the numerical core. Carries the termination cause, a
// human-readable message, and (when meaningful) the tau-stamp and grid
// location of the first offending node.
class SimError : public std::runtime_error {
public:
    SimError(TerminationCause cause, std::string msg, double tau = -1.0, double zeta = -1.0)
        : std::runtime_error(std::move(msg)), cause_(cause), tau_(tau), zeta_(zeta) {}

    TerminationCause cause() const { return cause_; }
    double tau() const { return tau_; }
    double zeta() const { return zeta_; }

private:
    TerminationCause cause_;
    double tau_;
    double zeta_;
};

} // namespace vstar
