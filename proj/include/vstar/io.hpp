#pragma once

#include <string>

#include "vstar/config.hpp"
#include "vstar/diagnostics.hpp"
#include "vstar/dynamics.hpp"

namespace vstar {

// Self-describing JSON checkpoint: parameters, evolved state, and the frozen
// tau = 0 snapshot. Doubles round-trip bit-exactly, so resumed runs reproduce
// uninterrupted ones sample for sample.
struct Checkpoint {
    int format_version = 1;
    SimParams params;
    EvolveState state;
    InitialSnapshot snapshot;
    long long step_index = 0;
};

void save_checkpoint(const std::string& filename, const Checkpoint& cp);
Checkpoint load_checkpoint(const std::string& filename);

void write_trajectory_csv(const std::string& filename, const Trajectory& traj);
void write_energy_csv(const std::string& filename, const std::vector<EnergyReport>& reports,
                      int n_diag);
void write_field_csv(const std::string& filename, const RadialGrid& g, const RadialField& f);

struct RunSummary {
    TerminationCause cause = TerminationCause::none;
    std::string cause_detail;
    double tau_end = 0.0;
    double t_end = 0.0;
    double bar_lambda_fit = 0.0;
    double expansion_slope = 0.0;
    double theta_end_at_1 = 0.0;
    double max_EN = 0.0;
    double EN_initial = 0.0;
    double min_fg_margin = 0.0;
    double min_u0_margin = 0.0;
    double max_back_sub_residual = 0.0;
    long long n_steps = 0;
    double dt_tau = 0.0;
};

void write_summary_json(const std::string& filename, const RunSummary& s);

} // namespace vstar
