#include "vstar/io.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace vstar {

using nlohmann::json;

namespace {

json params_to_json(const SimParams& p) {
    return json{{"kappa", p.kappa},
                {"delta", p.delta},
                {"lambda0", p.lambda0},
                {"lambda1", p.lambda1},
                {"n_grid", p.n_grid},
                {"tau_max", p.tau_max},
                {"dt_tau", p.dt_tau},
                {"n_diag", p.n_diag},
                {"weight_kind", to_string(p.weight_kind)},
                {"tolerances",
                 {{"solve_tol", p.tol.solve_tol},
                  {"parity_tol", p.tol.parity_tol},
                  {"mass_tol", p.tol.mass_tol},
                  {"gbar_floor", p.tol.gbar_floor},
                  {"a_floor_frac", p.tol.a_floor_frac},
                  {"interp_tol", p.tol.interp_tol},
                  {"decomp_tol", p.tol.decomp_tol}}}};
}

SimParams params_from_json(const json& j) {
    SimParams p;
    p.kappa = j.at("kappa");
    p.delta = j.at("delta");
    p.lambda0 = j.at("lambda0");
    p.lambda1 = j.at("lambda1");
    p.n_grid = j.at("n_grid");
    p.tau_max = j.at("tau_max");
    p.dt_tau = j.at("dt_tau");
    p.n_diag = j.at("n_diag");
    p.weight_kind = weight_kind_from_string(j.at("weight_kind"));
    const json& t = j.at("tolerances");
    p.tol.solve_tol = t.at("solve_tol");
    p.tol.parity_tol = t.at("parity_tol");
    p.tol.mass_tol = t.at("mass_tol");
    p.tol.gbar_floor = t.at("gbar_floor");
    p.tol.a_floor_frac = t.at("a_floor_frac");
    p.tol.interp_tol = t.at("interp_tol");
    p.tol.decomp_tol = t.at("decomp_tol");
    return p;
}

} // namespace

void save_checkpoint(const std::string& filename, const Checkpoint& cp) {
    json j;
    j["format_version"] = cp.format_version;
    j["params"] = params_to_json(cp.params);
    j["step_index"] = cp.step_index;
    j["state"] = {{"tau", cp.state.tau},
                  {"theta", cp.state.theta},
                  {"dtheta", cp.state.dtheta},
                  {"gbar_ode", cp.state.gbar_ode},
                  {"lambda", cp.state.lambda},
                  {"lambda_bar_tau", cp.state.lambda_bar_tau},
                  {"t", cp.state.t},
                  {"s", cp.state.s}};
    j["snapshot"] = {{"U0_at_0", cp.snapshot.U0_at_0},
                     {"F_at_0", cp.snapshot.F_at_0},
                     {"C0", cp.snapshot.C0},
                     {"lambda_at_0", cp.snapshot.lambda_at_0}};
    std::ofstream out(filename);
    if (!out) throw std::runtime_error("cannot open checkpoint " + filename);
    out << j.dump(1) << "\n";
}

Checkpoint load_checkpoint(const std::string& filename) {
    std::ifstream in(filename);
    if (!in) throw std::runtime_error("cannot open checkpoint " + filename);
    json j;
    in >> j;
    Checkpoint cp;
    cp.format_version = j.at("format_version");
    if (cp.format_version != 1)
        throw std::runtime_error("unsupported checkpoint format version");
    cp.params = params_from_json(j.at("params"));
    cp.step_index = j.at("step_index");
    const json& s = j.at("state");
    cp.state.tau = s.at("tau");
    cp.state.theta = s.at("theta").get<std::vector<double>>();
    cp.state.dtheta = s.at("dtheta").get<std::vector<double>>();
    cp.state.gbar_ode = s.at("gbar_ode").get<std::vector<double>>();
    cp.state.lambda = s.at("lambda");
    cp.state.lambda_bar_tau = s.at("lambda_bar_tau");
    cp.state.t = s.at("t");
    cp.state.s = s.at("s");
    const json& sn = j.at("snapshot");
    cp.snapshot.U0_at_0 = sn.at("U0_at_0").get<std::vector<double>>();
    cp.snapshot.F_at_0 = sn.at("F_at_0").get<std::vector<double>>();
    cp.snapshot.C0 = sn.at("C0").get<std::vector<double>>();
    cp.snapshot.lambda_at_0 = sn.at("lambda_at_0");
    return cp;
}

void write_trajectory_csv(const std::string& filename, const Trajectory& traj) {
    std::FILE* f = std::fopen(filename.c_str(), "w");
    if (!f) throw std::runtime_error("cannot open " + filename);
    std::fprintf(f,
                 "tau,t,s,lambda,lambda_bar_tau,theta_at_1,dtheta_at_1,r_support,"
                 "parity_drift,back_sub_residual\n");
    for (const TrajectorySample& s : traj.samples) {
        const int nn = static_cast<int>(s.theta.v.size()) - 1;
        std::fprintf(f, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                     s.tau, s.t, s.s, s.lambda, s.lambda_bar_tau, s.theta.v[nn],
                     s.dtheta.v[nn], s.lambda * (1.0 + s.theta.v[nn]), s.parity_drift,
                     s.back_sub_residual);
    }
    std::fclose(f);
}

void write_energy_csv(const std::string& filename, const std::vector<EnergyReport>& reports,
                      int n_diag) {
    std::FILE* f = std::fopen(filename.c_str(), "w");
    if (!f) throw std::runtime_error("cannot open " + filename);
    std::fprintf(f, "tau");
    for (int i = 0; i <= n_diag; ++i) std::fprintf(f, ",calE_%d", i);
    for (int i = 0; i <= n_diag; ++i) std::fprintf(f, ",mfE_%d", i);
    for (int i = 0; i <= n_diag; ++i) std::fprintf(f, ",mfD_%d", i);
    std::fprintf(f, ",S_contribution,flag_EN,flag_U0,flag_FG,margin_EN,margin_U0,margin_FG");
    bool header_res = true;
    for (const EnergyReport& r : reports) {
        if (header_res) {
            for (const auto& [name, val] : r.identity_residuals)
                std::fprintf(f, ",res_%s", name.c_str());
            std::fprintf(f, "\n");
            header_res = false;
        }
        std::fprintf(f, "%.17g", r.tau);
        for (double e : r.calE) std::fprintf(f, ",%.17g", e);
        for (double e : r.mfE) std::fprintf(f, ",%.17g", e);
        for (double e : r.mfD) std::fprintf(f, ",%.17g", e);
        std::fprintf(f, ",%.17g,%d,%d,%d,%.17g,%.17g,%.17g", r.S_contribution,
                     r.flags.en_ok ? 1 : 0, r.flags.u0_ok ? 1 : 0, r.flags.fg_ok ? 1 : 0,
                     r.flags.en_margin, r.flags.u0_margin, r.flags.fg_margin);
        for (const auto& [name, val] : r.identity_residuals) std::fprintf(f, ",%.17g", val);
        std::fprintf(f, "\n");
    }
    if (header_res) std::fprintf(f, "\n");
    std::fclose(f);
}

void write_field_csv(const std::string& filename, const RadialGrid& g, const RadialField& fld) {
    std::FILE* f = std::fopen(filename.c_str(), "w");
    if (!f) throw std::runtime_error("cannot open " + filename);
    std::fprintf(f, "zeta,value\n");
    for (int k = 0; k < g.size(); ++k)
        std::fprintf(f, "%.17g,%.17g\n", g.node(k), fld.v[k]);
    std::fclose(f);
}

void write_summary_json(const std::string& filename, const RunSummary& s) {
    json j{{"termination_cause", to_string(s.cause)},
           {"cause_detail", s.cause_detail},
           {"tau_end", s.tau_end},
           {"t_end", s.t_end},
           {"bar_lambda_fit", s.bar_lambda_fit},
           {"expansion_slope", s.expansion_slope},
           {"theta_end_at_1", s.theta_end_at_1},
           {"max_EN", s.max_EN},
           {"EN_initial", s.EN_initial},
           {"min_fg_margin", s.min_fg_margin},
           {"min_u0_margin", s.min_u0_margin},
           {"max_back_sub_residual", s.max_back_sub_residual},
           {"n_steps", s.n_steps},
           {"dt_tau", s.dt_tau}};
    std::ofstream out(filename);
    if (!out) throw std::runtime_error("cannot open " + filename);
    out << j.dump(1) << "\n";
}

} // namespace vstar
