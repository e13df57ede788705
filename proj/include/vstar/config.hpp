#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "vstar/dynamics.hpp"
#include "vstar/scaling.hpp"

namespace vstar {

// Minimal TOML reader covering the subset used by the run configs:
// [tables], key = value with strings, numbers, booleans, and flat arrays of
// numbers. Comments start with '#'. Parse errors carry the line number.
class Toml {
public:
    using Value = std::variant<double, bool, std::string, std::vector<double>>;

    static Toml parse_file(const std::string& filename);
    static Toml parse_string(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& dotted) const;
    double number(const std::string& dotted, std::optional<double> fallback = {}) const;
    bool boolean(const std::string& dotted, std::optional<bool> fallback = {}) const;
    std::string str(const std::string& dotted, std::optional<std::string> fallback = {}) const;
    std::vector<double> array(const std::string& dotted,
                              std::optional<std::vector<double>> fallback = {}) const;
    std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

private:
    std::map<std::string, Value> values_;
};

// How the run gets its initial data.
enum class DataSource { reference, file, inline_poly };

struct RunConfig {
    SimParams params;
    DataSource source = DataSource::reference;
    std::string data_file;
    // inline data: Theta0 = sum_k c_k zeta^{2k+1}, same for the velocity
    std::vector<double> theta0_coeffs;
    std::vector<double> u0_coeffs;
    std::string out_dir = "out";
    int cadence = 10;
    int checkpoint_every = 0; // 0 = final checkpoint only
    bool classical_limit = false;
    bool filter_on = false;
    bool stop_on_bootstrap = false;
    bool check_back_substitution = true;
    unsigned long long seed = 20240901ull;
    double bootstrap_M_star = 100.0;
    double bootstrap_epsilon = 0.0; // 0 = max(E^{n_diag}(0), delta)
    // sweep axes (empty = inherit the scalar value)
    std::vector<double> sweep_kappa, sweep_delta, sweep_lambda1, sweep_amplitude;
    int threads = 1;

    static RunConfig from_toml(const Toml& t);
    static RunConfig from_file(const std::string& filename);
};

// Builds (Theta0, dTheta0) from the configured source; reference and file
// sources run through the gauge map, inline coefficients bypass it.
InitialState make_initial_state(const RadialGrid& g, const RunConfig& cfg);

} // namespace vstar
