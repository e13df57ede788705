#include "vstar/config.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "vstar/errors.hpp"
#include "vstar/gauge.hpp"

namespace vstar {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    std::size_t b = s.find_last_not_of(" \t\r");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

std::string strip_comment(const std::string& s) {
    bool in_str = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') in_str = !in_str;
        if (s[i] == '#' && !in_str) return s.substr(0, i);
    }
    return s;
}

[[noreturn]] void fail(const std::string& origin, int line, const std::string& what) {
    throw std::invalid_argument(origin + ":" + std::to_string(line) + ": " + what);
}

} // namespace

Toml Toml::parse_string(const std::string& text, const std::string& origin) {
    Toml out;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail(origin, lineno, "unterminated table header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) fail(origin, lineno, "empty table name");
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) fail(origin, lineno, "expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty() || val.empty()) fail(origin, lineno, "empty key or value");
        const std::string dotted = section.empty() ? key : section + "." + key;

        if (val.front() == '"') {
            if (val.size() < 2 || val.back() != '"')
                fail(origin, lineno, "unterminated string");
            out.values_[dotted] = val.substr(1, val.size() - 2);
        } else if (val == "true" || val == "false") {
            out.values_[dotted] = (val == "true");
        } else if (val.front() == '[') {
            if (val.back() != ']') fail(origin, lineno, "unterminated array");
            std::vector<double> arr;
            std::string body = val.substr(1, val.size() - 2);
            std::istringstream bs(body);
            std::string item;
            while (std::getline(bs, item, ',')) {
                item = trim(item);
                if (item.empty()) continue;
                try {
                    std::size_t used = 0;
                    arr.push_back(std::stod(item, &used));
                    if (used != item.size()) throw std::invalid_argument(item);
                } catch (...) {
                    fail(origin, lineno, "bad array element '" + item + "'");
                }
            }
            out.values_[dotted] = std::move(arr);
        } else {
            try {
                std::size_t used = 0;
                const double x = std::stod(val, &used);
                if (used != val.size()) throw std::invalid_argument(val);
                out.values_[dotted] = x;
            } catch (...) {
                fail(origin, lineno, "bad value '" + val + "'");
            }
        }
    }
    return out;
}

Toml Toml::parse_file(const std::string& filename) {
    std::ifstream in(filename);
    if (!in) throw std::invalid_argument("cannot open config file " + filename);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str(), filename);
}

bool Toml::has(const std::string& k) const { return values_.count(k) > 0; }

double Toml::number(const std::string& k, std::optional<double> fb) const {
    const auto it = values_.find(k);
    if (it == values_.end()) {
        if (fb) return *fb;
        throw std::invalid_argument("missing config key: " + k);
    }
    if (const double* d = std::get_if<double>(&it->second)) return *d;
    throw std::invalid_argument("config key " + k + " is not a number");
}

bool Toml::boolean(const std::string& k, std::optional<bool> fb) const {
    const auto it = values_.find(k);
    if (it == values_.end()) {
        if (fb) return *fb;
        throw std::invalid_argument("missing config key: " + k);
    }
    if (const bool* b = std::get_if<bool>(&it->second)) return *b;
    throw std::invalid_argument("config key " + k + " is not a boolean");
}

std::string Toml::str(const std::string& k, std::optional<std::string> fb) const {
    const auto it = values_.find(k);
    if (it == values_.end()) {
        if (fb) return *fb;
        throw std::invalid_argument("missing config key: " + k);
    }
    if (const std::string* s = std::get_if<std::string>(&it->second)) return *s;
    throw std::invalid_argument("config key " + k + " is not a string");
}

std::vector<double> Toml::array(const std::string& k,
                                std::optional<std::vector<double>> fb) const {
    const auto it = values_.find(k);
    if (it == values_.end()) {
        if (fb) return *fb;
        throw std::invalid_argument("missing config key: " + k);
    }
    if (const auto* a = std::get_if<std::vector<double>>(&it->second)) return *a;
    if (const double* d = std::get_if<double>(&it->second)) return {*d};
    throw std::invalid_argument("config key " + k + " is not an array");
}

std::vector<std::string> Toml::keys_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_)
        if (k.rfind(prefix, 0) == 0) out.push_back(k);
    return out;
}

RunConfig RunConfig::from_toml(const Toml& t) {
    RunConfig cfg;
    // kappa, delta, lambda1 are the required physics inputs
    cfg.params.kappa = t.number("params.kappa");
    cfg.params.delta = t.number("params.delta");
    cfg.params.lambda1 = t.number("params.lambda1");
    cfg.params.lambda0 = t.number("params.lambda0", 1.0);
    cfg.params.n_grid = static_cast<int>(t.number("params.n_grid", 64));
    cfg.params.tau_max = t.number("params.tau_max", 10.0);
    cfg.params.dt_tau = t.number("params.dt_tau", 0.0);
    cfg.params.n_diag = static_cast<int>(t.number("params.n_diag", 2));
    cfg.params.weight_kind = weight_kind_from_string(t.str("params.weight_kind", "poly2"));

    cfg.params.tol.solve_tol = t.number("tolerances.solve_tol", 1e-10);
    cfg.params.tol.parity_tol = t.number("tolerances.parity_tol", 1e-9);
    cfg.params.tol.mass_tol = t.number("tolerances.mass_tol", 1e-8);
    cfg.params.tol.gbar_floor = t.number("tolerances.gbar_floor", 1e-3);
    cfg.params.tol.a_floor_frac = t.number("tolerances.a_floor_frac", 0.5);
    cfg.params.tol.interp_tol = t.number("tolerances.interp_tol", 1e-8);
    cfg.params.tol.decomp_tol = t.number("tolerances.decomp_tol", 1e-6);

    const std::string src = t.str("initial_data.source", "reference");
    if (src == "reference") cfg.source = DataSource::reference;
    else if (src == "file") cfg.source = DataSource::file;
    else if (src == "inline") cfg.source = DataSource::inline_poly;
    else throw std::invalid_argument("initial_data.source must be reference|file|inline");
    cfg.data_file = t.str("initial_data.file", "");
    cfg.theta0_coeffs = t.array("initial_data.theta0_coeffs", std::vector<double>{});
    cfg.u0_coeffs = t.array("initial_data.u0_coeffs", std::vector<double>{});
    if (cfg.source == DataSource::file && cfg.data_file.empty())
        throw std::invalid_argument("initial_data.file required for source = \"file\"");

    cfg.out_dir = t.str("output.dir", "out");
    cfg.cadence = static_cast<int>(t.number("output.cadence", 10));
    cfg.checkpoint_every = static_cast<int>(t.number("output.checkpoint_every", 0));
    if (cfg.cadence < 1) throw std::invalid_argument("output.cadence must be >= 1");

    cfg.classical_limit = t.boolean("switches.classical_limit", false);
    cfg.filter_on = t.boolean("switches.filter_on", false);
    cfg.stop_on_bootstrap = t.boolean("switches.stop_on_bootstrap", false);
    cfg.check_back_substitution = t.boolean("switches.check_back_substitution", true);

    cfg.seed = static_cast<unsigned long long>(t.number("run.seed", 20240901.0));
    cfg.bootstrap_M_star = t.number("bootstrap.M_star", 100.0);
    cfg.bootstrap_epsilon = t.number("bootstrap.epsilon", 0.0);

    cfg.sweep_kappa = t.array("sweep.kappa", std::vector<double>{});
    cfg.sweep_delta = t.array("sweep.delta", std::vector<double>{});
    cfg.sweep_lambda1 = t.array("sweep.lambda1", std::vector<double>{});
    cfg.sweep_amplitude = t.array("sweep.amplitude", std::vector<double>{});
    cfg.threads = static_cast<int>(t.number("sweep.threads", 1));

    cfg.params.validate();
    return cfg;
}

RunConfig RunConfig::from_file(const std::string& filename) {
    return from_toml(Toml::parse_file(filename));
}

InitialState make_initial_state(const RadialGrid& g, const RunConfig& cfg) {
    const Weight w = make_weight(cfg.params.weight_kind, cfg.params.delta);
    if (cfg.source == DataSource::inline_poly) {
        InitialState st;
        st.theta0.parity = st.dtheta0.parity = Parity::odd;
        st.theta0.v.assign(g.size(), 0.0);
        st.dtheta0.v.assign(g.size(), 0.0);
        for (int k = 0; k < g.size(); ++k) {
            const double z = g.node(k);
            double zp = z;
            for (std::size_t j = 0; j < cfg.theta0_coeffs.size(); ++j) {
                st.theta0.v[k] += cfg.theta0_coeffs[j] * zp;
                zp *= z * z;
            }
            zp = z;
            for (std::size_t j = 0; j < cfg.u0_coeffs.size(); ++j) {
                st.dtheta0.v[k] += cfg.u0_coeffs[j] * zp;
                zp *= z * z;
            }
        }
        return st;
    }
    const EulerianData data =
        (cfg.source == DataSource::file)
            ? load_data_csv(cfg.data_file)
            : reference_data(w, cfg.params.kappa, cfg.params.lambda0, cfg.params.lambda1);
    const MassFunction m = mass_function(data);
    const MassFunction mr = reference_mass_function(w, cfg.params.kappa);
    const GaugeMap gm = solve_eta0(g, m, mr, cfg.params.kappa, cfg.params.tol.mass_tol);
    return build_initial_state(g, data, cfg.params, gm);
}

} // namespace vstar
