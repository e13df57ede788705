#include "vstar/weight.hpp"

#include <cmath>
#include <stdexcept>

namespace vstar {

WeightKind weight_kind_from_string(const std::string& s) {
    if (s == "poly2") return WeightKind::poly2;
    if (s == "poly4") return WeightKind::poly4;
    throw std::invalid_argument("unknown weight kind: " + s);
}

const char* to_string(WeightKind k) {
    switch (k) {
        case WeightKind::poly2: return "poly2";
        case WeightKind::poly4: return "poly4";
    }
    return "?";
}

double Weight::w(double z) const {
    const double z2 = z * z;
    switch (kind) {
        case WeightKind::poly2: return 1.0 - z2;
        case WeightKind::poly4: return (1.0 - z2) * (1.0 + 0.5 * z2);
    }
    return 0.0;
}

double Weight::dw(double z) const {
    const double z2 = z * z;
    switch (kind) {
        case WeightKind::poly2: return -2.0 * z;
        case WeightKind::poly4: return -z - 2.0 * z * z2; // d/dz (1 - z^2/2 - z^4/2)
    }
    return 0.0;
}

double Weight::ddw(double z) const {
    switch (kind) {
        case WeightKind::poly2: return -2.0;
        case WeightKind::poly4: return -1.0 - 6.0 * z * z;
    }
    return 0.0;
}

double Weight::w_pow(double z, double p) const {
    const double wz = w(z);
    if (wz <= 0.0) return (p > 0.0) ? 0.0 : (p == 0.0 ? 1.0 : HUGE_VAL);
    return std::pow(wz, p);
}

Weight make_weight(WeightKind kind, double delta) {
    if (delta < 0.0) throw std::invalid_argument("make_weight: delta must be >= 0");
    Weight w;
    w.kind = kind;
    w.delta_scale = delta;
    return w;
}

std::vector<std::string> check_admissible(const Weight& w, int n_probe) {
    std::vector<std::string> problems;
    for (int k = 0; k < n_probe; ++k) {
        const double z = static_cast<double>(k) / n_probe;
        if (!(w.w(z) > 0.0)) {
            problems.push_back("w not positive at zeta = " + std::to_string(z));
            break;
        }
    }
    if (std::abs(w.w(1.0)) > 1e-14) problems.push_back("w(1) != 0");
    const double dw1 = w.dw(1.0);
    if (!(dw1 < 0.0) || !std::isfinite(dw1)) problems.push_back("w'(1) not in (-inf, 0)");
    // odd derivatives at the origin by central differences of the even extension
    const double h = 1e-3;
    const double d1 = (w.w(h) - w.w(h)) / (2 * h); // even extension: w(-h) = w(h)
    const double d3 =
        (w.w(2 * h) - 2 * w.w(h) + 2 * w.w(h) - w.w(2 * h)) / (2 * h * h * h);
    if (std::abs(d1) > 1e-10) problems.push_back("w'(0) != 0");
    if (std::abs(d3) > 1e-6) problems.push_back("w'''(0) != 0");
    if (std::abs(w.dw(0.0)) > 1e-14) problems.push_back("closed-form w'(0) != 0");
    return problems;
}

} // namespace vstar
