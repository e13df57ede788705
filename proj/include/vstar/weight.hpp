#pragma once

#include <string>
#include <vector>

namespace vstar {

// Admissible weight function w on [0,1]:
//   (1) w > 0 on [0,1), w(1) = 0            (no interior vacuum)
//   (2) -inf < w'(1) < 0                    (physical vacuum boundary, w ~ 1-zeta near 1)
//   (3) all odd derivatives vanish at 0     (even extension is smooth)
// The enthalpy-scale family is w_delta = delta * w.
enum class WeightKind {
    poly2, // w = 1 - zeta^2
    poly4  // w = (1 - zeta^2)(1 + zeta^2/2)
};

WeightKind weight_kind_from_string(const std::string& s);
const char* to_string(WeightKind k);

struct Weight {
    WeightKind kind = WeightKind::poly2;
    double delta_scale = 0.0; // delta in w_delta = delta*w

    double w(double zeta) const;
    double dw(double zeta) const;   // w'
    double ddw(double zeta) const;  // w''
    double w_delta(double zeta) const { return delta_scale * w(zeta); }

    // w^p evaluated pointwise from the closure (w >= 0 guaranteed by kind).
    double w_pow(double zeta, double p) const;
};

Weight make_weight(WeightKind kind, double delta);

// Checks the three admissibility conditions on a validation grid, including
// finite-difference probes of the odd derivatives at the origin.
// Returns an empty vector when all checks pass, otherwise messages.
std::vector<std::string> check_admissible(const Weight& w, int n_probe = 256);

} // namespace vstar
