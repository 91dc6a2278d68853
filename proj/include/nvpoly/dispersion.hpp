#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "nvpoly/functionals.hpp"
#include "nvpoly/state.hpp"

namespace nvpoly {

/// Coefficients of the conformal energy along free transport. With phi = 0
/// and f(t,x,p) = f0(x - p_hat t, p), the conformal energy is exactly the
/// quadratic E_C(t) = c0 + c1 t + c2 t^2; that identity is the evaluation
/// contract of this module.
struct ConformalCoefficients {
    double c0 = 0.0; // E_C(0) = int |x|^2 sqrt(1+p^2) f0
    double c1 = 0.0; // 2 int x.p f0 (supplied correlation moment, 2 Q0)
    double c2 = 0.0; // int |p|^2/sqrt(1+|p|^2) f0
    double h = 0.0;  // total energy at phi = 0
    double m = 0.0;  // rest mass
};

/// Coefficients of a gridded isotropic f0 evaluated at phi = 0. Tensor
/// states f(|x|,|p|) have no x.p correlation of their own; a boosted or
/// shifted family supplies it through xp_moment = int x.p f0.
inline ConformalCoefficients conformal_coefficients(const PhaseSpaceState& s,
                                                    double xp_moment = 0.0) {
    s.validate();
    if (!std::isfinite(xp_moment))
        throw std::invalid_argument("conformal_coefficients: bad correlation moment");
    PhaseSpaceState flat = s;
    std::fill(flat.phi.begin(), flat.phi.end(), 0.0);
    std::fill(flat.phi_t.begin(), flat.phi_t.end(), 0.0);
    StateQuadrature sq(flat);
    ConformalCoefficients out;
    out.c1 = 2.0 * xp_moment;
    for (std::size_t i = 0; i < s.nr(); ++i) {
        const double r2 = s.r_grid[i] * s.r_grid[i];
        out.c0 += sq.wr[i] * r2 * sq.kin[i];
        out.c2 += sq.wr[i] * sq.vir[i];
        out.h += sq.wr[i] * sq.kin[i];
        out.m += sq.wr[i] * sq.rho[i];
    }
    return out;
}

struct DispersionRow {
    double t = 0.0;
    double ec = 0.0;              // E_C(t) on the free-transport family
    double bound_quadratic = 0.0; // (H - M) t^2
    double bound_linear = 0.0;    // 2 Q0 t, active only in the H = M case
    bool ok = true;
};

struct DispersionReport {
    ConformalCoefficients coeffs;
    std::vector<DispersionRow> rows;
    bool used_linear = false;      // H = M with positive Q0
    bool all_ok = true;
    double first_activation = 0.0; // earliest grid time from which the bound
                                   // holds onward (t0 is only existential);
                                   // NaN when it never does
};

/// Evaluates E_C(t) = c0 + c1 t + c2 t^2 on the grid of times and checks the
/// dispersion bounds: E_C >= (H-M) t^2 when H > M, and E_C >= 2 Q0 t in the
/// degenerate case H = M with Q0 > 0. Violations are reported, not thrown.
inline DispersionReport check_dispersion(const PhaseSpaceState& s,
                                         const std::vector<double>& t_grid,
                                         double xp_moment = 0.0) {
    DispersionReport rep;
    rep.coeffs = conformal_coefficients(s, xp_moment);
    const auto& c = rep.coeffs;
    const double scale = std::max({c.c0, c.c2, 1e-300});
    const bool degenerate = std::abs(c.h - c.m) <= 1e-12 * std::max(c.h, 1.0);
    rep.used_linear = degenerate && c.c1 > 0.0;
    for (double t : t_grid) {
        DispersionRow row;
        row.t = t;
        row.ec = c.c0 + c.c1 * t + c.c2 * t * t;
        row.bound_quadratic = (c.h - c.m) * t * t;
        row.bound_linear = rep.used_linear ? c.c1 * t : 0.0;
        const double slack = 1e-12 * std::max(1.0, scale * (1.0 + t * t));
        if (!degenerate && c.h > c.m)
            row.ok = row.ec >= row.bound_quadratic - slack;
        else if (rep.used_linear)
            row.ok = row.ec >= row.bound_linear - slack;
        rep.all_ok = rep.all_ok && row.ok;
        rep.rows.push_back(row);
    }
    rep.first_activation = std::nan("");
    for (std::size_t i = rep.rows.size(); i-- > 0;) {
        if (!rep.rows[i].ok) break;
        rep.first_activation = rep.rows[i].t;
    }
    return rep;
}

} // namespace nvpoly
