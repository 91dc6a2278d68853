#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "nvpoly/interp.hpp"
#include "nvpoly/momentum_integrals.hpp"
#include "nvpoly/quadrature.hpp"

namespace nvpoly {

/// Step-controller and regularization settings for the scaled field ODE.
struct SolverConfig {
    double epsilon = 1e-5;  // center cutoff where (a, 0) data are imposed
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    double r_max = 1e4;
    long max_steps = 4000000;
    bool use_mu_table = true;
    int mu_table_nodes = 2000;
    bool taylor_start = false;   // start from the second-order center expansion
    double overshoot = 2.0;      // integrate numerically to overshoot * r0
    QuadratureConfig quadrature;

    void validate() const {
        if (!(epsilon > 0.0)) throw std::invalid_argument("SolverConfig: epsilon <= 0");
        if (!(rel_tol > 0.0) || !(abs_tol > 0.0))
            throw std::invalid_argument("SolverConfig: tolerances must be positive");
        if (!(r_max > epsilon)) throw std::invalid_argument("SolverConfig: r_max <= epsilon");
        if (!(overshoot >= 1.0)) throw std::invalid_argument("SolverConfig: overshoot < 1");
    }
};

/// Numerical solution of (r^2 psi')' = r^2 e^{2 psi} mu(psi) from the
/// regularized center, with the zero crossing (r0, psi'(r0)) and the vacuum
/// exterior attached analytically beyond the numeric range. The nodes carry
/// psi, psi' and the flux v = r^2 psi' plus enough derivative data for cubic
/// Hermite dense evaluation; mflux accumulates int_0^r s^2 rho(psi) ds for the
/// flux route to the scaled mass.
struct ScaledProfile {
    double k = 1.0;
    double a = -1.0; // shooting parameter psi(epsilon)

    std::vector<double> r_nodes;
    std::vector<double> psi;
    std::vector<double> dpsi;
    std::vector<double> v;      // r^2 psi'
    std::vector<double> dv;     // (r^2 psi')' = r^2 e^{2 psi} mu(psi)
    std::vector<double> mflux;  // int_0^r s^2 rho(psi) ds
    std::vector<double> dmflux; // r^2 rho(psi)
    std::size_t n_numeric = 0;  // nodes beyond this index are analytic vacuum samples

    std::optional<double> r0;
    double dpsi_at_r0 = 0.0;
    double v_inf = 0.0; // limiting r^2 psi' on the vacuum exterior

    bool crossed() const { return r0.has_value(); }

    double r_numeric_end() const { return r_nodes[n_numeric - 1]; }

    // psi extended by the exact vacuum solution beyond the numeric range
    double psi_at(double r) const {
        if (r >= r_numeric_end()) {
            const std::size_t e = n_numeric - 1;
            return psi[e] + v[e] * (1.0 / r_nodes[e] - 1.0 / r);
        }
        if (r <= r_nodes.front()) return psi.front();
        const std::size_t i = segment(r);
        return hermite(r, r_nodes[i], r_nodes[i + 1], psi[i], psi[i + 1], dpsi[i],
                       dpsi[i + 1]);
    }

    double dpsi_at(double r) const { return v_at(r) / (r * r); }

    double v_at(double r) const {
        if (r >= r_numeric_end()) return v[n_numeric - 1];
        if (r <= r_nodes.front()) return v.front();
        const std::size_t i = segment(r);
        return hermite(r, r_nodes[i], r_nodes[i + 1], v[i], v[i + 1], dv[i], dv[i + 1]);
    }

    double mflux_at(double r) const {
        if (r >= r_numeric_end()) return mflux[n_numeric - 1];
        if (r <= r_nodes.front()) return mflux.front();
        const std::size_t i = segment(r);
        return hermite(r, r_nodes[i], r_nodes[i + 1], mflux[i], mflux[i + 1], dmflux[i],
                       dmflux[i + 1]);
    }

    double psi_infinity() const {
        const std::size_t e = n_numeric - 1;
        return psi[e] + v[e] / r_nodes[e];
    }

private:
    std::size_t segment(double r) const {
        std::span<const double> rn(r_nodes.data(), n_numeric);
        return locate(rn, r);
    }
};

namespace detail {

// Dormand-Prince 5(4) tableau.
struct Dopri5 {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                            a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
};

} // namespace detail

/// Integrates the scaled field equation as the first-order system
/// (u, v, w) = (psi, r^2 psi', int s^2 rho) with an adaptive embedded
/// Dormand-Prince 5(4) pair; the crossing (psi = 0) is located on the cubic
/// Hermite dense output and integration continues into the vacuum region
/// before the analytic exterior is attached.
inline ScaledProfile integrate_scaled(double a, double k, const SolverConfig& cfg = {},
                                      const MuTable* shared_table = nullptr) {
    cfg.validate();
    if (!(a < 0.0))
        throw std::invalid_argument("integrate_scaled: shooting parameter must be < 0");
    if (!(k > 0.0 && k < 2.0)) throw std::invalid_argument("integrate_scaled: k not in (0,2)");

    MuTable local_table;
    const MuTable* table = shared_table;
    if (cfg.use_mu_table && table == nullptr) {
        local_table = MuTable(k, a - 1.0, cfg.mu_table_nodes, cfg.quadrature);
        table = &local_table;
    }
    auto mu = [&](double u) -> double {
        if (u >= 0.0) return 0.0;
        return table ? table->mu(u) : mu_scaled(u, k, cfg.quadrature);
    };
    auto rho = [&](double u) -> double {
        if (u >= 0.0) return 0.0;
        return table ? table->rho(u) : rho_scaled(u, k, cfg.quadrature);
    };

    using Y = std::array<double, 3>;
    auto rhs = [&](double r, const Y& y, Y& dy) {
        dy[0] = y[1] / (r * r);
        dy[1] = (y[0] >= 0.0) ? 0.0 : r * r * std::exp(2.0 * y[0]) * mu(y[0]);
        dy[2] = r * r * rho(y[0]);
    };

    ScaledProfile out;
    out.k = k;
    out.a = a;

    double r = cfg.epsilon;
    Y y{a, 0.0, 0.0};
    if (cfg.taylor_start) {
        const double S = std::exp(2.0 * a) * mu(a);
        y[0] = a + S * cfg.epsilon * cfg.epsilon / 6.0;
        y[1] = S * cfg.epsilon * cfg.epsilon * cfg.epsilon / 3.0;
    }
    Y dy;
    rhs(r, y, dy);

    auto push_node = [&](double rr, const Y& yy, const Y& dyy) {
        out.r_nodes.push_back(rr);
        out.psi.push_back(yy[0]);
        out.v.push_back(yy[1]);
        out.dpsi.push_back(yy[1] / (rr * rr));
        out.dv.push_back(dyy[1]);
        out.mflux.push_back(yy[2]);
        out.dmflux.push_back(dyy[2]);
    };
    push_node(r, y, dy);

    // one step of the embedded pair from (rs, ys) over hs; k1 = f(rs, ys)
    // comes in, the FSAL stage and the error-quadrature stages come out
    auto pair_step = [&](double rs, const Y& ys, const Y& k1, double hs, Y& yn,
                         Y& k7) -> double {
        using D = detail::Dopri5;
        Y k2, k3, k4, k5, k6, yt;
        for (int i = 0; i < 3; ++i) yt[i] = ys[i] + hs * D::a21 * k1[i];
        rhs(rs + D::c2 * hs, yt, k2);
        for (int i = 0; i < 3; ++i) yt[i] = ys[i] + hs * (D::a31 * k1[i] + D::a32 * k2[i]);
        rhs(rs + D::c3 * hs, yt, k3);
        for (int i = 0; i < 3; ++i)
            yt[i] = ys[i] + hs * (D::a41 * k1[i] + D::a42 * k2[i] + D::a43 * k3[i]);
        rhs(rs + D::c4 * hs, yt, k4);
        for (int i = 0; i < 3; ++i)
            yt[i] = ys[i] + hs * (D::a51 * k1[i] + D::a52 * k2[i] + D::a53 * k3[i] +
                                  D::a54 * k4[i]);
        rhs(rs + D::c5 * hs, yt, k5);
        for (int i = 0; i < 3; ++i)
            yt[i] = ys[i] + hs * (D::a61 * k1[i] + D::a62 * k2[i] + D::a63 * k3[i] +
                                  D::a64 * k4[i] + D::a65 * k5[i]);
        rhs(rs + hs, yt, k6);
        for (int i = 0; i < 3; ++i)
            yn[i] = ys[i] + hs * (D::b1 * k1[i] + D::b3 * k3[i] + D::b4 * k4[i] +
                                  D::b5 * k5[i] + D::b6 * k6[i]);
        rhs(rs + hs, yn, k7);
        double err = 0.0;
        for (int i = 0; i < 3; ++i) {
            const double ei = hs * (D::e1 * k1[i] + D::e3 * k3[i] + D::e4 * k4[i] +
                                    D::e5 * k5[i] + D::e6 * k6[i] + D::e7 * k7[i]);
            const double sc =
                cfg.abs_tol + cfg.rel_tol * std::max(std::abs(ys[i]), std::abs(yn[i]));
            err += (ei / sc) * (ei / sc);
        }
        return std::sqrt(err / 3.0);
    };

    auto single_step = [&](double rs, const Y& ys, double hs) -> Y {
        Y k1, yn, k7;
        rhs(rs, ys, k1);
        pair_step(rs, ys, k1, hs, yn, k7);
        return yn;
    };

    double h = cfg.epsilon * 1e-2;
    double r_stop = cfg.r_max;
    long steps = 0;

    while (r < r_stop) {
        if (++steps > cfg.max_steps)
            throw std::runtime_error("integrate_scaled: step limit exceeded");
        if (r_stop - r <= r * 1e-14) break; // horizon reached within resolution
        if (r + h > r_stop) h = r_stop - r;
        if (!(h > r * 1e-14))
            throw std::runtime_error("integrate_scaled: step controller failure");

        Y ynew, k7;
        const double err = pair_step(r, y, dy, h, ynew, k7);

        if (err <= 1.0) {
            const double r_prev = r;
            const Y y_prev = y;
            const Y dy_prev = dy;
            r += h;
            y = ynew;
            dy = k7;
            push_node(r, y, dy);

            if (!out.r0 && y_prev[0] < 0.0 && y[0] >= 0.0) {
                // bracket the crossing on the dense output of this step
                auto uval = [&](double rr) {
                    return hermite(rr, r_prev, r, y_prev[0], y[0], dy_prev[0], dy[0]);
                };
                double lo = r_prev, hi = r;
                for (int it = 0; it < 200 && (hi - lo) > 1e-13 * hi; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    (uval(mid) < 0.0 ? lo : hi) = mid;
                }
                // polish by re-stepping the interval, Newton on the true state
                double rc = 0.5 * (lo + hi);
                Y yc{};
                for (int it = 0; it < 8; ++it) {
                    yc = single_step(r_prev, y_prev, rc - r_prev);
                    const double du = yc[1] / (rc * rc);
                    if (!(du != 0.0)) break;
                    const double corr = yc[0] / du;
                    const double next = std::clamp(rc - corr, r_prev, r);
                    if (std::abs(next - rc) < 1e-15 * rc) {
                        rc = next;
                        break;
                    }
                    rc = next;
                }
                yc = single_step(r_prev, y_prev, rc - r_prev);
                out.r0 = rc;
                out.dpsi_at_r0 = yc[1] / (rc * rc);
                r_stop = std::min(cfg.r_max, cfg.overshoot * rc);
            }
        }
        const double fac = std::clamp(0.9 * std::pow(std::max(err, 1e-30), -0.2), 0.2, 5.0);
        h *= fac;
    }

    out.n_numeric = out.r_nodes.size();
    out.v_inf = out.crossed() ? out.v.back() : 0.0;

    if (out.crossed()) {
        // analytic vacuum samples out to 50 r0 for storage and plots
        const double re = out.r_numeric_end();
        const double pe = out.psi[out.n_numeric - 1];
        const double ve = out.v[out.n_numeric - 1];
        const double r_far = 50.0 * *out.r0;
        if (r_far > re) {
            const int n_tail = 32;
            for (int i = 1; i <= n_tail; ++i) {
                const double rr = re * std::pow(r_far / re, double(i) / n_tail);
                out.r_nodes.push_back(rr);
                out.psi.push_back(pe + ve * (1.0 / re - 1.0 / rr));
                out.v.push_back(ve);
                out.dpsi.push_back(ve / (rr * rr));
                out.dv.push_back(0.0);
                out.mflux.push_back(out.mflux[out.n_numeric - 1]);
                out.dmflux.push_back(0.0);
            }
        }
    }
    return out;
}

/// Root of psi on the stored dense output, polished on the Hermite
/// interpolant until |psi| <= 1e-12.
inline std::pair<double, double> detect_crossing(const ScaledProfile& p) {
    std::size_t hit = 0;
    bool found = false;
    for (std::size_t i = 0; i + 1 < p.n_numeric; ++i) {
        if (p.psi[i] < 0.0 && p.psi[i + 1] >= 0.0) {
            hit = i;
            found = true;
            break;
        }
    }
    if (!found) throw std::runtime_error("detect_crossing: no sign change in stored range");
    double lo = p.r_nodes[hit], hi = p.r_nodes[hit + 1];
    for (int it = 0; it < 200 && (hi - lo) > 1e-14 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (p.psi_at(mid) < 0.0 ? lo : hi) = mid;
    }
    double rc = 0.5 * (lo + hi);
    // final secant polish on the interpolant
    for (int it = 0; it < 8 && std::abs(p.psi_at(rc)) > 1e-13; ++it) {
        const double d = p.dpsi_at(rc);
        if (d == 0.0) break;
        rc -= p.psi_at(rc) / d;
        rc = std::clamp(rc, lo, hi);
    }
    return {rc, p.dpsi_at(rc)};
}

enum class Regime { Crossing, Ordered, Indeterminate };

/// Crossing/ordered diagnosis of a shooting-parameter pair a1 < a2 < 0 from
/// the ordering of the zero radii and exit slopes. The crossing pattern
/// (r0 increasing, exit slope decreasing along a) is the one compatible with
/// the matching conditions, which force psi'(r0) to decrease in r0.
struct RegimeReport {
    Regime regime = Regime::Indeterminate;
    double r0_1 = 0.0, slope_1 = 0.0;
    double r0_2 = 0.0, slope_2 = 0.0;
};

inline RegimeReport classify_regime(double k, double a1, double a2,
                                    const SolverConfig& cfg = {},
                                    const MuTable* table = nullptr) {
    if (a1 == a2) throw std::invalid_argument("classify_regime: degenerate pair");
    if (!(a1 < a2 && a2 < 0.0))
        throw std::invalid_argument("classify_regime: need a1 < a2 < 0");
    MuTable local;
    if (cfg.use_mu_table && table == nullptr) {
        local = MuTable(k, a1 - 1.0, cfg.mu_table_nodes, cfg.quadrature);
        table = &local;
    }
    const ScaledProfile p1 = integrate_scaled(a1, k, cfg, table);
    const ScaledProfile p2 = integrate_scaled(a2, k, cfg, table);
    if (!p1.crossed() || !p2.crossed())
        throw std::runtime_error("classify_regime: crossing not reached before r_max");
    RegimeReport rep;
    rep.r0_1 = *p1.r0;
    rep.slope_1 = p1.dpsi_at_r0;
    rep.r0_2 = *p2.r0;
    rep.slope_2 = p2.dpsi_at_r0;
    if (rep.r0_1 < rep.r0_2 && rep.slope_1 > rep.slope_2)
        rep.regime = Regime::Crossing;
    else if (rep.r0_2 < rep.r0_1 && rep.slope_2 < rep.slope_1)
        rep.regime = Regime::Ordered;
    return rep;
}

/// Bisection on the regime classifier over [a_lo, a_hi] (a_lo < a_hi < 0)
/// down to width 1e-4; returns the boundary shooting parameter.
inline double find_threshold(double k, double a_lo, double a_hi,
                             const SolverConfig& cfg = {}, double pair_delta = 1e-3,
                             double width = 1e-4) {
    if (!(a_lo < a_hi && a_hi < -2.0 * pair_delta))
        throw std::invalid_argument("find_threshold: bad interval");
    MuTable table(k, a_lo - 1.0, cfg.mu_table_nodes, cfg.quadrature);
    auto regime_at = [&](double a) {
        const RegimeReport rep = classify_regime(k, a, a + pair_delta, cfg, &table);
        if (rep.regime == Regime::Indeterminate)
            throw std::runtime_error("find_threshold: indeterminate regime in bisection");
        return rep.regime;
    };
    const Regime lo_side = regime_at(a_lo);
    const Regime hi_side = regime_at(a_hi);
    if (lo_side == hi_side)
        throw std::invalid_argument("find_threshold: same regime at both endpoints");
    double lo = a_lo, hi = a_hi;
    while (hi - lo > width) {
        const double mid = 0.5 * (lo + hi);
        (regime_at(mid) == lo_side ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace nvpoly
