#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "nvpoly/functionals.hpp"
#include "nvpoly/momentum_integrals.hpp"
#include "nvpoly/radial_ode.hpp"

namespace nvpoly {

namespace detail {

// Cumulative integral of y over x with cubic Lagrange segments; entry i holds
// int_{x0}^{x_i}. Third-order nodes clamped at the ends.
inline std::vector<double> cumulative_integral(std::span<const double> x,
                                               std::span<const double> y) {
    const std::size_t n = x.size();
    std::vector<double> out(n, 0.0);
    if (n < 2) return out;
    if (n < 4) {
        for (std::size_t i = 0; i + 1 < n; ++i)
            out[i + 1] = out[i] + 0.5 * (x[i + 1] - x[i]) * (y[i] + y[i + 1]);
        return out;
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const std::size_t s = std::min(std::max<std::size_t>(i, 1) - 1, n - 4);
        const double xs[4] = {x[s], x[s + 1], x[s + 2], x[s + 3]};
        const double ys[4] = {y[s], y[s + 1], y[s + 2], y[s + 3]};
        // integrate the cubic through the four local nodes over [x_i, x_{i+1}]
        double seg = 0.0;
        for (int m = 0; m < 4; ++m) {
            // antiderivative of the Lagrange basis L_m on [x_i, x_{i+1}] by GL4
            static const double gx[4] = {-0.8611363115940526, -0.3399810435848563,
                                         0.3399810435848563, 0.8611363115940526};
            static const double gw[4] = {0.3478548451374538, 0.6521451548625461,
                                         0.6521451548625461, 0.3478548451374538};
            const double a = x[i], b = x[i + 1];
            double acc = 0.0;
            for (int g = 0; g < 4; ++g) {
                const double t = 0.5 * (a + b) + 0.5 * (b - a) * gx[g];
                double L = 1.0;
                for (int q = 0; q < 4; ++q)
                    if (q != m) L *= (t - xs[q]) / (xs[m] - xs[q]);
                acc += gw[g] * L;
            }
            seg += ys[m] * acc * 0.5 * (b - a);
        }
        out[i + 1] = out[i] + seg;
    }
    return out;
}

} // namespace detail

/// Physical steady state recovered from a scaled profile through the
/// scaling map psi~(r) = psi(b r) - ln E0, b = c^{k/2} / E0^{2+k/2}.
struct PhysicalProfile {
    PolytropeParams params;
    double b = 1.0;
    std::vector<double> r_nodes;
    std::vector<double> phi;
    double support_radius = 0.0;
    double mass = 0.0;
    double lq_norm = 0.0;   // ||f0||_{1+1/k}
    double e_kin = 0.0;
    double field_energy = 0.0; // 1/2 int |grad phi|^2 incl. exact exterior tail
    double i_estimate = 0.0;   // energy E(f0, phi0)
    std::shared_ptr<const ScaledProfile> scaled;

    double phi_at(double r) const { return scaled->psi_at(r / b) + std::log(params.e0); }
    double dphi_at(double r) const { return scaled->dpsi_at(r / b) / b; }
    double exterior_flux() const { return b * scaled->v_inf; } // r^2 phi' outside
};

/// Cutoff energy from the exterior matching: E0 = exp(-r0 psi'(r0)).
inline double e0_from_profile(const ScaledProfile& p) {
    if (!p.crossed()) throw std::invalid_argument("e0_from_profile: profile has no crossing");
    if (!(p.dpsi_at_r0 > 0.0))
        throw std::invalid_argument("e0_from_profile: nonpositive exterior slope");
    return std::exp(-(*p.r0) * p.dpsi_at_r0);
}

/// Scaled mass by two routes that must agree: nested quadrature of the
/// density over the support, and 4 pi times the mass flux carried through
/// the integrator.
struct ScaledMassResult {
    double quadrature = 0.0;
    double flux = 0.0;
    double rel_gap() const {
        const double n = std::max(std::abs(quadrature), std::abs(flux));
        return n == 0.0 ? 0.0 : std::abs(quadrature - flux) / n;
    }
};

inline ScaledMassResult scaled_mass(const ScaledProfile& p, double k,
                                    const QuadratureConfig& qcfg = {1e-13, 1e-9, 60,
                                                                    1000000}) {
    if (!p.crossed()) throw std::invalid_argument("scaled_mass: profile has no crossing");
    const double r0 = *p.r0;
    ScaledMassResult out;
    out.quadrature =
        4.0 * pi *
        integrate_adaptive(
            [&](double r) { return r * r * rho_scaled(p.psi_at(r), k); }, 0.0, r0, qcfg);
    out.flux = 4.0 * pi * p.mflux_at(r0);
    return out;
}

/// Physical rest mass by direct quadrature of the ansatz over the support.
inline double physical_mass(const ScaledProfile& p, double c,
                            const QuadratureConfig& qcfg = {1e-13, 1e-9, 60, 1000000}) {
    const double e0 = e0_from_profile(p);
    PolytropeParams par{p.k, e0, c};
    const double b = std::pow(c, p.k / 2.0) / std::pow(e0, 2.0 + p.k / 2.0);
    const double R = b * (*p.r0);
    const double le0 = std::log(e0);
    return 4.0 * pi *
           integrate_adaptive(
               [&](double r) {
                   const double phi = p.psi_at(r / b) + le0;
                   return r * r * physical_moment(phi, par, PhysicalMoment::Density, qcfg);
               },
               0.0, R, qcfg);
}

/// Full physical assembly: potential, support, mass, L^q norm and energy.
inline PhysicalProfile scale_to_physical(const ScaledProfile& p, double c,
                                         const QuadratureConfig& qcfg = {1e-13, 1e-9, 60,
                                                                         1000000}) {
    if (!(c > 0.0)) throw std::invalid_argument("scale_to_physical: c must be positive");
    PhysicalProfile out;
    out.scaled = std::make_shared<ScaledProfile>(p);
    const double e0 = e0_from_profile(p);
    out.params = PolytropeParams{p.k, e0, c};
    out.params.validate();
    out.b = std::pow(c, p.k / 2.0) / std::pow(e0, 2.0 + p.k / 2.0);
    out.support_radius = out.b * (*p.r0);
    const double le0 = std::log(e0);

    out.r_nodes.resize(p.r_nodes.size());
    out.phi.resize(p.r_nodes.size());
    for (std::size_t i = 0; i < p.r_nodes.size(); ++i) {
        out.r_nodes[i] = out.b * p.r_nodes[i];
        out.phi[i] = p.psi[i] + le0;
    }

    auto radial = [&](auto&& density) {
        return 4.0 * pi *
               integrate_adaptive(
                   [&](double r) {
                       const double phi = p.psi_at(r / out.b) + le0;
                       return r * r * density(phi);
                   },
                   0.0, out.support_radius, qcfg);
    };
    out.mass = radial([&](double phi) {
        return physical_moment(phi, out.params, PhysicalMoment::Density, qcfg);
    });
    const double jq = radial([&](double phi) {
        return physical_moment(phi, out.params, PhysicalMoment::Casimir, qcfg);
    });
    out.lq_norm = std::pow(jq, p.k / (p.k + 1.0));
    out.e_kin = radial([&](double phi) {
        return physical_moment(phi, out.params, PhysicalMoment::Energy, qcfg);
    });

    // field energy: quadrature over the numeric range plus the exact
    // Coulomb tail 4 pi B^2 / R beyond it
    const double r_num = out.b * p.r_numeric_end();
    const double interior =
        4.0 * pi *
        integrate_adaptive(
            [&](double r) {
                const double d = p.dpsi_at(r / out.b) / out.b;
                return r * r * d * d;
            },
            0.0, r_num, qcfg);
    const double B = out.exterior_flux();
    out.field_energy = 0.5 * (interior + 4.0 * pi * B * B / r_num);
    out.i_estimate = out.e_kin + out.field_energy;
    return out;
}

/// One row of the shooting-parameter sweep of Figure-2 type data.
struct SweepRow {
    double a = 0.0;
    double r0 = 0.0;
    double dpsi_r0 = 0.0;
    double e0 = 0.0;
    double scaled_mass = 0.0;
    double physical_mass = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::optional<double> threshold; // a* when both regimes are spanned
    std::vector<std::string> violations;
};

/// Tabulates (a, r0, psi'(r0), E0, masses) over a shooting sweep; rows sorted
/// by a. Monotonicity defects of the E0 -> physical mass map are reported,
/// not thrown. Rows evaluate concurrently when jobs > 1.
inline SweepResult mass_curve(double k, std::vector<double> a_list, double c,
                              const SolverConfig& cfg = {}, bool want_threshold = false,
                              unsigned jobs = 1) {
    if (a_list.empty()) throw std::invalid_argument("mass_curve: empty sweep");
    for (double a : a_list)
        if (!(a < 0.0)) throw std::invalid_argument("mass_curve: all a must be < 0");
    std::sort(a_list.begin(), a_list.end());

    const double a_min = a_list.front();
    MuTable table(k, a_min - 1.0, cfg.mu_table_nodes, cfg.quadrature);

    SweepResult out;
    out.rows.assign(a_list.size(), SweepRow{});
    std::vector<std::string> row_errors(a_list.size());
    auto worker = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const double a = a_list[i];
            SweepRow row;
            row.a = a;
            try {
                const ScaledProfile p = integrate_scaled(a, k, cfg, &table);
                if (p.crossed()) {
                    row.r0 = *p.r0;
                    row.dpsi_r0 = p.dpsi_at_r0;
                    row.e0 = e0_from_profile(p);
                    row.scaled_mass = scaled_mass(p, k).quadrature;
                    row.physical_mass = physical_mass(p, c);
                } else {
                    row_errors[i] = "no crossing before r_max";
                }
            } catch (const std::exception& e) {
                row_errors[i] = e.what();
            }
            out.rows[i] = row;
        }
    };
    if (jobs <= 1) {
        worker(0, a_list.size());
    } else {
        std::vector<std::thread> pool;
        const std::size_t njobs = std::min<std::size_t>(jobs, a_list.size());
        for (std::size_t t = 0; t < njobs; ++t) {
            const std::size_t b = a_list.size() * t / njobs;
            const std::size_t e = a_list.size() * (t + 1) / njobs;
            pool.emplace_back(worker, b, e);
        }
        for (auto& th : pool) th.join();
    }

    for (std::size_t i = 0; i < row_errors.size(); ++i)
        if (!row_errors[i].empty())
            out.violations.push_back("row a=" + std::to_string(a_list[i]) + ": " +
                                     row_errors[i]);

    // uniqueness mechanism: physical mass strictly decreasing in E0
    std::vector<const SweepRow*> by_e0;
    for (const auto& r : out.rows)
        if (r.e0 > 0.0) by_e0.push_back(&r);
    std::sort(by_e0.begin(), by_e0.end(),
              [](const SweepRow* x, const SweepRow* y) { return x->e0 < y->e0; });
    for (std::size_t i = 0; i + 1 < by_e0.size(); ++i) {
        if (!(by_e0[i]->physical_mass > by_e0[i + 1]->physical_mass))
            out.violations.push_back("mass not decreasing between E0=" +
                                     std::to_string(by_e0[i]->e0) + " and E0=" +
                                     std::to_string(by_e0[i + 1]->e0));
    }

    if (want_threshold && a_list.size() >= 2) {
        try {
            out.threshold = find_threshold(k, a_list.front(), a_list.back(), cfg);
        } catch (const std::exception&) {
            out.threshold = std::nullopt;
        }
    }
    return out;
}

/// One named identity check of the multiplier battery.
struct MultiplierCheck {
    std::string name;
    double measured = 0.0;
    double expected = 0.0;
    double rel_err = 0.0;
    bool pass = false;
};

struct MultiplierReport {
    std::vector<MultiplierCheck> checks;
    bool all_pass = false;
    double I = 0.0, M = 0.0, J = 0.0, grad2 = 0.0;
};

/// Consistency of the recovered Lagrange-multiplier data against the
/// integral identities satisfied by minimizers:
///   (i)   E0 = (I - (2-k)/6 int|grad phi|^2) / M
///   (ii)  c  = (k+1)/(2-k) (I - E0 M) / J^{1+1/k}
///   (iii) E0 in ((k+4)/6 I/M, I/M)
///   (iv)  r0 = -(6/(2-k) E0 M - (k+4)/(2-k) I) / (4 pi ln E0)
///   (v)   phi'(r0) = 4 pi (ln E0)^2 / (6/(2-k) E0 M - (k+4)/(2-k) I)
///   (vi)  r^2 phi' constant over the stored exterior
inline MultiplierReport multiplier_consistency(const PhysicalProfile& phys, double k,
                                               double tol = 1e-4,
                                               double tol_exterior = 1e-8) {
    if (k != phys.params.k)
        throw std::invalid_argument("multiplier_consistency: k mismatch with profile");
    MultiplierReport rep;
    const double I = phys.i_estimate;
    const double M = phys.mass;
    const double J = phys.lq_norm;
    const double FG = 2.0 * phys.field_energy;
    const double e0 = phys.params.e0;
    rep.I = I;
    rep.M = M;
    rep.J = J;
    rep.grad2 = FG;

    auto add = [&](const std::string& name, double measured, double expected,
                   double tolr) {
        MultiplierCheck c;
        c.name = name;
        c.measured = measured;
        c.expected = expected;
        c.rel_err = std::abs(measured - expected) /
                    std::max({std::abs(expected), std::abs(measured), 1e-300});
        c.pass = c.rel_err <= tolr;
        rep.checks.push_back(c);
    };

    add("e0_energy_identity", (I - (2.0 - k) / 6.0 * FG) / M, e0, tol);

    const double jq = std::pow(J, 1.0 + 1.0 / k);
    add("c_multiplier_identity", (k + 1.0) / (2.0 - k) * (I - e0 * M) / jq, phys.params.c,
        tol);

    {
        MultiplierCheck c;
        c.name = "e0_in_open_interval";
        const double lo = (k + 4.0) / 6.0 * I / M;
        const double hi = I / M;
        c.measured = e0;
        c.expected = 0.5 * (lo + hi);
        c.rel_err = (e0 > lo && e0 < hi) ? 0.0 : 1.0;
        c.pass = e0 > lo && e0 < hi;
        rep.checks.push_back(c);
    }

    const double G = (6.0 * e0 * M - (k + 4.0) * I) / (2.0 - k);
    const double le0 = std::log(e0);
    add("support_radius_identity", phys.support_radius, -G / (4.0 * pi * le0), tol);
    add("exit_slope_identity", phys.dphi_at(phys.support_radius),
        4.0 * pi * le0 * le0 / G, tol);

    {
        MultiplierCheck c;
        c.name = "exterior_flux_constant";
        const ScaledProfile& sp = *phys.scaled;
        const double v0 = (*sp.r0) * (*sp.r0) * sp.dpsi_at_r0;
        double worst = 0.0;
        for (std::size_t i = 0; i < sp.r_nodes.size(); ++i) {
            if (sp.r_nodes[i] < *sp.r0) continue;
            worst = std::max(worst, std::abs(sp.v[i] - v0) / std::abs(v0));
        }
        c.measured = worst;
        c.expected = 0.0;
        c.rel_err = worst;
        c.pass = worst <= tol_exterior;
        rep.checks.push_back(c);
    }

    rep.all_pass = true;
    for (const auto& c : rep.checks) rep.all_pass = rep.all_pass && c.pass;
    return rep;
}

/// Fixed-point settings for the reduced-field solver.
struct GreensConfig {
    double tol = 1e-10;
    long max_iter = 10000;
    double damping = 0.5;
    int aitken_start = 10;
    int aitken_every = 5;
};

/// Reduced field of a gridded distribution: damped fixed-point iteration on
///   psi(r) = -(1/r) int_0^r s^2 g ds - int_r^S s g ds,
///   g = e^{2 psi} int f / sqrt(e^{2 psi} + p^2) dp,
/// with the exterior integral truncated at the support radius S of f.
/// The output is nonpositive everywhere.
inline std::vector<double> greens_solve(const PhaseSpaceState& s,
                                        const GreensConfig& cfg = {}) {
    s.validate();
    const std::size_t nr = s.nr(), np = s.np();
    std::vector<double> wp = simpson_weights(s.p_grid);
    for (std::size_t j = 0; j < np; ++j) wp[j] *= 4.0 * pi * s.p_grid[j] * s.p_grid[j];

    // support radius: last radius with any matter
    std::size_t i_supp = 0;
    bool any = false;
    for (std::size_t i = 0; i < nr; ++i)
        for (std::size_t j = 0; j < np; ++j)
            if (s.at(i, j) > 0.0) {
                i_supp = i;
                any = true;
                break;
            }
    std::vector<double> psi(nr, 0.0);
    if (!any) return psi;

    const auto& r = s.r_grid;
    std::vector<double> g(nr), s2g(nr), sg(nr);

    auto apply = [&](const std::vector<double>& cur, std::vector<double>& next) {
        for (std::size_t i = 0; i < nr; ++i) {
            const double m2 = std::exp(2.0 * cur[i]);
            double acc = 0.0;
            for (std::size_t j = 0; j < np; ++j) {
                const double fij = s.at(i, j);
                if (fij > 0.0) acc += wp[j] * fij / std::sqrt(m2 + s.p_grid[j] * s.p_grid[j]);
            }
            g[i] = m2 * acc;
            s2g[i] = r[i] * r[i] * g[i];
            sg[i] = r[i] * g[i];
        }
        std::vector<double> in = detail::cumulative_integral(r, s2g);
        // center piece below the first node, source treated as constant
        const double core = g[0] * r[0] * r[0] * r[0] / 3.0;
        std::vector<double> ex = detail::cumulative_integral(r, sg);
        const double ex_supp = ex[i_supp];
        for (std::size_t i = 0; i < nr; ++i) {
            const double inner = core + in[i];
            const double outer = (i < i_supp) ? (ex_supp - ex[i]) : 0.0;
            next[i] = -(inner / r[i] + outer);
        }
    };

    std::vector<double> tpsi(nr), prev1, prev2;
    double damping = cfg.damping;
    double prev_diff = 1e300;
    for (long it = 0; it < cfg.max_iter; ++it) {
        apply(psi, tpsi);
        std::vector<double> cand(nr);
        for (std::size_t i = 0; i < nr; ++i)
            cand[i] = psi[i] + damping * (tpsi[i] - psi[i]);

        if (it >= cfg.aitken_start && cfg.aitken_every > 0 &&
            (it % cfg.aitken_every) == 0 && prev2.size() == nr) {
            for (std::size_t i = 0; i < nr; ++i) {
                const double d2 = cand[i] - 2.0 * prev1[i] + prev2[i];
                if (std::abs(d2) > 1e-14 * (std::abs(cand[i]) + 1e-30)) {
                    const double acc = cand[i] - (cand[i] - prev1[i]) * (cand[i] - prev1[i]) / d2;
                    if (std::isfinite(acc) && acc <= 0.0) cand[i] = acc;
                }
            }
        }

        double diff = 0.0;
        for (std::size_t i = 0; i < nr; ++i) diff = std::max(diff, std::abs(cand[i] - psi[i]));
        // back off the damping if the update stops contracting
        if (diff > prev_diff) damping = std::max(0.05, 0.5 * damping);
        prev_diff = diff;
        prev2 = std::move(prev1);
        prev1 = psi;
        psi = std::move(cand);
        if (diff < cfg.tol) return psi;
    }
    throw std::runtime_error("greens_solve: fixed point did not converge");
}

/// Samples a physical profile onto a tensor phase-space grid. The radial grid
/// covers the support exactly, so f vanishes on the boundary.
inline PhaseSpaceState make_polytrope_state(const PhysicalProfile& phys, std::size_t nr,
                                            std::size_t np, double p_pad = 1.02) {
    PhaseSpaceState st;
    const double R = phys.support_radius;
    st.r_grid.resize(nr);
    for (std::size_t i = 0; i < nr; ++i)
        st.r_grid[i] = R * static_cast<double>(i + 1) / static_cast<double>(nr);
    const double m_center = std::exp(phys.phi_at(0.0));
    const double p_max =
        p_pad * std::sqrt((phys.params.e0 - m_center) * (phys.params.e0 + m_center));
    st.p_grid.resize(np);
    for (std::size_t j = 0; j < np; ++j)
        st.p_grid[j] = p_max * static_cast<double>(j) / static_cast<double>(np - 1);
    st.phi.resize(nr);
    st.phi_t.assign(nr, 0.0);
    st.f.assign(nr * np, 0.0);
    for (std::size_t i = 0; i < nr; ++i) {
        st.phi[i] = phys.phi_at(st.r_grid[i]);
        const double m2 = std::exp(2.0 * st.phi[i]);
        for (std::size_t j = 0; j < np; ++j) {
            const double E = std::sqrt(m2 + st.p_grid[j] * st.p_grid[j]);
            const double w = (phys.params.e0 - E) / phys.params.c;
            st.at(i, j) = w > 0.0 ? std::pow(w, phys.params.k) : 0.0;
        }
    }
    return st;
}

} // namespace nvpoly
