#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "nvpoly/quadrature.hpp"
#include "nvpoly/state.hpp"

namespace nvpoly {

namespace detail {

// Nodal quadrature weights including the radial/momentum shell measures
// 4 pi r^2 dr and 4 pi p^2 dp, composite Simpson on the stored grids.
inline std::vector<double> shell_weights(std::span<const double> x) {
    std::vector<double> w = simpson_weights(x);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] *= 4.0 * pi * x[i] * x[i];
    return w;
}

} // namespace detail

/// Per-node ingredients shared by the scalar functionals.
struct StateQuadrature {
    std::vector<double> wr;     // 4 pi r^2 Simpson weights
    std::vector<double> wp;     // 4 pi p^2 Simpson weights
    std::vector<double> dphi;   // finite-difference phi'
    std::vector<double> rho;    // int f dp per radius
    std::vector<double> kin;    // int sqrt(e^{2phi}+p^2) f dp per radius
    std::vector<double> vir;    // int p^2/sqrt(e^{2phi}+p^2) f dp per radius
    std::vector<double> source; // e^{2phi} int f/sqrt(e^{2phi}+p^2) dp per radius

    explicit StateQuadrature(const PhaseSpaceState& s) {
        s.validate();
        wr = detail::shell_weights(s.r_grid);
        wp = detail::shell_weights(s.p_grid);
        dphi = gradient(s.r_grid, s.phi);
        const std::size_t nr = s.nr(), np = s.np();
        rho.assign(nr, 0.0);
        kin.assign(nr, 0.0);
        vir.assign(nr, 0.0);
        source.assign(nr, 0.0);
        for (std::size_t i = 0; i < nr; ++i) {
            const double m2 = std::exp(2.0 * s.phi[i]);
            double r = 0.0, kn = 0.0, vv = 0.0, sr = 0.0;
            for (std::size_t j = 0; j < np; ++j) {
                const double fij = s.at(i, j);
                if (fij == 0.0) continue;
                const double p2 = s.p_grid[j] * s.p_grid[j];
                const double E = std::sqrt(m2 + p2);
                if (!std::isfinite(E * fij))
                    throw std::runtime_error("functionals: non-finite integrand");
                r += wp[j] * fij;
                kn += wp[j] * E * fij;
                vv += wp[j] * p2 / E * fij;
                sr += wp[j] / E * fij;
            }
            rho[i] = r;
            kin[i] = kn;
            vir[i] = vv;
            source[i] = m2 * sr;
        }
    }
};

/// All scalar functionals of a state: mass, kinetic and field energies,
/// Hamiltonian, L^q norm of f, conformal energy, Q0 and both virial sides.
inline FunctionalReport compute_functionals(const PhaseSpaceState& s, double q = 2.0) {
    if (!(q > 1.0)) throw std::invalid_argument("compute_functionals: q must exceed 1");
    StateQuadrature sq(s);
    const std::size_t nr = s.nr(), np = s.np();

    FunctionalReport rep;
    double lq = 0.0;
    for (std::size_t i = 0; i < nr; ++i) {
        rep.mass += sq.wr[i] * sq.rho[i];
        rep.e_kin += sq.wr[i] * sq.kin[i];
        rep.e_field += 0.5 * sq.wr[i] * sq.dphi[i] * sq.dphi[i];
        rep.e_field_t += 0.5 * sq.wr[i] * s.phi_t[i] * s.phi_t[i];
        rep.virial_rhs += sq.wr[i] * sq.vir[i];
        rep.virial_lhs += -0.5 * sq.wr[i] * s.phi[i] * sq.source[i];
        rep.q0 += -sq.wr[i] * s.phi_t[i] * (s.r_grid[i] * sq.dphi[i] + s.phi[i]);
        for (std::size_t j = 0; j < np; ++j) {
            const double fij = s.at(i, j);
            if (fij > 0.0) lq += sq.wr[i] * sq.wp[j] * std::pow(fij, q);
        }
        const double r2 = s.r_grid[i] * s.r_grid[i];
        rep.conformal += sq.wr[i] * r2 *
                         (sq.kin[i] + 0.5 * s.phi_t[i] * s.phi_t[i] +
                          0.5 * sq.dphi[i] * sq.dphi[i]);
    }
    rep.hamiltonian = rep.e_kin + rep.e_field + rep.e_field_t;
    rep.lq_norm = std::pow(lq, 1.0 / q);
    const double r_end = s.r_grid.back();
    rep.conformal_truncated =
        s.is_static() && std::abs(sq.dphi.back()) * r_end * r_end > 1e-12;
    for (std::size_t j = 0; j < np; ++j)
        rep.boundary_support = rep.boundary_support || s.at(nr - 1, j) > 0.0;
    for (std::size_t i = 0; i < nr; ++i)
        rep.boundary_support = rep.boundary_support || s.at(i, np - 1) > 0.0;
    return rep;
}

/// Pointwise local energy, radial momentum and stress-trace densities.
inline LocalDensities local_densities(const PhaseSpaceState& s) {
    StateQuadrature sq(s);
    const std::size_t nr = s.nr();
    LocalDensities out;
    out.e.resize(nr);
    out.q_r.resize(nr);
    out.tau_trace.resize(nr);
    for (std::size_t i = 0; i < nr; ++i) {
        const double dtp = s.phi_t[i], dp = sq.dphi[i];
        out.e[i] = sq.kin[i] + 0.5 * dtp * dtp + 0.5 * dp * dp;
        // isotropic f carries no momentum density; only the field flux remains
        out.q_r[i] = -dtp * dp;
        out.tau_trace[i] = sq.vir[i] - 0.5 * dp * dp + 1.5 * dtp * dtp;
    }
    return out;
}

/// Relative virial defect |lhs - rhs| / max(lhs, rhs) of a static state,
/// 0 by convention when both sides vanish.
inline double virial_residual(const PhaseSpaceState& s) {
    if (!s.is_static()) throw std::invalid_argument("virial_residual: state must be static");
    const FunctionalReport rep = compute_functionals(s, 2.0);
    const double norm = std::max(rep.virial_lhs, rep.virial_rhs);
    if (norm == 0.0) return 0.0;
    return std::abs(rep.virial_lhs - rep.virial_rhs) / norm;
}

/// ||phi||_{L^6} / ||grad phi||_{L^2} of a radial potential profile; the
/// Sobolev constant (2/sqrt(3)) pi^{-2/3} ~ 0.538315 bounds it for decaying
/// profiles.
inline double sobolev_ratio(std::span<const double> r_grid, std::span<const double> phi) {
    if (r_grid.size() != phi.size() || r_grid.size() < 3)
        throw std::invalid_argument("sobolev_ratio: bad profile");
    std::vector<double> w = simpson_weights(r_grid);
    std::vector<double> dphi = gradient(r_grid, phi);
    double l6 = 0.0, g2 = 0.0, linf = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double shell = 4.0 * pi * r_grid[i] * r_grid[i] * w[i];
        l6 += shell * std::pow(std::abs(phi[i]), 6.0);
        g2 += shell * dphi[i] * dphi[i];
        linf = std::max(linf, std::abs(phi[i]));
    }
    if (!(std::sqrt(g2) > 1e-12 * (1.0 + linf)))
        throw std::invalid_argument("sobolev_ratio: zero gradient norm");
    return std::pow(l6, 1.0 / 6.0) / std::sqrt(g2);
}

inline constexpr double sobolev_constant = 0.53831455174200805; // (2/sqrt 3) pi^{-2/3}

} // namespace nvpoly
