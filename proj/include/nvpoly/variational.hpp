#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "nvpoly/functionals.hpp"
#include "nvpoly/interp.hpp"
#include "nvpoly/steady_state.hpp"

namespace nvpoly {

/// Reduced field of f: the unique energy-minimizing potential, from the
/// fixed-point Green's solver.
inline std::vector<double> reduced_field(const PhaseSpaceState& s,
                                         const GreensConfig& cfg = {}) {
    return greens_solve(s, cfg);
}

/// E(f, psi) with the field term through the potential-source pairing, so
/// the exterior tail of psi is captured exactly on the finite grid. psi is
/// expected to be the reduced field of f (or any decaying solution of the
/// field equation).
inline double reduced_energy(const PhaseSpaceState& s, const std::vector<double>& psi) {
    if (psi.size() != s.nr()) throw std::invalid_argument("reduced_energy: size mismatch");
    PhaseSpaceState tmp = s;
    tmp.phi = psi;
    StateQuadrature sq(tmp);
    double e = 0.0;
    for (std::size_t i = 0; i < s.nr(); ++i)
        e += sq.wr[i] * (sq.kin[i] - 0.5 * psi[i] * sq.source[i]);
    return e;
}

/// Energy of (f, phi) for arbitrary probe potentials: field term by
/// finite-difference gradient quadrature on the grid, closed beyond the
/// stored range by the Coulomb continuation phi' ~ (r_end/r)^2 phi'(r_end).
/// Exact for fields with vacuum exteriors, vanishing for compact probes.
inline double probe_energy(const PhaseSpaceState& s, const std::vector<double>& phi) {
    PhaseSpaceState tmp = s;
    tmp.phi = phi;
    const FunctionalReport rep = compute_functionals(tmp, 2.0);
    const auto dphi = gradient(tmp.r_grid, tmp.phi);
    const double r_end = tmp.r_grid.back();
    const double flux = r_end * r_end * dphi.back();
    return rep.e_kin + rep.e_field + 0.5 * 4.0 * pi * flux * flux / r_end;
}

namespace detail {

inline double grid_mass(const StateQuadrature& sq) {
    double m = 0.0;
    for (std::size_t i = 0; i < sq.rho.size(); ++i) m += sq.wr[i] * sq.rho[i];
    return m;
}

} // namespace detail

/// Exact dilation transport f -> alpha^3 f(alpha x, p) realized by grid
/// coordinate rescaling (no resampling): mass invariant, L^q norm scaled by
/// alpha^{3(q-1)/q}.
inline PhaseSpaceState dilate_rescale(const PhaseSpaceState& s, double alpha) {
    if (!(alpha > 0.0)) throw std::invalid_argument("dilate_rescale: alpha must be > 0");
    PhaseSpaceState out = s;
    const double a3 = alpha * alpha * alpha;
    for (auto& r : out.r_grid) r /= alpha;
    for (auto& v : out.f) v *= a3;
    return out;
}

/// Two-step projection onto the constraint set {mass = M, ||f||_q = J} on a
/// fixed grid: multiplicative mass fix, then a resampled spatial dilation
/// that moves only the L^q norm; alternated until both constraints hold to
/// rel_tol.
inline void renormalize(PhaseSpaceState& s, double M_target, double J_target, double q,
                        double rel_tol = 1e-10, int max_rounds = 80) {
    if (!(M_target > 0.0) || !(J_target > 0.0))
        throw std::invalid_argument("renormalize: targets must be positive");
    const std::size_t nr = s.nr(), np = s.np();
    std::vector<double> wr = simpson_weights(s.r_grid);
    std::vector<double> wp = simpson_weights(s.p_grid);
    for (std::size_t i = 0; i < nr; ++i) wr[i] *= 4.0 * pi * s.r_grid[i] * s.r_grid[i];
    for (std::size_t j = 0; j < np; ++j) wp[j] *= 4.0 * pi * s.p_grid[j] * s.p_grid[j];

    auto norms = [&](const std::vector<double>& f) {
        double m = 0.0, lq = 0.0;
        for (std::size_t i = 0; i < nr; ++i)
            for (std::size_t j = 0; j < np; ++j) {
                const double v = f[i * np + j];
                if (v > 0.0) {
                    m += wr[i] * wp[j] * v;
                    lq += wr[i] * wp[j] * std::pow(v, q);
                }
            }
        return std::pair{m, std::pow(lq, 1.0 / q)};
    };

    auto [m0, j0] = norms(s.f);
    if (!(m0 > 0.0)) throw std::invalid_argument("renormalize: zero distribution");

    for (int round = 0; round < max_rounds; ++round) {
        auto [m, jq] = norms(s.f);
        const bool m_ok = std::abs(m - M_target) <= rel_tol * M_target;
        const bool j_ok = std::abs(jq - J_target) <= rel_tol * J_target;
        if (m_ok && j_ok) return;

        const double lam = M_target / m;
        for (auto& v : s.f) v *= lam;
        jq *= lam;

        // clamp each round's dilation; large rescalings proceed in stages so
        // the support never jumps off the grid in one resample
        double alpha = std::pow(J_target / jq, q / (3.0 * (q - 1.0)));
        alpha = std::clamp(alpha, 0.5, 2.0);
        if (std::abs(alpha - 1.0) > 1e-15) {
            const double a3 = alpha * alpha * alpha;
            std::vector<double> nf(nr * np, 0.0);
            bool nonzero = false;
            for (std::size_t i = 0; i < nr; ++i) {
                const double rq = alpha * s.r_grid[i];
                if (rq > s.r_grid.back()) continue;
                const std::size_t seg = locate(s.r_grid, rq);
                const double t =
                    (rq - s.r_grid[seg]) / (s.r_grid[seg + 1] - s.r_grid[seg]);
                for (std::size_t j = 0; j < np; ++j) {
                    const double v = (1.0 - t) * s.f[seg * np + j] +
                                     t * s.f[(seg + 1) * np + j];
                    nf[i * np + j] = std::max(0.0, a3 * v);
                    nonzero = nonzero || nf[i * np + j] > 0.0;
                }
            }
            if (!nonzero)
                throw std::runtime_error(
                    "renormalize: dilation drove the support off the grid");
            s.f = std::move(nf);
        }
    }
    throw std::runtime_error("renormalize: projection did not converge");
}

/// Mass transport between constraint levels: f -> beta^2 f(beta x, p),
/// phi -> phi(beta x) with beta = M1/M2. Exact on the rescaled grid; the
/// energy scales by exactly M2/M1 and the L^q norm by beta^{(2-k)/(1+k)}
/// at q = 1+1/k.
inline PhaseSpaceState scaling_transport(const PhaseSpaceState& s, double M2) {
    if (!(M2 > 0.0)) throw std::invalid_argument("scaling_transport: M2 must be positive");
    StateQuadrature sq(s);
    const double M1 = detail::grid_mass(sq);
    if (!(M1 > 0.0)) throw std::invalid_argument("scaling_transport: zero mass state");
    const double beta = M1 / M2;
    PhaseSpaceState out = s;
    for (auto& r : out.r_grid) r /= beta;
    for (auto& v : out.f) v *= beta * beta;
    return out;
}

/// Explicit vanishing-type test family: the box distribution
///   f_gamma = (J^q/M)^{1/(q-1)} chi_{|x|<=beta} chi_{|p|<=gamma}
/// paired with the scaled bump potential phi_alpha = -alpha psi(x/beta),
/// psi == 1 on the unit ball, supported in the 2-ball.
struct TestFamilyEnergy {
    double energy = 0.0;        // E(f_gamma, phi_alpha) by quadrature
    double bound = 0.0;         // e^{-alpha} M + (3/4) M gamma + alpha^2 beta K
    double kinetic = 0.0;
    double field = 0.0;
    double beta = 0.0;
    double c0 = 0.0;
    double mass = 0.0;          // analytic norms of the construction
    double lq_norm = 0.0;
};

namespace detail {

// C-infinity smoothstep S(0)=0, S(1)=1 built from exp(-1/t)
inline double smoothstep(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    const double h = std::exp(-1.0 / t);
    const double g = std::exp(-1.0 / (1.0 - t));
    return h / (h + g);
}

inline double smoothstep_deriv(double t) {
    if (t <= 0.0 || t >= 1.0) return 0.0;
    const double h = std::exp(-1.0 / t);
    const double g = std::exp(-1.0 / (1.0 - t));
    const double hp = h / (t * t);
    const double gp = g / ((1.0 - t) * (1.0 - t));
    // d/dt [h/(h+g)] with g' = -gp
    return (hp * g + h * gp) / ((h + g) * (h + g));
}

// K = int |grad psi|^2 for the concrete bump, cached
inline double bump_gradient_norm2() {
    static const double K = [] {
        return 4.0 * pi *
               integrate_adaptive(
                   [](double s) {
                       const double d = smoothstep_deriv(2.0 - s);
                       return s * s * d * d;
                   },
                   1.0, 2.0, QuadratureConfig{1e-13, 1e-12, 60, 1000000});
    }();
    return K;
}

} // namespace detail

inline TestFamilyEnergy test_family_energy(double gamma, double alpha, double M, double J,
                                           double k) {
    if (!(gamma > 0.0) || !(alpha >= 0.0))
        throw std::invalid_argument("test_family_energy: need gamma > 0, alpha >= 0");
    if (!(M > 0.0) || !(J > 0.0) || !(k > 0.0 && k < 2.0))
        throw std::invalid_argument("test_family_energy: bad (M, J, k)");
    const double q = 1.0 + 1.0 / k;
    TestFamilyEnergy out;
    out.c0 = std::pow(std::pow(J, q) / M, 1.0 / (q - 1.0));
    out.beta = std::cbrt(std::pow(M / J, q / (q - 1.0)) * std::pow(3.0 / (4.0 * pi), 2.0)) /
               gamma;
    const double vol_x = 4.0 * pi / 3.0 * out.beta * out.beta * out.beta;
    const double vol_p = 4.0 * pi / 3.0 * gamma * gamma * gamma;
    out.mass = out.c0 * vol_x * vol_p;
    out.lq_norm = std::pow(std::pow(out.c0, q) * vol_x * vol_p, 1.0 / q);

    // phi_alpha == -alpha on the matter box, so the kinetic term is exact 1-D
    const double m2 = std::exp(-2.0 * alpha);
    out.kinetic = out.c0 * vol_x * 4.0 * pi *
                  integrate_adaptive(
                      [&](double p) { return p * p * std::sqrt(m2 + p * p); }, 0.0, gamma,
                      QuadratureConfig{1e-14, 1e-12, 60, 1000000});
    const double K = detail::bump_gradient_norm2();
    out.field = 0.5 * alpha * alpha * out.beta * K;
    out.energy = out.kinetic + out.field;
    out.bound = std::exp(-alpha) * M + 0.75 * M * gamma + alpha * alpha * out.beta * K;
    return out;
}

/// The optimized family of the large-mass argument: gamma(alpha) balancing
/// the momentum and field terms, alpha = ln A, valid for A > 1 (mass above
/// the explicit threshold).
struct OptimizedFamily {
    double A = 0.0;
    double alpha = 0.0;
    double gamma = 0.0;
    double mass_threshold = 0.0;     // explicit lower bound making A > 1
    TestFamilyEnergy family;
};

/// Explicit lower mass bound above which the optimized family certifies the
/// strict inequality I < M for the concrete bump constant K.
inline double test_family_mass_threshold(double J, double k) {
    const double q = 1.0 + 1.0 / k;
    const double K = detail::bump_gradient_norm2();
    return std::pow(std::pow(0.75, 5.0 * (q - 1.0)) * std::pow(8.0 / pi, 2.0 * (q - 1.0)) *
                        std::pow(K, 3.0 * (q - 1.0)) / std::pow(J, q),
                    1.0 / (2.0 * q - 3.0));
}

inline OptimizedFamily optimized_test_family(double M, double J, double k) {
    const double q = 1.0 + 1.0 / k;
    const double K = detail::bump_gradient_norm2();
    OptimizedFamily out;
    out.A = 1.0 / std::sqrt(K) * std::pow(4.0 / 3.0, 5.0 / 6.0) *
            std::pow(pi / 8.0, 1.0 / 3.0) * std::pow(J, q / (6.0 * q - 6.0)) *
            std::pow(M, (2.0 * q - 3.0) / (6.0 * q - 6.0));
    out.mass_threshold = test_family_mass_threshold(J, k);
    if (!(out.A > 1.0))
        throw std::invalid_argument("optimized_test_family: mass below the threshold");
    out.alpha = std::log(out.A);
    const double B = std::cbrt(std::pow(M / J, q / (q - 1.0)) *
                               std::pow(3.0 / (4.0 * pi), 2.0));
    out.gamma = std::sqrt(4.0 * K * B / (3.0 * M)) * out.alpha;
    out.family = test_family_energy(out.gamma, out.alpha, M, J, k);
    return out;
}

/// Descent configuration for the brute-force minimizer.
struct MinimizeConfig {
    std::size_t nr = 64, np = 64;
    double r_max = 1.0;
    double p_max = 1.0;
    long max_iters = 600;
    int window = 50;             // convergence window on the energy decrease
    double energy_tol = 1e-9;
    GreensConfig greens;
    std::optional<PhaseSpaceState> init; // overrides the uniform box start
};

struct TraceRow {
    long iter;
    double energy;
    double kkt_residual;
};

/// Result of the constrained descent; f and its reduced field, the energy,
/// the fitted multipliers, and the sup-norm defect of the multiplier
/// relation on the support.
struct MinimizerResult {
    PhaseSpaceState state;  // f with phi = reduced field
    double energy = 0.0;
    double mass = 0.0;
    double lq_norm = 0.0;
    double kkt_e0 = 0.0;
    double kkt_c = 0.0;
    double kkt_residual = 0.0;
    bool below_mass_threshold = false;
    long iterations = 0;
    std::vector<TraceRow> trace;
};

namespace detail {

struct KktFit {
    double e0 = 0.0, c = 0.0, residual = 0.0;
};

inline KktFit kkt_fit(const PhaseSpaceState& s, const std::vector<double>& psi, double k) {
    double fmax = 0.0;
    for (double v : s.f) fmax = std::max(fmax, v);
    KktFit fit;
    if (fmax == 0.0) return fit;
    const double cut = 1e-8 * fmax;
    double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
    for (std::size_t i = 0; i < s.nr(); ++i) {
        const double m2 = std::exp(2.0 * psi[i]);
        for (std::size_t j = 0; j < s.np(); ++j) {
            const double f = s.at(i, j);
            if (f <= cut) continue;
            const double E = std::sqrt(m2 + s.p_grid[j] * s.p_grid[j]);
            const double y = std::pow(f, 1.0 / k);
            sx += E;
            sy += y;
            sxx += E * E;
            sxy += E * y;
            n += 1.0;
        }
    }
    if (n < 8.0) return fit;
    const double det = n * sxx - sx * sx;
    const double slope = (n * sxy - sx * sy) / det;
    const double icept = (sy * sxx - sx * sxy) / det;
    if (!(slope < 0.0)) return fit;
    fit.c = -1.0 / slope;
    fit.e0 = icept * fit.c;
    for (std::size_t i = 0; i < s.nr(); ++i) {
        const double m2 = std::exp(2.0 * psi[i]);
        for (std::size_t j = 0; j < s.np(); ++j) {
            const double f = s.at(i, j);
            if (f <= cut) continue;
            const double E = std::sqrt(m2 + s.p_grid[j] * s.p_grid[j]);
            fit.residual = std::max(
                fit.residual, std::abs(E + fit.c * std::pow(f, 1.0 / k) - fit.e0));
        }
    }
    return fit;
}

} // namespace detail

/// Brute-force verifier: projected gradient descent of the reduced energy on
/// the constraint set, stepping against the local particle energy
/// E = sqrt(e^{2 psi_f} + p^2), clipping at zero and reprojecting. Coarse by
/// design; the shooting pipeline is the precision path.
inline MinimizerResult minimize_energy(double M, double J, double k,
                                       const MinimizeConfig& cfg) {
    if (!(k > 0.0 && k < 2.0)) throw std::invalid_argument("minimize_energy: k not in (0,2)");
    const double q = 1.0 + 1.0 / k;

    PhaseSpaceState s;
    if (cfg.init) {
        s = *cfg.init;
        s.validate();
    } else {
        // feasible uniform box over the inner part of the grid
        s.r_grid.resize(cfg.nr);
        s.p_grid.resize(cfg.np);
        for (std::size_t i = 0; i < cfg.nr; ++i)
            s.r_grid[i] = cfg.r_max * double(i + 1) / double(cfg.nr);
        for (std::size_t j = 0; j < cfg.np; ++j)
            s.p_grid[j] = cfg.p_max * double(j) / double(cfg.np - 1);
        s.phi.assign(cfg.nr, 0.0);
        s.phi_t.assign(cfg.nr, 0.0);
        s.f.assign(cfg.nr * cfg.np, 0.0);
        for (std::size_t i = 0; i < cfg.nr; ++i)
            for (std::size_t j = 0; j < cfg.np; ++j)
                if (s.r_grid[i] <= 0.75 * cfg.r_max && s.p_grid[j] <= 0.75 * cfg.p_max)
                    s.at(i, j) = 1.0;
    }
    renormalize(s, M, J, q);

    std::vector<double> psi = greens_solve(s, cfg.greens);
    double energy = reduced_energy(s, psi);

    MinimizerResult out;
    std::vector<double> window_hist;
    bool fitted_phase = false;
    long it = 0;
    for (; it < cfg.max_iters; ++it) {
        {
            const auto fit = detail::kkt_fit(s, psi, k);
            out.trace.push_back({it, energy, fit.residual});
        }

        // descent direction against the reduced-energy gradient E. In the
        // refinement phase the fitted multipliers shift it along the
        // constraint tangent so it vanishes at the constrained optimum and
        // its negative part grows exactly the cutoff-shaped infill.
        double fmax = 0.0, emin = 1e300, emax = 0.0;
        std::vector<double> dir(s.nr() * s.np());
        detail::KktFit cur_fit;
        if (fitted_phase) cur_fit = detail::kkt_fit(s, psi, k);
        const bool have_fit = fitted_phase && cur_fit.c > 0.0;
        for (std::size_t i = 0; i < s.nr(); ++i) {
            const double m2 = std::exp(2.0 * psi[i]);
            for (std::size_t j = 0; j < s.np(); ++j) {
                const double E = std::sqrt(m2 + s.p_grid[j] * s.p_grid[j]);
                emin = std::min(emin, E);
                emax = std::max(emax, E);
                const double f = s.at(i, j);
                dir[i * s.np() + j] =
                    have_fit ? E + cur_fit.c * std::pow(f, 1.0 / k) - cur_fit.e0 : E;
            }
        }
        for (double v : s.f) fmax = std::max(fmax, v);
        if (!have_fit) {
            const double shift = 0.5 * (emin + emax);
            for (auto& d : dir) d -= shift;
        }
        double dmax = 0.0;
        for (double d : dir) dmax = std::max(dmax, std::abs(d));
        const double dir_scale = fmax / std::max(dmax, 1e-12);

        bool accepted = false;
        double tau = 1.0;
        for (int bt = 0; bt < 24; ++bt, tau *= 0.5) {
            PhaseSpaceState trial = s;
            bool nonzero = false;
            for (std::size_t m = 0; m < trial.f.size(); ++m) {
                trial.f[m] = std::max(0.0, trial.f[m] - tau * dir_scale * dir[m]);
                nonzero = nonzero || trial.f[m] > 0.0;
            }
            if (!nonzero) continue;
            std::vector<double> tpsi;
            try {
                renormalize(trial, M, J, q);
                tpsi = greens_solve(trial, cfg.greens);
            } catch (const std::exception&) {
                continue;
            }
            const double te = reduced_energy(trial, tpsi);
            if (te < energy) {
                s = std::move(trial);
                psi = std::move(tpsi);
                energy = te;
                accepted = true;
                break;
            }
        }

        window_hist.push_back(energy);
        if (window_hist.size() > static_cast<std::size_t>(cfg.window)) {
            const double drop =
                window_hist[window_hist.size() - 1 - cfg.window] - energy;
            if (drop < cfg.energy_tol * std::max(1.0, std::abs(energy))) break;
        }
        if (!accepted) {
            if (!fitted_phase) {
                fitted_phase = true; // raw phase stalled: refine with the fit
            } else {
                break;
            }
        }
    }

    out.iterations = it;
    out.state = s;
    out.state.phi = psi;
    out.energy = energy;
    const FunctionalReport rep = compute_functionals(out.state, q);
    out.mass = rep.mass;
    out.lq_norm = rep.lq_norm;
    const auto fit = detail::kkt_fit(s, psi, k);
    out.kkt_e0 = fit.e0;
    out.kkt_c = fit.c;
    out.kkt_residual = fit.residual;
    out.below_mass_threshold = energy >= M * (1.0 - 1e-9);
    out.trace.push_back({it, energy, fit.residual});
    return out;
}

} // namespace nvpoly
