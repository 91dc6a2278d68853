#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "nvpoly/interp.hpp"
#include "nvpoly/quadrature.hpp"
#include "nvpoly/state.hpp"

namespace nvpoly {

/// Ansatz constants (k, E0, c) of the isotropic polytrope
/// f0 = ((E0 - E)/c)_+^k with E = sqrt(e^{2 phi} + |p|^2).
struct PolytropeParams {
    double k = 1.0;
    double e0 = 0.5;
    double c = 1.0;

    void validate() const {
        if (!(k > 0.0 && k < 2.0))
            throw std::invalid_argument("PolytropeParams: k must lie in (0,2)");
        if (!(e0 > 0.0 && e0 < 1.0))
            throw std::invalid_argument("PolytropeParams: E0 must lie in (0,1)");
        if (!(c > 0.0)) throw std::invalid_argument("PolytropeParams: c must be positive");
    }
};

namespace detail {

// 1 - sqrt(m2 + xi^2) evaluated without cancellation, with L2 = 1 - m2;
// clamped at zero so roundoff past the support edge cannot turn negative.
inline double one_minus_e(double m2, double L2, double xi) {
    return std::max(0.0, (L2 - xi * xi) / (1.0 + std::sqrt(m2 + xi * xi)));
}

} // namespace detail

/// Scaled source integral
///   mu(psi) = 4 pi/(k+1) * int_0^{sqrt(1-e^{2 psi})} (1 - sqrt(e^{2 psi}+xi^2))^{k+1} dxi,
/// the momentum integral of f~/E~ for the unit-cutoff ansatz f~ = (1-E~)_+^k.
/// Returns 0 for psi >= 0 (empty well).
inline double mu_scaled(double psi, double k, const QuadratureConfig& cfg = {}) {
    if (!std::isfinite(psi)) throw std::invalid_argument("mu_scaled: psi not finite");
    if (!(k > 0.0 && k <= 2.0)) throw std::invalid_argument("mu_scaled: k out of (0,2]");
    if (psi >= 0.0) return 0.0;
    const double m2 = std::exp(2.0 * psi);
    const double L2 = -std::expm1(2.0 * psi);
    const double L = std::sqrt(L2);
    const double value = integrate_adaptive(
        [&](double xi) { return std::pow(detail::one_minus_e(m2, L2, xi), k + 1.0); }, 0.0,
        L, cfg);
    return 4.0 * pi / (k + 1.0) * value;
}

/// Which evaluation of the k=1 closed form to use. The expression printed in
/// the source material carries a (1 - 2 e^{2 psi}) factor that makes the value
/// negative for moderate psi; direct integration gives (1 + 2 e^{2 psi}).
/// The corrected form is the default, the printed one stays available for
/// documentation of the discrepancy.
enum class K1Form { Corrected, AsPrinted };

/// Closed-form evaluation of mu_scaled(psi, k=1):
///   (2 pi/3) [ L (1 + 2 m^2) - 3 m^2 artanh(L) ],  L = sqrt(1 - m^2), m = e^psi.
/// Near psi = 0 the bracket cancels catastrophically, so a series in L is used:
///   mu = 4 pi sum_{n>=2} L^{2n+1} / (4 n^2 - 1).
inline double mu_closed_k1(double psi, K1Form form = K1Form::Corrected) {
    if (!std::isfinite(psi)) throw std::invalid_argument("mu_closed_k1: psi not finite");
    if (psi >= 0.0) return 0.0;
    const double m2 = std::exp(2.0 * psi);
    const double L2 = -std::expm1(2.0 * psi);
    const double L = std::sqrt(L2);
    // artanh(L) = ln((1+L)/m) = log1p(L) - psi, stable down to L -> 1
    const double artanh = std::log1p(L) - psi;
    if (form == K1Form::AsPrinted)
        return 2.0 * pi / 3.0 * (L * (1.0 - 2.0 * m2) - 3.0 * m2 * artanh);
    if (L < 0.5) {
        double sum = 0.0;
        double Lpow = L2 * L2 * L; // L^5
        for (int n = 2; n < 200; ++n) {
            const double term = Lpow / (4.0 * n * n - 1.0);
            sum += term;
            if (term < 1e-17 * sum) break;
            Lpow *= L2;
        }
        return 4.0 * pi * sum;
    }
    return 2.0 * pi / 3.0 * (L * (1.0 + 2.0 * m2) - 3.0 * m2 * artanh);
}

/// Scaled number density: rho(psi) = 4 pi int_0^L p^2 (1 - sqrt(m^2+p^2))^k dp.
inline double rho_scaled(double psi, double k, const QuadratureConfig& cfg = {}) {
    if (!std::isfinite(psi)) throw std::invalid_argument("rho_scaled: psi not finite");
    if (psi >= 0.0) return 0.0;
    const double m2 = std::exp(2.0 * psi);
    const double L2 = -std::expm1(2.0 * psi);
    const double L = std::sqrt(L2);
    const double value = integrate_adaptive(
        [&](double p) { return p * p * std::pow(detail::one_minus_e(m2, L2, p), k); }, 0.0,
        L, cfg);
    return 4.0 * pi * value;
}

/// Momentum moments of the unit-cutoff scaled ansatz f~ = (1 - E~)_+^k,
/// all per unit volume at fixed scaled potential psi <= 0:
///   Density:  int f~ dp            Energy:  int E~ f~ dp
///   Virial:   int |p|^2/E~ f~ dp   Casimir: int f~^{1+1/k} dp
enum class ScaledMoment { Density, Energy, Virial, Casimir };

inline double scaled_moment(double psi, double k, ScaledMoment mom,
                            const QuadratureConfig& cfg = {}) {
    if (!std::isfinite(psi)) throw std::invalid_argument("scaled_moment: psi not finite");
    if (psi >= 0.0) return 0.0;
    const double m2 = std::exp(2.0 * psi);
    const double L2 = -std::expm1(2.0 * psi);
    const double L = std::sqrt(L2);
    auto f = [&](double p) {
        const double E = std::sqrt(m2 + p * p);
        const double core = std::pow(detail::one_minus_e(m2, L2, p), k);
        switch (mom) {
            case ScaledMoment::Density: return p * p * core;
            case ScaledMoment::Energy: return p * p * E * core;
            case ScaledMoment::Virial: return p * p * p * p / E * core;
            case ScaledMoment::Casimir:
                return p * p * core * detail::one_minus_e(m2, L2, p);
        }
        return 0.0;
    };
    return 4.0 * pi * integrate_adaptive(f, 0.0, L, cfg);
}

/// Physical-variable momentum moments of f0 = ((E0-E)/c)_+^k at potential phi,
/// by direct quadrature in physical momenta (no rescaling shortcut).
enum class PhysicalMoment { Density, Energy, Virial, Casimir };

inline double physical_moment(double phi, const PolytropeParams& par, PhysicalMoment mom,
                              const QuadratureConfig& cfg = {}) {
    par.validate();
    if (!std::isfinite(phi)) throw std::invalid_argument("physical_moment: phi not finite");
    const double m = std::exp(phi);
    if (m >= par.e0) return 0.0;
    const double m2 = m * m;
    const double P2 = (par.e0 - m) * (par.e0 + m);
    const double P = std::sqrt(P2);
    const double ck = std::pow(par.c, -par.k);
    auto cutoff = [&](double p) {
        const double E = std::sqrt(m2 + p * p);
        return std::max(0.0, (P2 - p * p) / (par.e0 + E)); // E0 - E, clamped
    };
    auto f = [&](double p) {
        const double E = std::sqrt(m2 + p * p);
        const double core = std::pow(cutoff(p), par.k);
        switch (mom) {
            case PhysicalMoment::Density: return p * p * core;
            case PhysicalMoment::Energy: return p * p * E * core;
            case PhysicalMoment::Virial: return p * p * p * p / E * core;
            case PhysicalMoment::Casimir:
                return p * p * core * cutoff(p) / par.c;
        }
        return 0.0;
    };
    return 4.0 * pi * ck * integrate_adaptive(f, 0.0, P, cfg);
}

/// Momentum integral of f0/E for the polytrope ansatz,
///   4 pi c^{-k} int_{e^phi}^{E0} sqrt(E^2 - e^{2 phi}) (E0 - E)^k dE,
/// evaluated after the substitution xi = sqrt(E^2 - e^{2 phi}) which removes
/// the square-root behavior at the lower limit. Vanishes for e^phi >= E0 and
/// is bounded uniformly in phi.
inline double source_physical(double phi, const PolytropeParams& par,
                              const QuadratureConfig& cfg = {}) {
    par.validate();
    if (!std::isfinite(phi)) return 0.0;
    const double m = std::exp(phi);
    if (m >= par.e0) return 0.0;
    const double m2 = m * m;
    const double Xi2 = (par.e0 - m) * (par.e0 + m);
    const double Xi = std::sqrt(Xi2);
    auto f = [&](double xi) {
        const double E = std::sqrt(m2 + xi * xi);
        const double cut = std::max(0.0, (Xi2 - xi * xi) / (par.e0 + E));
        return xi * xi * std::pow(cut, par.k) / E;
    };
    return 4.0 * pi * std::pow(par.c, -par.k) * integrate_adaptive(f, 0.0, Xi, cfg);
}

/// Radial profiles of the moments rho_f = int f dp and mu_f = int f dp/|p|
/// by Simpson quadrature on the stored momentum grid.
struct RhoMuProfiles {
    std::vector<double> rho;
    std::vector<double> mu;
};

inline RhoMuProfiles rho_moments(const PhaseSpaceState& s) {
    s.validate();
    if (s.p_grid.front() == 0.0) {
        // the 1/|p| weight is only grid-integrable if f vanishes at p = 0
        for (std::size_t i = 0; i < s.nr(); ++i)
            if (s.at(i, 0) != 0.0)
                throw std::invalid_argument(
                    "rho_moments: f nonzero at p = 0, 1/|p| weight not integrable");
    }
    std::vector<double> w = simpson_weights(s.p_grid);
    RhoMuProfiles out;
    out.rho.assign(s.nr(), 0.0);
    out.mu.assign(s.nr(), 0.0);
    for (std::size_t i = 0; i < s.nr(); ++i) {
        double r = 0.0, m = 0.0;
        for (std::size_t j = 0; j < s.np(); ++j) {
            const double p = s.p_grid[j];
            const double fij = s.at(i, j);
            r += w[j] * 4.0 * pi * p * p * fij;
            m += w[j] * 4.0 * pi * p * fij;
        }
        out.rho[i] = r;
        out.mu[i] = m;
    }
    return out;
}

/// Cached interpolation table of a scaled momentum integral over
/// psi in [psi_min, 0]. Stored against t = sqrt(-psi), where the integrand
/// powers (-psi)^{k+3/2} become smooth; monotone cubic nodes keep the
/// sign structure of the source. Queries below psi_min fall back to direct
/// quadrature.
class MuTable {
public:
    MuTable() = default;

    MuTable(double k, double psi_min, int nodes = 2000, const QuadratureConfig& cfg = {})
        : k_(k), psi_min_(psi_min), cfg_(cfg) {
        if (!(psi_min < 0.0)) throw std::invalid_argument("MuTable: psi_min must be < 0");
        if (nodes < 8) throw std::invalid_argument("MuTable: too few nodes");
        const double T = std::sqrt(-psi_min);
        // the first few cells next to psi = 0 cannot resolve the (-psi)^{k+3/2}
        // vanishing relatively; queries there go to direct quadrature
        t_direct_ = 4.0 * T / (nodes - 1);
        std::vector<double> t(nodes), mu(nodes), rho(nodes);
        for (int i = 0; i < nodes; ++i) {
            t[i] = T * static_cast<double>(i) / (nodes - 1);
            const double psi = (i == 0) ? 0.0 : -t[i] * t[i];
            mu[i] = mu_scaled(psi, k, cfg);
            rho[i] = rho_scaled(psi, k, cfg);
        }
        mu_ = Pchip(t, mu);
        rho_ = Pchip(std::move(t), std::move(rho));
        built_ = true;
    }

    double k() const { return k_; }
    double psi_min() const { return psi_min_; }
    bool built() const { return built_; }

    double mu(double psi) const {
        if (psi >= 0.0) return 0.0;
        if (psi < psi_min_) return mu_scaled(psi, k_, cfg_);
        const double t = std::sqrt(-psi);
        if (t < t_direct_) return mu_scaled(psi, k_, cfg_);
        return std::max(0.0, mu_(t));
    }

    double rho(double psi) const {
        if (psi >= 0.0) return 0.0;
        if (psi < psi_min_) return rho_scaled(psi, k_, cfg_);
        const double t = std::sqrt(-psi);
        if (t < t_direct_) return rho_scaled(psi, k_, cfg_);
        return std::max(0.0, rho_(t));
    }

    /// Max absolute deviation from direct quadrature, sampled between nodes.
    double validate(int samples = 512) const {
        double worst = 0.0;
        for (int i = 1; i < samples; ++i) {
            const double t = std::sqrt(-psi_min_) * (i + 0.37) / samples;
            const double psi = -t * t;
            if (psi >= 0.0 || psi < psi_min_) continue;
            worst = std::max(worst, std::abs(mu(psi) - mu_scaled(psi, k_, cfg_)));
            worst = std::max(worst, std::abs(rho(psi) - rho_scaled(psi, k_, cfg_)));
        }
        return worst;
    }

private:
    double k_ = 1.0;
    double psi_min_ = -1.0;
    double t_direct_ = 0.0;
    QuadratureConfig cfg_;
    Pchip mu_, rho_;
    bool built_ = false;
};

} // namespace nvpoly
