#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace nvpoly {

/// Spherically symmetric, isotropic-in-momentum phase-space state on a
/// tensor grid: f(|x|,|p|) on r_grid x p_grid plus the field phi(|x|) and
/// its time derivative phi_t(|x|).
struct PhaseSpaceState {
    std::vector<double> r_grid; // strictly increasing, strictly positive
    std::vector<double> p_grid; // strictly increasing, nonnegative
    std::vector<double> f;      // row-major (r index major), nonnegative
    std::vector<double> phi;    // on r_grid
    std::vector<double> phi_t;  // on r_grid, may be all zero

    std::size_t nr() const { return r_grid.size(); }
    std::size_t np() const { return p_grid.size(); }
    double& at(std::size_t i, std::size_t j) { return f[i * p_grid.size() + j]; }
    double at(std::size_t i, std::size_t j) const { return f[i * p_grid.size() + j]; }

    bool is_static(double tol = 0.0) const {
        for (double v : phi_t)
            if (std::abs(v) > tol) return false;
        return true;
    }

    void validate() const {
        if (r_grid.size() < 2 || p_grid.size() < 2)
            throw std::invalid_argument("PhaseSpaceState: grids need at least 2 nodes");
        if (!(r_grid.front() > 0.0))
            throw std::invalid_argument("PhaseSpaceState: radii must be strictly positive");
        for (std::size_t i = 0; i + 1 < r_grid.size(); ++i)
            if (!(r_grid[i] < r_grid[i + 1]))
                throw std::invalid_argument("PhaseSpaceState: r_grid not increasing");
        if (!(p_grid.front() >= 0.0))
            throw std::invalid_argument("PhaseSpaceState: momenta must be nonnegative");
        for (std::size_t j = 0; j + 1 < p_grid.size(); ++j)
            if (!(p_grid[j] < p_grid[j + 1]))
                throw std::invalid_argument("PhaseSpaceState: p_grid not increasing");
        if (f.size() != r_grid.size() * p_grid.size())
            throw std::invalid_argument("PhaseSpaceState: f size mismatch");
        if (phi.size() != r_grid.size() || phi_t.size() != r_grid.size())
            throw std::invalid_argument("PhaseSpaceState: field size mismatch");
        for (double v : f) {
            if (!(v >= 0.0)) throw std::invalid_argument("PhaseSpaceState: f must be >= 0");
        }
        for (double v : phi)
            if (!std::isfinite(v))
                throw std::invalid_argument("PhaseSpaceState: phi must be finite");
        for (double v : phi_t)
            if (!std::isfinite(v))
                throw std::invalid_argument("PhaseSpaceState: phi_t must be finite");
    }
};

/// Every conserved or diagnostic scalar of a state. The hamiltonian is the
/// exact sum of its three parts. virial_lhs is the field-side of the virial
/// identity evaluated through the potential-source pairing -1/2 int phi g dx,
/// which equals 1/2 int |grad phi|^2 dx whenever phi is the self-consistent
/// decaying field of f; that pairing needs only the stored (compact) support.
struct FunctionalReport {
    double mass = 0.0;
    double e_kin = 0.0;
    double e_field = 0.0;
    double e_field_t = 0.0;
    double hamiltonian = 0.0;
    double lq_norm = 0.0;
    double conformal = 0.0;
    bool conformal_truncated = false; // static 1/r^2 tails make E_C grid-dependent
    bool boundary_support = false;    // f does not vanish at the grid edge; the
                                      // caller chose r_max or p_max too small
    double q0 = 0.0;
    double virial_lhs = 0.0;
    double virial_rhs = 0.0;
};

/// Pointwise densities of the local conservation laws on r_grid.
struct LocalDensities {
    std::vector<double> e;         // local energy density
    std::vector<double> q_r;       // radial local momentum density
    std::vector<double> tau_trace; // trace of the local stress tensor
};

} // namespace nvpoly
