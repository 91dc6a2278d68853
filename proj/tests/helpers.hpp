#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "nvpoly/state.hpp"

namespace testutil {

inline std::vector<double> linspace(double a, double b, std::size_t n) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i)
        x[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    return x;
}

/// State sampled from analytic f(r,p), phi(r), phi_t(r) on uniform grids.
inline nvpoly::PhaseSpaceState sample_state(
    std::size_t nr, std::size_t np, double r_max, double p_max,
    const std::function<double(double, double)>& f,
    const std::function<double(double)>& phi,
    const std::function<double(double)>& phi_t = [](double) { return 0.0; },
    double r_min = -1.0) {
    nvpoly::PhaseSpaceState s;
    if (r_min <= 0.0) r_min = r_max / static_cast<double>(nr);
    s.r_grid = linspace(r_min, r_max, nr);
    s.p_grid = linspace(0.0, p_max, np);
    s.phi.resize(nr);
    s.phi_t.resize(nr);
    s.f.resize(nr * np);
    for (std::size_t i = 0; i < nr; ++i) {
        s.phi[i] = phi(s.r_grid[i]);
        s.phi_t[i] = phi_t ? phi_t(s.r_grid[i]) : 0.0;
        for (std::size_t j = 0; j < np; ++j) s.at(i, j) = f(s.r_grid[i], s.p_grid[j]);
    }
    return s;
}

/// Deterministic family of smooth nonnegative bump distributions.
inline nvpoly::PhaseSpaceState random_bump_state(unsigned seed, std::size_t nr = 48,
                                                 std::size_t np = 48) {
    std::mt19937 gen(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double r_max = 2.0 + 4.0 * uni(gen);
    const double p_max = 0.5 + 2.0 * uni(gen);
    const int n_bumps = 1 + static_cast<int>(3.0 * uni(gen));
    struct Bump {
        double amp, rc, pc, sr, sp;
    };
    std::vector<Bump> bumps;
    for (int b = 0; b < n_bumps; ++b)
        bumps.push_back({0.1 + uni(gen), 0.6 * r_max * uni(gen), 0.6 * p_max * uni(gen),
                         0.08 * r_max + 0.2 * r_max * uni(gen),
                         0.08 * p_max + 0.2 * p_max * uni(gen)});
    return sample_state(
        nr, np, r_max, p_max,
        [bumps](double r, double p) {
            double v = 0.0;
            for (const auto& b : bumps) {
                const double dr = (r - b.rc) / b.sr;
                const double dp = (p - b.pc) / b.sp;
                v += b.amp * std::exp(-0.5 * (dr * dr + dp * dp));
            }
            return v;
        },
        [](double) { return 0.0; });
}

/// Spearman rank correlation of two equally sized samples.
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    auto ranks = [&](const std::vector<double>& v) {
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) {
            return v[x] < v[y];
        });
        std::vector<double> rk(n);
        for (std::size_t i = 0; i < n; ++i) rk[idx[i]] = static_cast<double>(i);
        return rk;
    };
    const std::vector<double> ra = ranks(a), rb = ranks(b);
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= n;
    mb /= n;
    double num = 0, da = 0, db = 0;
    for (std::size_t i = 0; i < n; ++i) {
        num += (ra[i] - ma) * (rb[i] - mb);
        da += (ra[i] - ma) * (ra[i] - ma);
        db += (rb[i] - mb) * (rb[i] - mb);
    }
    return num / std::sqrt(da * db);
}

} // namespace testutil
