#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace nvpoly {

inline constexpr double pi = std::numbers::pi;

/// Tolerances for the adaptive momentum-space quadratures.
struct QuadratureConfig {
    double abs_tol = 1e-12;
    double rel_tol = 1e-13;
    int max_depth = 60;
    long max_intervals = 1000000;
};

namespace detail {

// Gauss 7 / Kronrod 15 nodes and weights on [-1,1].
// Columns: abscissa, Gauss weight, Kronrod weight.
inline constexpr double gk15[8][3] = {
    {0.000000000000000, 0.417959183673469, 0.209482141084728},
    {0.405845151377397, 0.381830050505119, 0.190350578064785},
    {0.741531185599394, 0.279705391489277, 0.140653259715525},
    {0.949107912342759, 0.129484966168870, 0.063092092629979},
    {0.207784955007898, 0.0, 0.204432940075298},
    {0.586087235467691, 0.0, 0.169004726639267},
    {0.864864423359769, 0.0, 0.104790010322250},
    {0.991455371120813, 0.0, 0.022935322010529},
};

template <class F>
double gk15_panel(F&& f, double a, double b, double& err) {
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double f0 = f(mid);
    double g7 = gk15[0][1] * f0;
    double k15 = gk15[0][2] * f0;
    for (int i = 1; i < 8; ++i) {
        const double dx = half * gk15[i][0];
        const double fi = f(mid + dx) + f(mid - dx);
        g7 += gk15[i][1] * fi;
        k15 += gk15[i][2] * fi;
    }
    g7 *= half;
    k15 *= half;
    err = std::abs(k15 - g7);
    return k15;
}

} // namespace detail

/// Adaptive Gauss-Kronrod integration of f over [a,b] by recursive bisection.
/// A panel is accepted when its embedded error estimate fits within its share
/// of the absolute budget or within rel_tol of the running total.
template <class F>
double integrate_adaptive(F&& f, double a, double b, const QuadratureConfig& cfg = {}) {
    if (!(b > a)) return 0.0;

    struct Panel {
        double a, b;
        int depth;
    };
    std::vector<Panel> stack;
    stack.push_back({a, b, 0});

    double err0 = 0.0;
    double estimate = detail::gk15_panel(f, a, b, err0);
    const double span = b - a;

    double total = 0.0;
    long used = 1;
    while (!stack.empty()) {
        const Panel p = stack.back();
        stack.pop_back();
        double err = 0.0;
        const double v = detail::gk15_panel(f, p.a, p.b, err);
        if (!std::isfinite(v))
            throw std::runtime_error("integrate_adaptive: non-finite integrand");
        const double frac = (p.b - p.a) / span;
        const double budget =
            std::max(cfg.abs_tol * frac, cfg.rel_tol * std::abs(estimate) * frac);
        if (err <= budget || p.depth >= cfg.max_depth) {
            total += v;
            continue;
        }
        if (used + 2 > cfg.max_intervals)
            throw std::runtime_error("integrate_adaptive: interval cap exceeded");
        const double mid = 0.5 * (p.a + p.b);
        stack.push_back({mid, p.b, p.depth + 1});
        stack.push_back({p.a, mid, p.depth + 1});
        used += 2;
        estimate = std::max(std::abs(estimate), std::abs(total) + std::abs(v));
    }
    return total;
}

/// Nodal weights of the composite Simpson rule on an arbitrary strictly
/// increasing grid. An odd final interval is closed with the quadratic
/// through the last three nodes. Two nodes fall back to the trapezoid.
inline std::vector<double> simpson_weights(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n < 2) throw std::invalid_argument("simpson_weights: need at least 2 nodes");
    std::vector<double> w(n, 0.0);
    if (n == 2) {
        w[0] = w[1] = 0.5 * (x[1] - x[0]);
        return w;
    }
    std::size_t i = 0;
    while (i + 2 <= n - 1) {
        const double h1 = x[i + 1] - x[i];
        const double h2 = x[i + 2] - x[i + 1];
        if (!(h1 > 0.0) || !(h2 > 0.0))
            throw std::invalid_argument("simpson_weights: grid not strictly increasing");
        const double h = h1 + h2;
        w[i] += h / 6.0 * (2.0 - h2 / h1);
        w[i + 1] += h * h * h / (6.0 * h1 * h2);
        w[i + 2] += h / 6.0 * (2.0 - h1 / h2);
        i += 2;
    }
    if (i == n - 2) {
        // leftover interval [x_{n-2}, x_{n-1}]
        const double h1 = x[n - 2] - x[n - 3];
        const double h2 = x[n - 1] - x[n - 2];
        w[n - 1] += h2 * (2.0 * h2 + 3.0 * h1) / (6.0 * (h1 + h2));
        w[n - 2] += h2 * (h2 + 3.0 * h1) / (6.0 * h1);
        w[n - 3] -= h2 * h2 * h2 / (6.0 * h1 * (h1 + h2));
    }
    return w;
}

inline std::vector<double> trapezoid_weights(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n < 2) throw std::invalid_argument("trapezoid_weights: need at least 2 nodes");
    std::vector<double> w(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double h = x[i + 1] - x[i];
        if (!(h > 0.0))
            throw std::invalid_argument("trapezoid_weights: grid not strictly increasing");
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }
    return w;
}

/// Second-order finite-difference derivative on a non-uniform grid,
/// one-sided at both ends.
inline std::vector<double> gradient(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (y.size() != n || n < 2) throw std::invalid_argument("gradient: size mismatch");
    std::vector<double> d(n);
    if (n == 2) {
        d[0] = d[1] = (y[1] - y[0]) / (x[1] - x[0]);
        return d;
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double hm = x[i] - x[i - 1];
        const double hp = x[i + 1] - x[i];
        d[i] = (-hp / (hm * (hm + hp))) * y[i - 1] + ((hp - hm) / (hm * hp)) * y[i] +
               (hm / (hp * (hm + hp))) * y[i + 1];
    }
    {
        const double h1 = x[1] - x[0], h2 = x[2] - x[1];
        d[0] = -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * y[0] + (h1 + h2) / (h1 * h2) * y[1] -
               h1 / (h2 * (h1 + h2)) * y[2];
    }
    {
        const double h1 = x[n - 2] - x[n - 3], h2 = x[n - 1] - x[n - 2];
        d[n - 1] = h2 / (h1 * (h1 + h2)) * y[n - 3] - (h1 + h2) / (h1 * h2) * y[n - 2] +
                   (2.0 * h2 + h1) / (h2 * (h1 + h2)) * y[n - 1];
    }
    return d;
}

} // namespace nvpoly
