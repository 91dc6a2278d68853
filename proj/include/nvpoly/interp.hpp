#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace nvpoly {

/// Cubic Hermite evaluation on [x0,x1] given endpoint values and derivatives.
inline double hermite(double x, double x0, double x1, double y0, double y1, double d0,
                      double d1) {
    const double h = x1 - x0;
    const double t = (x - x0) / h;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * h * d0 +
           (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * h * d1;
}

inline std::size_t locate(std::span<const double> x, double q) {
    // index i with x[i] <= q < x[i+1], clamped to the grid
    auto it = std::upper_bound(x.begin(), x.end(), q);
    if (it == x.begin()) return 0;
    std::size_t i = static_cast<std::size_t>(it - x.begin()) - 1;
    return std::min(i, x.size() - 2);
}

inline double linear_interp(std::span<const double> x, std::span<const double> y, double q) {
    if (q <= x.front()) return y.front();
    if (q >= x.back()) return y.back();
    const std::size_t i = locate(x, q);
    const double t = (q - x[i]) / (x[i + 1] - x[i]);
    return (1.0 - t) * y[i] + t * y[i + 1];
}

/// Monotonicity-preserving cubic interpolant (Fritsch-Carlson slopes).
class Pchip {
public:
    Pchip() = default;
    Pchip(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
        const std::size_t n = x_.size();
        if (n < 2 || y_.size() != n) throw std::invalid_argument("Pchip: bad sizes");
        d_.assign(n, 0.0);
        std::vector<double> h(n - 1), s(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            h[i] = x_[i + 1] - x_[i];
            if (!(h[i] > 0.0)) throw std::invalid_argument("Pchip: grid not increasing");
            s[i] = (y_[i + 1] - y_[i]) / h[i];
        }
        if (n == 2) {
            d_[0] = d_[1] = s[0];
            return;
        }
        for (std::size_t i = 1; i + 1 < n; ++i) {
            if (s[i - 1] * s[i] <= 0.0) {
                d_[i] = 0.0;
            } else {
                const double w1 = 2.0 * h[i] + h[i - 1];
                const double w2 = h[i] + 2.0 * h[i - 1];
                d_[i] = (w1 + w2) / (w1 / s[i - 1] + w2 / s[i]);
            }
        }
        d_[0] = edge_slope(h[0], h[1], s[0], s[1]);
        d_[n - 1] = edge_slope(h[n - 2], h[n - 3], s[n - 2], s[n - 3]);
    }

    double operator()(double q) const {
        if (q <= x_.front()) return y_.front() + d_.front() * (q - x_.front());
        if (q >= x_.back()) return y_.back() + d_.back() * (q - x_.back());
        const std::size_t i = locate(x_, q);
        return hermite(q, x_[i], x_[i + 1], y_[i], y_[i + 1], d_[i], d_[i + 1]);
    }

private:
    static double edge_slope(double h0, double h1, double s0, double s1) {
        double d = ((2.0 * h0 + h1) * s0 - h0 * s1) / (h0 + h1);
        if (d * s0 <= 0.0)
            d = 0.0;
        else if (s0 * s1 <= 0.0 && std::abs(d) > 3.0 * std::abs(s0))
            d = 3.0 * s0;
        return d;
    }

    std::vector<double> x_, y_, d_;
};

} // namespace nvpoly
