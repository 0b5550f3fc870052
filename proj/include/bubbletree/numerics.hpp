// Small numeric helpers shared across the library: finite differences on
// nonuniform grids, log-domain accumulation, and least-squares exponent fits.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace bubbletree {

inline constexpr double pi = 3.14159265358979323846;

inline constexpr double neg_inf = -std::numeric_limits<double>::infinity();
inline constexpr double pos_inf = std::numeric_limits<double>::infinity();

// log(exp(a) + exp(b)) without overflow.
inline double log_add(double a, double b) {
    if (a == neg_inf) return b;
    if (b == neg_inf) return a;
    double hi = std::max(a, b), lo = std::min(a, b);
    return hi + std::log1p(std::exp(lo - hi));
}

// log(exp(a) - exp(b)) for a >= b.
inline double log_sub(double a, double b) {
    if (b == neg_inf) return a;
    if (a < b) throw std::domain_error("log_sub: negative result");
    if (a == b) return neg_inf;
    return a + std::log1p(-std::exp(b - a));
}

inline double log_sum(std::span<const double> logs) {
    double m = neg_inf;
    for (double v : logs) m = std::max(m, v);
    if (m == neg_inf || m == pos_inf) return m;
    double s = 0.0;
    for (double v : logs) s += std::exp(v - m);
    return m + std::log(s);
}

// First derivative at interior node from three nonuniformly spaced samples.
// hl = x1-x0, hr = x2-x1; returns f'(x1).
inline double deriv3_mid(double f0, double f1, double f2, double hl, double hr) {
    return (-hr / (hl * (hl + hr))) * f0 + ((hr - hl) / (hl * hr)) * f1 +
           (hl / (hr * (hl + hr))) * f2;
}

// Second derivative at x1 from the same stencil (exact for quadratics).
inline double deriv3_mid2(double f0, double f1, double f2, double hl, double hr) {
    return 2.0 * (hl * f2 - (hl + hr) * f1 + hr * f0) / (hl * hr * (hl + hr));
}

// One-sided first derivative at x0 of samples (x0,x1,x2), steps h1 = x1-x0, h2 = x2-x1.
inline double deriv3_left(double f0, double f1, double f2, double h1, double h2) {
    double a = h1 + h2;
    return (-(2.0 * h1 + h2) / (h1 * a)) * f0 + (a / (h1 * h2)) * f1 -
           (h1 / (h2 * a)) * f2;
}

// Sampled derivative of f along grid x (nonuniform), second order.
inline std::vector<double> sampled_derivative(std::span<const double> x,
                                              std::span<const double> f) {
    size_t n = x.size();
    if (n < 3 || f.size() != n)
        throw std::invalid_argument("sampled_derivative: need >= 3 samples");
    std::vector<double> d(n);
    for (size_t i = 1; i + 1 < n; ++i)
        d[i] = deriv3_mid(f[i - 1], f[i], f[i + 1], x[i] - x[i - 1], x[i + 1] - x[i]);
    d[0] = deriv3_left(f[0], f[1], f[2], x[1] - x[0], x[2] - x[1]);
    // stencil is exact for quadratics, so it also serves the reversed end
    d[n - 1] = deriv3_left(f[n - 1], f[n - 2], f[n - 3], x[n - 2] - x[n - 1],
                           x[n - 3] - x[n - 2]);
    return d;
}

// 4th-order central first derivative with step h.
template <typename F>
double central_derivative4(F&& f, double x, double h) {
    return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h);
}

// 2nd-order central first/second derivatives.
template <typename F>
double central_derivative2(F&& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2 * h);
}
template <typename F>
double central_second_derivative(F&& f, double x, double h) {
    return (f(x + h) - 2 * f(x) + f(x - h)) / (h * h);
}

// Least-squares slope of y against x.
inline double ls_slope(std::span<const double> x, std::span<const double> y) {
    size_t n = x.size();
    if (n < 2 || y.size() != n) throw std::invalid_argument("ls_slope: bad sizes");
    double mx = 0, my = 0;
    for (size_t i = 0; i < n; ++i) { mx += x[i]; my += y[i]; }
    mx /= double(n); my /= double(n);
    double sxx = 0, sxy = 0;
    for (size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    return sxy / sxx;
}

// Fit |y| ~ C * x^p on the tail of positive samples; returns p.
inline double fit_power(std::span<const double> x, std::span<const double> y) {
    std::vector<double> lx, ly;
    for (size_t i = 0; i < x.size(); ++i) {
        if (x[i] > 0 && std::abs(y[i]) > 0) {
            lx.push_back(std::log(x[i]));
            ly.push_back(std::log(std::abs(y[i])));
        }
    }
    if (lx.size() < 2) throw std::runtime_error("fit_power: not enough usable samples");
    return ls_slope(lx, ly);
}

inline double sup_abs(std::span<const double> v) {
    double m = 0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

inline double l2_diff(std::span<const double> a, std::span<const double> b) {
    double s = 0;
    for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

} // namespace bubbletree
