// Quadrature kit: Gauss-Legendre composite rules for half-line integrals,
// cumulative trapezoid on sampled grids, and log-domain integration of
// exponentially varying integrands (cells fitted as exp(linear)).
#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "bubbletree/numerics.hpp"

namespace bubbletree {

namespace detail {
// 16-point Gauss-Legendre nodes/weights on [-1,1].
inline constexpr double gl16_x[8] = {
    0.0950125098376374, 0.2816035507792589, 0.4580167776572274,
    0.6178762444026438, 0.7554044083550030, 0.8656312023878318,
    0.9445750230732326, 0.9894009349916499};
inline constexpr double gl16_w[8] = {
    0.1894506104550685, 0.1826034150449236, 0.1691565193950025,
    0.1495959888165767, 0.1246289712555339, 0.0951585116824928,
    0.0622535239386479, 0.0271524594117541};
} // namespace detail

template <typename F>
double gauss16(F&& f, double a, double b) {
    double c = 0.5 * (a + b), h = 0.5 * (b - a), s = 0;
    for (int i = 0; i < 8; ++i) {
        s += detail::gl16_w[i] *
             (f(c + h * detail::gl16_x[i]) + f(c - h * detail::gl16_x[i]));
    }
    return s * h;
}

// Composite Gauss-Legendre with panel doubling until the estimate settles.
template <typename F>
double integrate(F&& f, double a, double b, double tol = 1e-12, int max_level = 12) {
    double prev = gauss16(f, a, b);
    int panels = 2;
    for (int lvl = 0; lvl < max_level; ++lvl, panels *= 2) {
        double s = 0, h = (b - a) / panels;
        for (int p = 0; p < panels; ++p) s += gauss16(f, a + p * h, a + (p + 1) * h);
        if (std::abs(s - prev) <= tol * std::max(1.0, std::abs(s))) return s;
        prev = s;
    }
    return prev;
}

// Integral over [0, inf) via the split at 1 and u -> 1/u on the far piece.
// The integrand must decay faster than 1/x^2.
template <typename F>
double integrate_half_line(F&& f, double tol = 1e-12) {
    auto near = [&](double u) { return f(u); };
    auto far = [&](double u) { return u > 0 ? f(1.0 / u) / (u * u) : 0.0; };
    return integrate(near, 0.0, 1.0, tol) + integrate(far, 0.0, 1.0, tol);
}

// Trapezoid on samples over grid x (any monotone direction).
inline double trapezoid(std::span<const double> x, std::span<const double> f) {
    double s = 0;
    for (size_t i = 0; i + 1 < x.size(); ++i)
        s += 0.5 * (f[i] + f[i + 1]) * (x[i + 1] - x[i]);
    return s;
}

// Cumulative integral from x[0]; out[i] = int_{x0}^{x_i} f.
inline std::vector<double> cumulative_trapezoid(std::span<const double> x,
                                                std::span<const double> f) {
    std::vector<double> out(x.size(), 0.0);
    for (size_t i = 0; i + 1 < x.size(); ++i)
        out[i + 1] = out[i] + 0.5 * (f[i] + f[i + 1]) * (x[i + 1] - x[i]);
    return out;
}

// One cell of int exp(y(t)) dt with y linear between the endpoints, returned
// as a log. Exact for exponential integrands; degrades to the midpoint rule
// when the exponent is flat.
inline double log_int_exp_cell(double ya, double yb, double dt) {
    if (dt <= 0) throw std::invalid_argument("log_int_exp_cell: dt must be > 0");
    double d = yb - ya;
    if (std::abs(d) < 1e-6) {
        // expm1(d)/d -> 1 + d/2; keep one correction term
        return ya + std::log(dt) + std::log1p(0.5 * d + d * d / 6.0);
    }
    double hi = std::max(ya, yb);
    // (exp(yb) - exp(ya))/ (d/dt)
    return hi + std::log1p(-std::exp(-std::abs(d))) + std::log(dt) - std::log(std::abs(d));
}

// log of int_{x.back()}^{x.front()} exp(y) dt on a DECREASING grid x,
// accumulated from the top: out[i] = log int_{x[i]}^{x[0]} exp(y).
inline std::vector<double> cumulative_log_int_exp(std::span<const double> x,
                                                  std::span<const double> y) {
    size_t n = x.size();
    std::vector<double> out(n, neg_inf);
    for (size_t i = 0; i + 1 < n; ++i) {
        double dt = x[i] - x[i + 1];
        double cell = log_int_exp_cell(y[i + 1], y[i], dt);
        out[i + 1] = log_add(out[i], cell);
    }
    return out;
}

} // namespace bubbletree
