// Grids: decreasing geometric time grids for the modulation solvers and
// radial grids (uniform and log-spaced) for field storage.
#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace bubbletree {

// Decreasing time samples in (t_min, t0], geometric spacing.
inline std::vector<double> geometric_time_grid(double t0, double t_min,
                                               int pts_per_decade = 512) {
    if (!(t_min > 0) || !(t0 > t_min))
        throw std::invalid_argument("geometric_time_grid: need 0 < t_min < t0");
    if (pts_per_decade < 16)
        throw std::invalid_argument("geometric_time_grid: too few points per decade");
    double decades = std::log10(t0 / t_min);
    int n = std::max(2, int(std::ceil(decades * pts_per_decade)) + 1);
    std::vector<double> t(n);
    double step = std::log(t0 / t_min) / (n - 1);
    for (int i = 0; i < n; ++i) t[i] = t0 * std::exp(-step * i);
    t.back() = t_min;
    return t;
}

// Log-spaced radial nodes in [r_min, r_max].
inline std::vector<double> log_radial_grid(double r_min, double r_max, int n) {
    if (!(r_min > 0) || !(r_max > r_min) || n < 2)
        throw std::invalid_argument("log_radial_grid: bad parameters");
    std::vector<double> r(n);
    double step = std::log(r_max / r_min) / (n - 1);
    for (int i = 0; i < n; ++i) r[i] = r_min * std::exp(step * i);
    r.back() = r_max;
    return r;
}

// Uniform radial grid on [0, r_out] including the axis node.
struct RadialGrid {
    std::vector<double> r;
    double dr = 0;
    double r_out = 0;

    static RadialGrid uniform(double r_out, double dr) {
        if (!(r_out > 0) || !(dr > 0) || dr >= r_out)
            throw std::invalid_argument("RadialGrid: bad parameters");
        RadialGrid g;
        int n = int(std::round(r_out / dr)) + 1;
        g.r.resize(n);
        for (int i = 0; i < n; ++i) g.r[i] = i * dr;
        g.dr = dr;
        g.r_out = g.r.back();
        return g;
    }

    size_t size() const { return r.size(); }
};

} // namespace bubbletree
