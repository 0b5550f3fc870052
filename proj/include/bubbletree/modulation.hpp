// Recursive scaling-parameter hierarchy in logarithmic variables.
//
// Each level solves  lam''/lam^3 - 2 (lam'/lam^2)^2 = -(bar+m)^2/lam^2  for a
// positive decreasing lam driven by a faster-growing bar(t). Substituting
// lam = e^alpha and zeta = 1/alpha' turns this into zeta' = (bar zeta)^2 - 1,
// which is handled by a 4-term asymptotic series in 1/bar plus a contractive
// fixed point for the remainder. Scales are never exponentiated: every level
// is carried as log lam, and one more log layer (log log lam) covers levels
// whose log itself overflows.
#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "bubbletree/errors.hpp"
#include "bubbletree/grid.hpp"
#include "bubbletree/numerics.hpp"
#include "bubbletree/quadrature.hpp"

namespace bubbletree::modulation {

// sqrt(16/pi): prefactor of the effective driver built from the alternating
// scale sum.
inline const double bar_prefactor = std::sqrt(16.0 / pi);

// log lambda_n(t) for lambda_n = |log t|^beta / t, 0 < t < 1.
inline double outermost_log_scale(double t, double beta) {
    if (!(t > 0.0) || !(t < 1.0))
        throw std::domain_error("outermost_log_scale: need 0 < t < 1");
    double L = -std::log(t);
    return beta * std::log(L) - std::log(t);
}

// d/dt log lambda_n = -(1/t)(1 + beta/|log t|), negative on (0,1).
inline double outermost_dlog_scale(double t, double beta) {
    double L = -std::log(t);
    return -(1.0 + beta / L) / t;
}

inline double outermost_d2log_scale(double t, double beta) {
    double L = -std::log(t);
    return (1.0 + beta * (L - 1.0) / (L * L)) / (t * t);
}

inline double outermost_d3log_scale(double t, double beta) {
    double L = -std::log(t);
    return (-2.0 - 2.0 * beta / L + 3.0 * beta / (L * L) - 2.0 * beta / (L * L * L)) /
           (t * t * t);
}

// 4-term expansion of zeta = 1/alpha' in inverse powers of the driver.
inline double zeta_series(double bar, double dbar, double d2bar) {
    if (!(bar > 0)) throw std::domain_error("zeta_series: driver must be positive");
    double b2 = bar * bar;
    return -1.0 / bar - dbar / (2.0 * b2 * bar) + d2bar / (4.0 * b2 * b2) -
           5.0 * dbar * dbar / (8.0 * b2 * b2 * bar);
}

// Driver bar(t) in log form on a decreasing grid: mu = log bar and its two
// t-derivatives. mu may exceed the exponentiable range; only e^{-mu} is ever
// formed, which then underflows harmlessly.
struct Driver {
    std::vector<double> t;    // decreasing
    std::vector<double> mu;
    std::vector<double> dmu;
    std::vector<double> d2mu;
    std::vector<double> d3mu;

    size_t size() const { return t.size(); }

    static Driver from_closures(std::vector<double> grid,
                                const std::function<double(double)>& mu_fn,
                                const std::function<double(double)>& dmu_fn,
                                const std::function<double(double)>& d2mu_fn,
                                const std::function<double(double)>& d3mu_fn) {
        Driver d;
        d.t = std::move(grid);
        d.mu.reserve(d.t.size());
        d.dmu.reserve(d.t.size());
        d.d2mu.reserve(d.t.size());
        d.d3mu.reserve(d.t.size());
        for (double x : d.t) {
            d.mu.push_back(mu_fn(x));
            d.dmu.push_back(dmu_fn(x));
            d.d2mu.push_back(d2mu_fn(x));
            d.d3mu.push_back(d3mu_fn(x));
        }
        return d;
    }

    static Driver constant(std::vector<double> grid, double bar_value) {
        double m = std::log(bar_value);
        auto zero = [](double) { return 0.0; };
        return from_closures(std::move(grid), [m](double) { return m; }, zero, zero, zero);
    }

    // Differentiates sampled mu along log t (geometric grids are uniform there).
    static Driver from_samples(std::vector<double> grid, std::vector<double> mu_samples) {
        Driver d;
        d.t = std::move(grid);
        d.mu = std::move(mu_samples);
        size_t n = d.t.size();
        std::vector<double> x(n);
        for (size_t i = 0; i < n; ++i) x[i] = std::log(d.t[i]);
        auto m1 = sampled_derivative(x, d.mu);   // d mu / d log t
        auto m2 = sampled_derivative(x, m1);
        auto m3 = sampled_derivative(x, m2);
        d.dmu.resize(n);
        d.d2mu.resize(n);
        d.d3mu.resize(n);
        for (size_t i = 0; i < n; ++i) {
            double ti = d.t[i];
            d.dmu[i] = m1[i] / ti;
            d.d2mu[i] = (m2[i] - m1[i]) / (ti * ti);
            d.d3mu[i] = (m3[i] - 3.0 * m2[i] + 2.0 * m1[i]) / (ti * ti * ti);
        }
        return d;
    }
};

struct ZetaExpansion {
    std::vector<double> g0;    // zeta0 = -(1+g0)/bar
    std::vector<double> E;     // residual forcing of the remainder equation
};

// Series coefficient g0 and the residual E = (bar zeta0)^2 - 1 - zeta0'.
// Expanding g0 = A + B with A = mu'/(2 bar), B = (-mu''/4 + 3 mu'^2/8)/bar^2
// and zeta0' = ((1+g0) mu' - g0')/bar, the bar^{-1} and bar^{-2} sectors of E
// cancel identically, leaving the closed form
//     E = (-mu'''/4 + 5 mu' mu''/4 - 3 mu'^3/4)/bar^3 + B^2,
// which is evaluated directly (the naive difference would drown in roundoff
// wherever bar is large).
inline ZetaExpansion zeta_expansion(const Driver& d) {
    size_t n = d.size();
    ZetaExpansion out;
    out.g0.resize(n);
    out.E.resize(n);
    for (size_t i = 0; i < n; ++i) {
        double m1 = d.dmu[i], m2 = d.d2mu[i], m3 = d.d3mu[i];
        double inv = std::exp(-d.mu[i]); // 1/bar, may underflow to 0
        double inv2 = inv * inv;
        double B = (-0.25 * m2 + 0.375 * m1 * m1) * inv2;
        out.g0[i] = 0.5 * m1 * inv + B;
        double D = -0.25 * m3 + 1.25 * m1 * m2 - 0.75 * m1 * m1 * m1;
        out.E[i] = D * inv2 * inv + B * B;
    }
    return out;
}

struct FixedPointOptions {
    int max_iter = 50;
    double tol = 1e-12;
    bool include_quadratic = true; // keep the (bar w)^2 term of the map
    bool require_contraction = true;
};

struct FixedPointReport {
    int iterations = 0;
    double contraction = 0.0;  // worst measured ratio of successive increments
    double defect = 0.0;
    bool converged = false;
};

namespace detail {

// phi1(a) = (1-e^-a)/a and psi(a) = (1-(1+a)e^-a)/a^2, stable for small a.
inline double phi1(double a) {
    if (a < 1e-5) return 1.0 - 0.5 * a + a * a / 6.0;
    return -std::expm1(-a) / a;
}
inline double psi(double a) {
    if (a < 1e-4) return 0.5 - a / 3.0 + a * a / 8.0;
    return (1.0 - (1.0 + a) * std::exp(-a)) / (a * a);
}

// One sweep of the exponential integrator for y' = -rate(t) y + F(t),
// integrating toward larger t on the decreasing grid. log_rate holds
// log(rate) (rate > 0, possibly astronomically large).
inline std::vector<double> relax_sweep(const std::vector<double>& t,
                                       const std::vector<double>& log_rate,
                                       const std::vector<double>& F) {
    size_t n = t.size();
    std::vector<double> y(n, 0.0);
    auto steady = [&](size_t i) {
        if (F[i] == 0.0) return 0.0;
        double lv = std::log(std::abs(F[i])) - log_rate[i];
        return std::copysign(std::exp(lv), F[i]);
    };
    y[n - 1] = steady(n - 1);
    for (size_t k = n - 1; k-- > 0;) {
        size_t iL = k + 1, iR = k; // left = smaller t
        double dt = t[iR] - t[iL];
        double la = log_int_exp_cell(log_rate[iL], log_rate[iR], dt);
        if (la > 700.0) { // kernel memory fully lost within one cell
            y[iR] = steady(iR);
            continue;
        }
        double a = std::exp(la);
        double decay = std::exp(-a);
        double p1 = phi1(a), ps = psi(a);
        y[iR] = y[iL] * decay + dt * (F[iL] * (p1 - ps) + F[iR] * ps);
    }
    return y;
}

} // namespace detail

struct WSolution {
    std::vector<double> w;
    FixedPointReport report;
};

// Remainder fixed point: w' + 2 bar (1+g0) w = E + (bar w)^2, solved by
// Picard iteration with an exponential integrator for the linear part.
inline WSolution w_fixed_point(const Driver& d, const std::vector<double>& E,
                               const std::vector<double>& g0,
                               FixedPointOptions opts = {}) {
    size_t n = d.size();
    if (E.size() != n || g0.size() != n)
        throw std::invalid_argument("w_fixed_point: size mismatch");
    std::vector<double> log_rate(n);
    for (size_t i = 0; i < n; ++i)
        log_rate[i] = std::log(2.0) + d.mu[i] + std::log1p(g0[i]);

    WSolution out;
    out.w.assign(n, 0.0);
    std::vector<double> F(n), next;
    double prev_delta = -1.0;
    for (int it = 0; it < opts.max_iter; ++it) {
        for (size_t i = 0; i < n; ++i) {
            double q = 0.0;
            if (opts.include_quadratic && out.w[i] != 0.0) {
                double lbw = d.mu[i] + std::log(std::abs(out.w[i]));
                double bw = std::exp(lbw);
                q = bw * bw;
            }
            F[i] = E[i] + q;
        }
        next = detail::relax_sweep(d.t, log_rate, F);
        double delta = 0.0;
        for (size_t i = 0; i < n; ++i) delta = std::max(delta, std::abs(next[i] - out.w[i]));
        out.w.swap(next);
        out.report.iterations = it + 1;
        if (prev_delta > 0.0 && delta > 0.0) {
            double c = delta / prev_delta;
            out.report.contraction = std::max(out.report.contraction, c);
            if (opts.require_contraction && c >= 1.0 && it > 1)
                throw ConvergenceError("w_fixed_point: map is not contracting");
        }
        double scale = std::max(1e-300, sup_abs(out.w));
        out.report.defect = delta;
        if (delta <= opts.tol * std::max(1.0, scale)) {
            out.report.converged = true;
            break;
        }
        prev_delta = delta;
    }
    return out;
}

struct LevelOptions {
    FixedPointOptions fixed_point{};
    bool check_m_precondition = true;
    bool richardson_check = true;
    double richardson_tol = 5e-2;
};

// Solution of one hierarchy level. log_lambda is normalized to 0 at the top
// of the grid; where it exceeds double range it saturates to +inf and
// llog_lambda (log of log_lambda) carries the value instead.
struct LevelResult {
    std::vector<double> log_lambda;
    std::vector<double> llog_lambda;
    std::vector<double> log_neg_dlog;  // log(-d/dt log lambda)
    std::vector<double> g0, w, g, nu, geff;
    FixedPointReport w_report, nu_report;
    bool plain = true;                 // log_lambda finite on the whole grid
    double richardson_error = 0.0;
};

namespace detail {

inline std::vector<double> integrand_log(const Driver& d, const std::vector<double>& geff) {
    std::vector<double> out(d.size());
    for (size_t i = 0; i < d.size(); ++i) out[i] = d.mu[i] - std::log1p(geff[i]);
    return out;
}

// log lambda(t_i) = int_{t_i}^{t_top} exp(integrand_log) both in plain and
// log-of-log form.
inline void accumulate_scale(const Driver& d, const std::vector<double>& ilog,
                             LevelResult& lr) {
    size_t n = d.size();
    lr.log_lambda.assign(n, 0.0);
    lr.llog_lambda = cumulative_log_int_exp(d.t, ilog);
    for (size_t i = 0; i < n; ++i) {
        double v = std::exp(lr.llog_lambda[i]);
        lr.log_lambda[i] = v; // +inf when llog > ~709.78
        if (std::isinf(v)) lr.plain = false;
    }
    lr.log_neg_dlog = ilog;
}

} // namespace detail

// Solve one level for given driver and perturbation m (possibly empty).
// The norm bound |m| <= tau^{-1/2} with tau = exp(int bar) is enforced when
// check_m_precondition is set.
inline LevelResult solve_level(const Driver& d,
                               const std::vector<double>& m = {},
                               LevelOptions opts = {}) {
    size_t n = d.size();
    bool with_m = !m.empty();
    if (with_m && m.size() != n)
        throw std::invalid_argument("solve_level: m must match the grid");

    auto zx = zeta_expansion(d);
    auto ws = w_fixed_point(d, zx.E, zx.g0, opts.fixed_point);

    LevelResult lr;
    lr.g0 = zx.g0;
    lr.w = ws.w;
    lr.w_report = ws.report;
    lr.g.resize(n);
    for (size_t i = 0; i < n; ++i) {
        double bw = lr.w[i] == 0.0
                        ? 0.0
                        : std::copysign(std::exp(d.mu[i] + std::log(std::abs(lr.w[i]))),
                                        lr.w[i]);
        lr.g[i] = lr.g0[i] - bw;
    }

    lr.nu.assign(n, 0.0);
    if (with_m) {
        if (opts.check_m_precondition) {
            // tau = exp(int bar), so log tau is the exp of the accumulated log
            auto lli = cumulative_log_int_exp(d.t, d.mu);
            for (size_t i = 0; i < n; ++i) {
                double log_tau = std::exp(lli[i]); // +inf forces m = 0
                if (m[i] != 0.0 && std::log(std::abs(m[i])) > -0.5 * log_tau + 1e-9)
                    throw std::domain_error(
                        "solve_level: |m| exceeds tau^{-1/2} precondition");
            }
        }
        // rate = 2 bar (1+g)(1+m/bar)^2, forcing from the m-coupling plus nu^2
        std::vector<double> log_rate(n), mfrac(n);
        for (size_t i = 0; i < n; ++i) {
            mfrac[i] = m[i] * std::exp(-d.mu[i]);
            log_rate[i] = std::log(2.0) + d.mu[i] + std::log1p(lr.g[i]) +
                          2.0 * std::log1p(mfrac[i]);
        }
        std::vector<double> F(n), next;
        double prev_delta = -1.0;
        FixedPointReport rep;
        for (int it = 0; it < opts.fixed_point.max_iter; ++it) {
            for (size_t i = 0; i < n; ++i) {
                double one_g = 1.0 + lr.g[i];
                double drive = (mfrac[i] * mfrac[i] + 2.0 * mfrac[i]) * one_g * one_g;
                double bnu = lr.nu[i] == 0.0
                                 ? 0.0
                                 : std::copysign(std::exp(d.mu[i] +
                                                          std::log(std::abs(lr.nu[i]))),
                                                 lr.nu[i]);
                double q = bnu * (1.0 + mfrac[i]);
                F[i] = drive + q * q;
            }
            next = detail::relax_sweep(d.t, log_rate, F);
            double delta = 0.0;
            for (size_t i = 0; i < n; ++i)
                delta = std::max(delta, std::abs(next[i] - lr.nu[i]));
            lr.nu.swap(next);
            rep.iterations = it + 1;
            if (prev_delta > 0.0 && delta > 0.0) {
                double c = delta / prev_delta;
                rep.contraction = std::max(rep.contraction, c);
                if (opts.fixed_point.require_contraction && c >= 1.0 && it > 1)
                    throw ConvergenceError("solve_level: nu map is not contracting");
            }
            rep.defect = delta;
            if (delta <= opts.fixed_point.tol) {
                rep.converged = true;
                break;
            }
            prev_delta = delta;
        }
        lr.nu_report = rep;
    }

    // -(zeta+nu) = (1 + g - bar nu)/bar
    lr.geff.resize(n);
    for (size_t i = 0; i < n; ++i) {
        double bnu = lr.nu[i] == 0.0
                         ? 0.0
                         : std::copysign(std::exp(d.mu[i] + std::log(std::abs(lr.nu[i]))),
                                         lr.nu[i]);
        lr.geff[i] = lr.g[i] - bnu;
        if (lr.geff[i] <= -1.0)
            throw ConvergenceError("solve_level: effective rate lost positivity");
    }

    auto ilog = detail::integrand_log(d, lr.geff);
    detail::accumulate_scale(d, ilog, lr);

    if (opts.richardson_check && n >= 5) {
        // redo the accumulation on every second node; compare log lambda
        std::vector<double> t2, i2;
        for (size_t i = 0; i < n; i += 2) { t2.push_back(d.t[i]); i2.push_back(ilog[i]); }
        auto coarse = cumulative_log_int_exp(t2, i2);
        double worst = 0.0;
        for (size_t k = 1; k < t2.size(); ++k) {
            double fine = lr.llog_lambda[2 * k];
            if (fine == neg_inf) continue;
            double rel = std::abs(std::expm1(coarse[k] - fine));
            worst = std::max(worst, rel);
        }
        lr.richardson_error = worst;
        if (worst > opts.richardson_tol)
            throw ResolutionError("solve_level: grid too coarse for the scale integral");
    }
    return lr;
}

// Hierarchy of n scales on a decreasing grid. Level arrays are indexed
// level 0 <-> lambda_1 (innermost) ... level n-1 <-> lambda_n.
struct ScaleHierarchy {
    int n = 0;
    double beta = 0.0;
    double t0 = 0.0;
    std::vector<double> t;
    std::vector<std::vector<double>> log_lambda;   // +inf where saturated
    std::vector<std::vector<double>> llog_lambda;  // log of log lambda
    std::vector<std::vector<double>> log_neg_dlog; // log(-d/dt log lambda)
    std::vector<bool> plain;                       // per level
    std::vector<double> offset;                    // log lambda_j(t0), the free constant
    std::vector<Driver> bar_driver;                // driver used by level j (empty for level n-1)
    std::vector<LevelResult> level;                // solver state per level (empty for level n-1)

    size_t points() const { return t.size(); }
};

// Shift a solved level by its free multiplicative constant: each level is
// normalized to start a fixed factor above the next one so the alternating
// scale sum stays positive on the whole grid.
inline void apply_scale_offset(LevelResult& lr, double off) {
    if (!(off > 0)) throw std::invalid_argument("apply_scale_offset: need off > 0");
    double log_off = std::log(off);
    for (size_t i = 0; i < lr.log_lambda.size(); ++i) {
        lr.log_lambda[i] += off;
        lr.llog_lambda[i] = log_add(lr.llog_lambda[i], log_off);
    }
}

namespace detail {

// log bar_{k+1} from the alternating sum over levels k+1..n-1 (0-based), with
// the sqrt(16/pi) prefactor. Bracket terms beyond double range vanish, which
// is the correct limit.
inline std::vector<double> bar_log_from_levels(const ScaleHierarchy& h, int k) {
    size_t n = h.points();
    std::vector<double> mu(n);
    const auto& lead = h.log_lambda[k + 1];
    for (size_t i = 0; i < n; ++i) {
        double bracket = 1.0;
        double sign = -1.0;
        for (int j = k + 2; j < h.n; ++j, sign = -sign) {
            double diff = h.log_lambda[j][i] - lead[i];
            bracket += sign * std::exp(2.0 * diff);
        }
        if (!(bracket > 0.0))
            throw HierarchyOrderingError("alternating scale sum is not positive");
        mu[i] = std::log(bar_prefactor) + lead[i] + 0.5 * std::log(bracket);
    }
    return mu;
}

} // namespace detail

struct HierarchyOptions {
    LevelOptions level{};
    int pts_per_decade = 512;
    double level_separation = 10.0; // lambda_j(t0) / lambda_{j+1}(t0)
};

inline ScaleHierarchy solve_hierarchy(int n, double beta, double t0, double t_min,
                                      HierarchyOptions opts = {}) {
    if (n < 1) throw std::invalid_argument("solve_hierarchy: n must be >= 1");
    if (!(t0 < std::exp(-beta)))
        throw std::invalid_argument(
            "solve_hierarchy: need t0 < e^-beta so the outermost scale decreases");
    ScaleHierarchy h;
    h.n = n;
    h.beta = beta;
    h.t0 = t0;
    h.t = geometric_time_grid(t0, t_min, opts.pts_per_decade);
    size_t np = h.points();
    h.log_lambda.assign(n, {});
    h.llog_lambda.assign(n, {});
    h.log_neg_dlog.assign(n, {});
    h.plain.assign(n, true);
    h.offset.assign(n, 0.0);
    h.bar_driver.resize(n);
    h.level.resize(n);

    // outermost level is explicit
    auto& outer = h.log_lambda[n - 1];
    outer.resize(np);
    h.llog_lambda[n - 1].resize(np);
    h.log_neg_dlog[n - 1].resize(np);
    for (size_t i = 0; i < np; ++i) {
        outer[i] = outermost_log_scale(h.t[i], beta);
        h.llog_lambda[n - 1][i] = outer[i] > 0 ? std::log(outer[i]) : neg_inf;
        h.log_neg_dlog[n - 1][i] = std::log(-outermost_dlog_scale(h.t[i], beta));
    }

    for (int k = n - 2; k >= 0; --k) {
        if (!h.plain[k + 1]) {
            // driver itself is beyond double range: deeper levels saturate
            h.plain[k] = false;
            h.log_lambda[k].assign(np, pos_inf);
            h.llog_lambda[k].assign(np, pos_inf);
            h.log_neg_dlog[k].assign(np, pos_inf);
            continue;
        }
        Driver drv;
        if (k == n - 2) {
            // exact derivatives for the analytic outermost driver
            double lp = std::log(bar_prefactor);
            drv = Driver::from_closures(
                h.t, [&, lp](double t) { return lp + outermost_log_scale(t, beta); },
                [&](double t) { return outermost_dlog_scale(t, beta); },
                [&](double t) { return outermost_d2log_scale(t, beta); },
                [&](double t) { return outermost_d3log_scale(t, beta); });
        } else {
            drv = Driver::from_samples(h.t, detail::bar_log_from_levels(h, k));
        }
        auto lr = solve_level(drv, {}, opts.level);
        h.offset[k] = std::log(opts.level_separation) + h.log_lambda[k + 1][0];
        apply_scale_offset(lr, h.offset[k]);
        h.plain[k] = lr.plain;
        h.log_lambda[k] = lr.log_lambda;
        h.llog_lambda[k] = lr.llog_lambda;
        h.log_neg_dlog[k] = lr.log_neg_dlog;
        h.bar_driver[k] = std::move(drv);
        h.level[k] = std::move(lr);
    }
    return h;
}

// Re-solve the innermost level with a perturbation m. With m empty (or all
// zeros fed as empty) this follows the identical code path used inside
// solve_hierarchy, so results agree bitwise on the same grid.
inline LevelResult perturbed_scale(const ScaleHierarchy& h, const std::vector<double>& m,
                                   LevelOptions opts = {}) {
    if (h.n < 2) throw std::invalid_argument("perturbed_scale: need n >= 2");
    if (h.bar_driver[0].size() == 0)
        throw std::invalid_argument("perturbed_scale: innermost driver saturated");
    auto lr = solve_level(h.bar_driver[0], m, opts);
    apply_scale_offset(lr, h.offset[0]);
    return lr;
}

// ---------------------------------------------------------------------------
// time variables

struct TimeVariable {
    std::vector<double> log_tau;   // +inf where saturated
    std::vector<double> llog_tau;  // log of tau's log-scale representation
    bool plain = true;
    // tau_j * bar_{j+1} / lambda_j; near 1 as t -> 0. Computed by quadrature
    // when log lambda is a plain double, otherwise from the Laplace series.
    std::vector<double> ratio_bar;
};

inline std::vector<double> log_tau_from_samples(const std::vector<double>& t,
                                                const std::vector<double>& log_lambda) {
    return cumulative_log_int_exp(t, log_lambda);
}

inline TimeVariable time_variable(const ScaleHierarchy& h, int j) {
    if (j < 1 || j > h.n) throw std::invalid_argument("time_variable: level out of range");
    int k = j - 1;
    size_t np = h.points();
    TimeVariable tv;
    tv.ratio_bar.assign(np, std::numeric_limits<double>::quiet_NaN());

    // log(bar) entering the ratio; defined when the level has a driver
    const bool has_bar = (k < h.n - 1) && h.bar_driver[k].size() == np;

    if (h.plain[k]) {
        tv.log_tau = log_tau_from_samples(h.t, h.log_lambda[k]);
        tv.llog_tau.assign(np, 0.0);
        for (size_t i = 0; i < np; ++i)
            tv.llog_tau[i] = tv.log_tau[i] > 0 ? std::log(tv.log_tau[i]) : neg_inf;
        if (has_bar) {
            const auto& mu = h.bar_driver[k].mu;
            for (size_t i = 1; i < np; ++i)
                tv.ratio_bar[i] = std::exp(tv.log_tau[i] + mu[i] - h.log_lambda[k][i]);
        }
    } else {
        tv.plain = false;
        tv.log_tau.assign(np, pos_inf);
        tv.llog_tau.assign(np, 0.0);
        // Laplace form: tau ~ lambda/(-dlog lambda), so
        // log tau = log lambda - log(-dlog lambda), carried one log layer up.
        for (size_t i = 0; i < np; ++i) {
            double ll = h.llog_lambda[k][i];
            double corr = h.log_neg_dlog[k][i] * std::exp(-ll); // ratio of the two logs
            tv.llog_tau[i] = std::isfinite(corr) && corr < 1.0 ? ll + std::log1p(-corr) : ll;
        }
        if (has_bar) {
            const auto& lev = h.level[k];
            const auto& drv = h.bar_driver[k];
            for (size_t i = 1; i < np; ++i) {
                // ratio = (1+geff) (1 + d/dt[1/alpha'] ), curvature computed in
                // log form so saturated factors drop to zero
                double curv = -drv.dmu[i] * std::exp(-drv.mu[i]) * (1.0 + lev.geff[i]);
                tv.ratio_bar[i] = (1.0 + lev.geff[i]) * (1.0 + curv);
            }
        }
    }
    return tv;
}

// ---------------------------------------------------------------------------
// perturbation bookkeeping and the Picard scheme

// ||m||_{p,l} = sum_{j<=l} sup_t |tau^p (t d/dt)^j m| carried as a log.
// log_tau supplies log tau on the grid.
inline double log_pnorm(const std::vector<double>& t, const std::vector<double>& m,
                        const std::vector<double>& log_tau, double p, int l) {
    size_t n = t.size();
    if (m.size() != n || log_tau.size() != n)
        throw std::invalid_argument("log_pnorm: size mismatch");
    std::vector<double> x(n), cur = m;
    for (size_t i = 0; i < n; ++i) x[i] = std::log(t[i]);
    double total = neg_inf;
    for (int j = 0; j <= l; ++j) {
        double lvl = neg_inf;
        for (size_t i = 0; i < n; ++i) {
            if (cur[i] == 0.0) continue;
            lvl = std::max(lvl, p * log_tau[i] + std::log(std::abs(cur[i])));
        }
        total = log_add(total, lvl);
        if (j < l) cur = sampled_derivative(x, cur); // (t d/dt) = d/d log t
    }
    return total;
}

struct PerturbationM {
    std::vector<double> t;
    std::vector<double> samples;
    std::vector<double> log_tau; // for the norms

    double log_norm(double p, int l) const {
        return log_pnorm(t, samples, log_tau, p, l);
    }
};

using MFunctional = std::function<std::vector<double>(const std::vector<double>&)>;

struct PicardResult {
    std::vector<double> m;
    double defect = 0.0;       // sup |m - d - P(m)|
    double lipschitz = 0.0;    // worst measured increment ratio
    int steps = 0;
};

// m = d + P(m) by Picard iteration, m^(k+1) = d + P(m^(k)); equivalently the
// iterated-difference recursion P^(k+1)(d) = P(d + P^(k)(d)).
inline PicardResult picard_m(const MFunctional& P, const std::vector<double>& d,
                             int steps) {
    if (steps < 1) throw std::invalid_argument("picard_m: need at least one step");
    PicardResult out;
    out.m = d;
    std::vector<double> prev;
    double prev_delta = -1.0;
    for (int k = 0; k < steps; ++k) {
        auto pm = P(out.m);
        if (pm.size() != d.size()) throw std::invalid_argument("picard_m: P changed size");
        std::vector<double> next(d.size());
        for (size_t i = 0; i < d.size(); ++i) next[i] = d[i] + pm[i];
        double delta = 0.0;
        for (size_t i = 0; i < d.size(); ++i)
            delta = std::max(delta, std::abs(next[i] - out.m[i]));
        if (prev_delta > 0.0 && delta > 0.0) {
            double ratio = delta / prev_delta;
            out.lipschitz = std::max(out.lipschitz, ratio);
            if (ratio >= 1.0 && k > 1)
                throw ConvergenceError("picard_m: functional is not a contraction");
        }
        prev_delta = delta;
        out.m.swap(next);
        out.steps = k + 1;
    }
    auto pm = P(out.m);
    for (size_t i = 0; i < d.size(); ++i)
        out.defect = std::max(out.defect, std::abs(out.m[i] - d[i] - pm[i]));
    return out;
}

} // namespace bubbletree::modulation
