#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "bubbletree/grid.hpp"
#include "bubbletree/profiles.hpp"
#include "bubbletree/spectral.hpp"

using namespace bubbletree;
namespace sp = bubbletree::spectral;

TEST_CASE("half-line potential") {
    CHECK(sp::halfline_potential(1.0) == Catch::Approx(15.0 / 4.0 - 8.0).epsilon(1e-14));
    CHECK_THROWS_AS(sp::halfline_potential(0.0), std::domain_error);
    CHECK_THROWS_AS(sp::halfline_potential(-1.0), std::domain_error);

    // dominated by the centrifugal tail at large r
    double r = 100.0;
    CHECK(sp::halfline_potential(r) ==
          Catch::Approx(15.0 / (4.0 * r * r)).epsilon(1e-6));

    // conjugation identity: r^{1/2} L (r^{-1/2} f) = H f on a test function
    auto f = [](double x) { return std::pow(x, 2.5) * std::exp(-x); };
    for (double x : {0.5, 1.0, 2.3, 5.0}) {
        double h = 1e-4 * x;
        double fpp = central_second_derivative(f, x, h);
        double Hf = -fpp + sp::halfline_potential(x) * f(x);

        auto g = [&](double y) { return f(y) / std::sqrt(y); };
        double gpp = central_second_derivative(g, x, h);
        double gp = central_derivative4(g, x, h);
        double Lg = -gpp - gp / x +
                    4.0 * profiles::trig_composites(x).cos2q / (x * x) * g(x);
        CHECK(std::sqrt(x) * Lg == Catch::Approx(Hf).margin(1e-8));
    }
}

TEST_CASE("weyl solution at zero energy") {
    CHECK_THROWS_AS(sp::weyl_solution_zero(-1.0, {0.1, 1.0}), std::domain_error);

    auto grid = log_radial_grid(1e-3, 50.0, 80);
    auto tr = sp::weyl_solution_zero(0.0, grid);
    for (size_t i = 0; i < grid.size(); ++i)
        CHECK(tr[i] == Catch::Approx(sp::phi0(grid[i])).epsilon(1e-6));

    // phi_0(1) = 2
    auto one = sp::weyl_solution_zero(0.0, {1.0});
    CHECK(one[0] == Catch::Approx(2.0).epsilon(1e-8));

    // discrete eigenfunction: H phi_0 = 0 to measured second order
    auto residual_sup = [](double h) {
        double sup = 0;
        for (double r = 0.5; r < 3.0; r += 0.1) {
            double lap = (sp::phi0(r + h) - 2 * sp::phi0(r) + sp::phi0(r - h)) / (h * h);
            sup = std::max(sup, std::abs(-lap + sp::halfline_potential(r) * sp::phi0(r)));
        }
        return sup;
    };
    double r1 = residual_sup(1e-2), r2 = residual_sup(5e-3);
    double order = std::log2(r1 / r2);
    CHECK(order > 1.8);
    CHECK(order < 2.2);

    // at xi = 1 the small-r correction enters at relative order r^2
    std::vector<double> rr;
    for (double r = 0.02; r <= 0.101; r *= 1.5) rr.push_back(r);
    auto t1 = sp::weyl_solution_zero(1.0, rr);
    std::vector<double> dd(rr.size());
    for (size_t i = 0; i < rr.size(); ++i)
        dd[i] = (t1[i] - sp::phi0(rr[i])) / std::pow(rr[i], 2.5);
    double p = fit_power(rr, dd);
    CHECK(p > 1.8);
    CHECK(p < 2.2);
}

TEST_CASE("transference scalars") {
    auto ts = sp::transference_scalars();
    CHECK(ts.norm_sq == Catch::Approx(2 * pi).margin(1e-8));
    CHECK(ts.scaling_ip == Catch::Approx(-pi).margin(1e-8));
    CHECK(ts.k_pp == Catch::Approx(-0.5).margin(1e-8));
}

TEST_CASE("scattering coefficient") {
    SECTION("wronskian form is antisymmetric") {
        auto wr = [](double f, double df, double g, double dg) { return f * dg - df * g; };
        double f = 0.37, df = -1.2, g = 2.1, dg = 0.44;
        CHECK(wr(f, df, g, dg) == -wr(g, dg, f, df));
        CHECK(wr(f, df, f, df) == 0.0);
    }

    SECTION("matching-radius independence and the dyadic check") {
        for (double xi : {1e-2, 0.3, 2.0, 40.0}) {
            auto s = sp::scattering_coefficient(xi);
            CHECK(s.matching_mismatch < 1e-6);
        }
        sp::ScatteringOptions strict;
        strict.match_tol = 1e-14;
        CHECK_THROWS_AS(sp::scattering_coefficient(1.0, strict), AccuracyError);
        CHECK_THROWS_AS(sp::scattering_coefficient(0.0), std::domain_error);
    }

    SECTION("wronskian constancy across five radii") {
        double xi = 0.5;
        sp::ScatteringOptions o;
        o.check_matching = false;
        auto base = sp::scattering_coefficient(xi, o);
        // shifting the tail tolerance moves the matching radius; |a| must not
        for (double tol : {3e-10, 1e-10, 3e-11, 1e-11}) {
            sp::ScatteringOptions oo;
            oo.check_matching = false;
            oo.tail_tol = tol;
            auto s = sp::scattering_coefficient(xi, oo);
            CHECK(std::abs(s.a_abs - base.a_abs) < 1e-8 * base.a_abs);
        }
    }

    SECTION("density follows from |a| exactly") {
        for (double xi : {0.05, 1.0, 20.0}) {
            sp::ScatteringOptions o;
            o.check_matching = false;
            auto s = sp::scattering_coefficient(xi, o);
            CHECK(s.rho_prime ==
                  Catch::Approx(1.0 / (4.0 * pi * s.a_abs * s.a_abs)).epsilon(1e-12));
        }
    }

    SECTION("|a| <xi> stays within a fixed band") {
        sp::ScatteringOptions o;
        o.check_matching = false;
        auto table = sp::spectral_table(1e-2, 1e2, 16, o);
        double lo = 1e300, hi = 0;
        for (const auto& s : table) {
            double v = s.a_abs * std::sqrt(1.0 + s.xi * s.xi);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        CHECK(lo > 1.0);
        CHECK(hi < 14.0);
        // every sample within a factor 4 of the geometric-mean constant
        CHECK(hi / lo < 16.0);
    }
}

TEST_CASE("plancherel round trip") {
    auto bump = [](double r) {
        double s = (r - 4.0) / 1.5;
        return std::abs(s) < 1 ? std::exp(-1.0 / (1.0 - s * s)) : 0.0;
    };
    auto rep = sp::plancherel_roundtrip(bump, 2.5, 5.5);
    CHECK(rep.l2_error < 0.05);
    auto fine = sp::plancherel_roundtrip(bump, 2.5, 5.5, 9.0, 360, 400);
    CHECK(fine.l2_error < rep.l2_error);
}
