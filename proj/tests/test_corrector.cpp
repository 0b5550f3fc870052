#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "bubbletree/corrector.hpp"
#include "bubbletree/grid.hpp"
#include "bubbletree/modulation.hpp"

using namespace bubbletree;
namespace cr = bubbletree::corrector;
namespace md = bubbletree::modulation;

TEST_CASE("explicit integrals") {
    auto v = cr::explicit_integrals();
    CHECK(v.phi_sq == Catch::Approx(2 * pi).margin(1e-8));
    CHECK(v.one_minus_cos == Catch::Approx(4.0).margin(1e-8));

    // antiderivative of Phi^2 R: -4R^2/(1+R^4) + 4 arctan(R^2), value -2+pi at R=1
    auto F = [](double R) {
        double R2 = R * R;
        return -4.0 * R2 / (1.0 + R2 * R2) + 4.0 * std::atan(R2);
    };
    CHECK(F(1.0) == Catch::Approx(pi - 2.0).margin(1e-14));
    for (double R : {0.4, 1.7, 5.0}) {
        double d = central_derivative4(F, R, 1e-4);
        double p = profiles::zero_mode(R);
        CHECK(d == Catch::Approx(p * p * R).margin(1e-9));
    }
}

TEST_CASE("vanishing defect") {
    SECTION("even rational source with analytic moment 2") {
        // f = Phi / (R^2 (1+R^4)): integrand 16 R^3/(1+R^4)^3, moment exactly 2
        auto ffn = [](double R) {
            double R4 = std::pow(R, 4);
            return profiles::zero_mode(R) / (R * R * (1.0 + R4));
        };
        double oracle = integrate_half_line(
            [&](double R) { return ffn(R) * profiles::zero_mode(R) * R; });
        CHECK(oracle == Catch::Approx(2.0).margin(1e-9));

        cr::SourceTerm src;
        src.R = log_radial_grid(1e-4, 1e4, 6000);
        src.f.resize(src.R.size());
        for (size_t i = 0; i < src.R.size(); ++i) src.f[i] = ffn(src.R[i]);
        auto m = cr::vanishing_defect(src);
        CHECK_FALSE(m.divergent);
        CHECK(m.value == Catch::Approx(2.0).margin(2e-5));
    }

    SECTION("log-antisymmetric source integrates to zero") {
        cr::SourceTerm src;
        src.R = log_radial_grid(std::exp(-5.0), std::exp(5.0), 2001);
        src.f.resize(src.R.size());
        for (size_t i = 0; i < src.R.size(); ++i) {
            double x = std::log(src.R[i]);
            src.f[i] = x * std::exp(-x * x) /
                       (profiles::zero_mode(src.R[i]) * src.R[i] * src.R[i]);
        }
        auto m = cr::vanishing_defect(src);
        CHECK(std::abs(m.value) < 1e-10);
    }

    SECTION("trig source has moment -4") {
        cr::SourceTerm src;
        src.R = log_radial_grid(1e-4, 1e4, 6000);
        src.f.resize(src.R.size());
        for (size_t i = 0; i < src.R.size(); ++i)
            src.f[i] = profiles::trig_composites(src.R[i]).cos2q - 1.0;
        auto m = cr::vanishing_defect(src);
        CHECK(m.value == Catch::Approx(-4.0).margin(1e-4));
        CHECK(m.tail_power > 3.0); // decays like R^{-4}
    }

    SECTION("slowly decaying source is flagged divergent") {
        cr::SourceTerm src;
        src.R = log_radial_grid(1e-2, 1e4, 800);
        src.f.resize(src.R.size());
        for (size_t i = 0; i < src.R.size(); ++i)
            src.f[i] = std::pow(src.R[i], -0.01);
        CHECK(cr::vanishing_defect(src).divergent);
    }
}

namespace {

cr::SourceTerm sampled_source(const std::vector<double>& R,
                              const std::function<double(double)>& f) {
    cr::SourceTerm s;
    s.R = R;
    s.f.resize(R.size());
    for (size_t i = 0; i < R.size(); ++i) s.f[i] = f(R[i]);
    return s;
}

} // namespace

TEST_CASE("h0 solve") {
    SECTION("zero source gives the zero corrector") {
        auto src = sampled_source(log_radial_grid(1e-3, 1e2, 200), [](double) { return 0.0; });
        auto cf = cr::solve_h0(src);
        CHECK(sup_abs(cf.h0) == 0.0);
    }

    SECTION("operator residual converges at second order") {
        auto f = [](double R) { return 1.0 / (1.0 + std::pow(R, 4)); };
        std::vector<double> res;
        for (int n : {1000, 2000, 4000}) {
            auto src = sampled_source(log_radial_grid(1e-3, 1e2, n), f);
            auto cf = cr::solve_h0(src);
            res.push_back(cr::corrector_residual(cf, src));
        }
        double o1 = std::log2(res[0] / res[1]);
        double o2 = std::log2(res[1] / res[2]);
        CHECK(o1 > 1.8);
        CHECK(o1 < 2.2);
        CHECK(o2 > 1.8);
        CHECK(o2 < 2.2);
    }

    SECTION("vanishing correction kills the quadratic growth") {
        auto cm1_fn = [](double R) { return profiles::trig_composites(R).cos2q - 1.0; };
        auto good_fn = [&](double R) {
            return cm1_fn(R) + (2.0 / pi) * profiles::zero_mode(R);
        };
        auto grid = log_radial_grid(1e-3, 1e3, 4000);
        auto bad = sampled_source(grid, cm1_fn);
        auto good = sampled_source(grid, good_fn);
        auto cb = cr::solve_h0(bad);
        auto cg = cr::solve_h0(good);
        CHECK(cb.growth_warning);
        CHECK_FALSE(cg.growth_warning);
        CHECK(cb.growth_at_edge > 1e2 * cg.growth_at_edge);

        // operator identity holds in both branches
        CHECK(cr::corrector_residual(cb, bad) < 1e-3);
        CHECK(cr::corrector_residual(cg, good) < 1e-3);

        // boundedness of the corrected field: sup |h0| / min(1, R^4) stable
        auto weight = [](const cr::CorrectorField& cf) {
            double s = 0;
            for (size_t i = 0; i < cf.R.size(); ++i) {
                double w = std::min(1.0, std::pow(cf.R[i], 4));
                s = std::max(s, std::abs(cf.h0[i]) / w);
            }
            return s;
        };
        double w1 = weight(cg);
        double w2 = weight(cr::solve_h0(sampled_source(log_radial_grid(1e-3, 1e3, 8000),
                                                       good_fn)));
        CHECK(std::abs(w1 - w2) < 0.05 * std::max(w1, w2));
    }

    SECTION("pure rescaled formulation is invariant under lambda relabeling") {
        auto grid = log_radial_grid(1e-2, 1e2, 500);
        auto f = [](double R) { return std::exp(-R) * R * R / (1 + R * R); };
        auto a = cr::solve_h0(sampled_source(grid, f));
        auto b = cr::solve_h0(sampled_source(grid, f)); // same R-samples, any lambda
        for (size_t i = 0; i < grid.size(); ++i) CHECK(a.h0[i] == b.h0[i]);
    }
}

TEST_CASE("modified source assembly") {
    auto grid = geometric_time_grid(1.0, 0.2, 256);
    double L = 8.0, eps = 0.05;

    SECTION("exact-exponential coefficient combination") {
        auto drv = md::Driver::constant(grid, L);
        auto lr = md::solve_level(drv);
        // derivatives of log lambda_1 from the samples, stencils in t
        size_t i = grid.size() / 2;
        double hl = grid[i] - grid[i - 1], hr = grid[i + 1] - grid[i];
        double a1 = deriv3_mid(lr.log_lambda[i - 1], lr.log_lambda[i],
                               lr.log_lambda[i + 1], hl, hr);
        double a2 = deriv3_mid2(lr.log_lambda[i - 1], lr.log_lambda[i],
                                lr.log_lambda[i + 1], hl, hr);
        auto c = cr::e2_coefficients(lr.log_lambda[i], a1, a2, std::log(L));
        double lam2 = std::exp(2.0 * lr.log_lambda[i]);
        CHECK((c.phi_coeff - 2.0 * c.grad_coeff) * lam2 == Catch::Approx(-L * L).epsilon(1e-6));
    }

    SECTION("vanishing moment for the perturbed solution") {
        auto drv = md::Driver::constant(grid, L);
        md::LevelOptions opts;
        opts.check_m_precondition = false;
        auto lr = md::solve_level(drv, std::vector<double>(grid.size(), eps * L), opts);

        size_t i = grid.size() / 2;
        // analytic derivatives of log lambda_1 = (1+eps) L (t0 - t)
        double a1 = -(1 + eps) * L, a2 = 0.0;
        double log_tilde2 = std::log(L / md::bar_prefactor);
        auto c = cr::e2_coefficients(lr.log_lambda[i], a1, a2, log_tilde2, eps * L,
                                     std::log(L));

        auto source_at = [&](double R) {
            double phi = profiles::zero_mode(R);
            double grad = R * profiles::zero_mode_derivative(R) - phi;
            double cm1 = profiles::trig_composites(R).cos2q - 1.0;
            return c.phi_coeff * phi + c.grad_coeff * grad +
                   (c.trig_coeff + c.m_corr) * cm1;
        };
        double moment = integrate_half_line(
            [&](double R) { return source_at(R) * profiles::zero_mode(R) * R; });
        double l1 = integrate_half_line(
            [&](double R) { return std::abs(source_at(R) * profiles::zero_mode(R) * R); });
        CHECK(std::abs(moment) < 1e-6 * l1);

        // m = 0 drops the correction term exactly
        auto c0 = cr::e2_coefficients(lr.log_lambda[i], a1, a2, log_tilde2, 0.0,
                                      std::log(L));
        CHECK(c0.m_corr == 0.0);
    }

    SECTION("sampled assembly matches the closure") {
        auto R = log_radial_grid(1e-2, 1e2, 300);
        cr::E2Coefficients c{1e-4, 2e-5, -3e-4, 0.0};
        auto src = cr::assemble_e2_tilde(c, R);
        CHECK(src.kind == cr::SourceKind::e2_tilde);
        size_t i = R.size() / 3;
        double phi = profiles::zero_mode(R[i]);
        double grad = R[i] * profiles::zero_mode_derivative(R[i]) - phi;
        double cm1 = profiles::trig_composites(R[i]).cos2q - 1.0;
        CHECK(src.f[i] == Catch::Approx(c.phi_coeff * phi + c.grad_coeff * grad +
                                        c.trig_coeff * cm1));
    }
}

TEST_CASE("orthogonality coefficient") {
    auto S = log_radial_grid(1e-4, 1e3, 4000);
    double lambda1 = 1.0;
    cr::OuterProfile outer;
    outer.scales = {1e-3};

    SECTION("zero outer field gives zero coefficient") {
        auto res = cr::orthogonality_coefficient([](double) { return 0.0; }, lambda1,
                                                 outer, S);
        CHECK(res.m_coefficient == 0.0);
    }

    SECTION("quadratic outer field against grid refinement") {
        auto h = [](double r) { return r * r; };
        auto res1 = cr::orthogonality_coefficient(h, lambda1, outer, S);
        auto res2 = cr::orthogonality_coefficient(h, lambda1, outer,
                                                  log_radial_grid(1e-4, 1e3, 8000));
        CHECK(res1.m_coefficient != 0.0);
        CHECK(res1.m_coefficient == Catch::Approx(res2.m_coefficient).epsilon(1e-5));
        CHECK(res1.combination_residual < 1e-8);
    }

    SECTION("linearity in the outer field") {
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> uni(0.2, 1.0);
        double a = uni(rng), b = uni(rng);
        auto h1 = [](double r) { return r * r; };
        auto h2 = [](double r) { return r * r / (1.0 + r); };
        auto m1 = cr::orthogonality_coefficient(h1, lambda1, outer, S).m_coefficient;
        auto m2 = cr::orthogonality_coefficient(h2, lambda1, outer, S).m_coefficient;
        auto mc = cr::orthogonality_coefficient(
                      [&](double r) { return a * h1(r) + b * h2(r); }, lambda1, outer, S)
                      .m_coefficient;
        CHECK(mc == Catch::Approx(a * m1 + b * m2).epsilon(1e-12));
    }
}
