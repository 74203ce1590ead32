#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <random>
#include <sstream>

#include "seasonal_spline/dictionary.hpp"
#include "seasonal_spline/errors.hpp"
#include "seasonal_spline/quadrature.hpp"

using namespace seasonal_spline;

namespace {

OperatorSpec dt(int n) { return OperatorSpec::derivative(n, Role::Trend); }
OperatorSpec ds(int n) { return OperatorSpec::derivative(n, Role::Seasonal); }

GridSpec grid(double h, double lo, double hi, int margin, int n_s) {
    GridSpec g;
    g.h_T = h;
    g.t_lo = lo;
    g.t_hi = hi;
    g.margin = margin;
    g.n_S = n_s;
    return g;
}

CompositeSolution random_solution(const Blocks& b, std::mt19937_64& rng, bool zero_sum) {
    std::normal_distribution<double> g;
    auto s = CompositeSolution::zeros(b);
    for (auto* v : {&s.a, &s.c, &s.b})
        for (Eigen::Index i = 0; i < v->size(); ++i) (*v)(i) = g(rng);
    if (zero_sum) s.b.array() -= s.b.mean();
    if (s.has_alpha) s.alpha = g(rng);
    return s;
}

} // namespace

TEST_CASE("dictionary enumeration") {
    auto d = build_dictionary(dt(2), ds(2), grid(0.5, 0.0, 2.0, 2, 4));
    const std::vector<double> knots{-1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
    CHECK(d.trend_knots() == knots);
    CHECK(d.blocks().poly.size == 2);
    CHECK(d.seasonal_knots() == std::vector<double>{0.0, 0.25, 0.5, 0.75});
    CHECK_FALSE(d.has_constant());
    CHECK(d.case_flag() == CaseFlag::TrendOrderPositive);
    CHECK(d.zero_sum_active());
    CHECK(d.blocks().cols() == 9 + 2 + 4);

    auto inv = build_dictionary(OperatorSpec::sobolev(2.0, Role::Trend), OperatorSpec::sobolev(2.0, Role::Seasonal),
                                grid(0.5, 0.0, 2.0, 2, 4));
    CHECK(inv.case_flag() == CaseFlag::BothInvertible);
    CHECK(inv.blocks().poly.size == 0);
    CHECK_FALSE(inv.has_constant());
    CHECK_FALSE(inv.zero_sum_active());

    auto mixed = build_dictionary(OperatorSpec::sobolev(2.0, Role::Trend), ds(2), grid(0.5, 0.0, 2.0, 2, 4));
    CHECK(mixed.case_flag() == CaseFlag::TrendInvertibleSeasonalNot);
    CHECK(mixed.has_constant());
    CHECK(mixed.blocks().constant.size == 1);
    CHECK(mixed.blocks().cols() == 9 + 4 + 1);

    GridSpec def = grid(0.25, 0.0, 1.0, 0, 8);
    def.margin.reset();
    CHECK(def.margin_count() == 8);
}

TEST_CASE("grid validation") {
    CHECK(seasonal_count_from_step(0.125) == 8);
    CHECK_THROWS_AS(seasonal_count_from_step(0.3), ValidationError);
    CHECK_THROWS_AS(build_dictionary(dt(2), ds(2), grid(0.0, 0.0, 1.0, 1, 4)), ValidationError);
    CHECK_THROWS_AS(build_dictionary(dt(2), ds(2), grid(0.5, 2.0, 1.0, 1, 4)), ValidationError);
    CHECK_THROWS_AS(build_dictionary(ds(2), ds(2), grid(0.5, 0.0, 1.0, 1, 4)), ValidationError);
}

TEST_CASE("assembly entries") {
    auto d = build_dictionary(dt(2), ds(2), grid(0.5, 0.0, 2.0, 2, 4));
    auto m = assemble(d, {SensingFunctional::sampling(0.0), SensingFunctional::box(0.0, 3.0)});
    const Eigen::Index knot0 = 2; // knot 0.0
    CHECK(m.A(0, m.blocks.trend.begin + knot0) == 0.0);
    CHECK(m.A(0, m.blocks.poly.begin) == 1.0);
    CHECK(m.A(0, m.blocks.poly.begin + 1) == 0.0);
    for (Eigen::Index j = 0; j < m.blocks.seasonal.size; ++j)
        CHECK(std::abs(m.A(1, m.blocks.seasonal.begin + j)) < 1e-15);
    CHECK(m.A(1, m.blocks.poly.begin) == doctest::Approx(3.0));
    CHECK(m.A(1, m.blocks.poly.begin + 1) == doctest::Approx(4.5));
}

TEST_CASE("inadmissible sampling is rejected") {
    auto d = build_dictionary(dt(1), ds(2), grid(0.5, 0.0, 2.0, 2, 4));
    try {
        assemble(d, {SensingFunctional::box(0.0, 1.0), SensingFunctional::sampling(0.3)});
        FAIL("expected AdmissibilityError");
    } catch (const AdmissibilityError& e) {
        CHECK(std::string(e.what()).find("sampling with N_T=1") != std::string::npos);
        CHECK(std::string(e.what()).find("functional 1") != std::string::npos);
    }
    // Box averages remain fine for the same pair.
    CHECK_NOTHROW(assemble(d, {SensingFunctional::box(0.0, 1.0)}));
    CHECK_THROWS_AS(assemble(d, {}), ValidationError);
}

TEST_CASE("rows match dense evaluation of the atoms") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    auto d = build_dictionary(dt(3), ds(2), grid(0.25, 0.0, 2.0, 2, 8));
    std::vector<SensingFunctional> plan;
    for (int i = 0; i < 6; ++i) plan.push_back(SensingFunctional::box(u(rng), 0.2 + u(rng)));
    auto m = assemble(d, plan);
    for (std::size_t l = 0; l < plan.size(); ++l) {
        const auto& bx = std::get<BoxAverage>(plan[l].kind());
        for (Eigen::Index j = 0; j < m.A.cols(); ++j) {
            Eigen::VectorXd e = Eigen::VectorXd::Zero(m.A.cols());
            e(j) = 1.0;
            auto sol = CompositeSolution::from_stacked(m.blocks, e);
            auto f = [&](double t) {
                auto [ft, fs] = evaluate_solution(d, sol, t);
                return ft + fs;
            };
            // Panels of width 1/64 from a dyadic origin keep every kink on a panel edge.
            const double lo = std::floor(bx.start * 64.0) / 64.0;
            const double hi = std::ceil((bx.start + bx.length) * 64.0) / 64.0;
            double q = 0.0;
            for (double a = lo; a < hi - 1e-12; a += 1.0 / 64.0) {
                const double s0 = std::max(a, bx.start);
                const double s1 = std::min(a + 1.0 / 64.0, bx.start + bx.length);
                if (s1 > s0) q += gauss_legendre(f, s0, s1, 1);
            }
            CHECK(std::abs(m.A(static_cast<Eigen::Index>(l), j) - q) < 1e-8);
        }
    }
}

TEST_CASE("assembly is linear and matches evaluation under sampling") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-0.5, 3.0);
    auto d = build_dictionary(dt(2), ds(3), grid(0.25, 0.0, 2.5, 3, 16));
    std::vector<SensingFunctional> plan;
    for (int i = 0; i < 20; ++i) plan.push_back(SensingFunctional::sampling(u(rng)));
    auto m = assemble(d, plan);
    auto sol = random_solution(m.blocks, rng, true);
    const Eigen::VectorXd y = m.A * sol.stacked();
    for (std::size_t l = 0; l < plan.size(); ++l) {
        const double x = std::get<Sampling>(plan[l].kind()).x;
        auto [ft, fs] = evaluate_solution(d, sol, x);
        CHECK(std::abs(y(static_cast<Eigen::Index>(l)) - (ft + fs)) <= 1e-12 * std::max(1.0, std::abs(ft + fs)));
    }
}

TEST_CASE("assembly is deterministic across thread counts") {
    auto d = build_dictionary(dt(2), ds(2), grid(1.0 / 32, 0.0, 4.0, 8, 32));
    std::vector<SensingFunctional> plan;
    for (int i = 0; i < 40; ++i) plan.push_back(SensingFunctional::box(0.1 * i, 0.35));
    setenv("SEASONAL_SPLINE_THREADS", "1", 1);
    auto serial = assemble(d, plan);
    setenv("SEASONAL_SPLINE_THREADS", "8", 1);
    auto threaded = assemble(d, plan);
    unsetenv("SEASONAL_SPLINE_THREADS");
    CHECK((serial.A.array() == threaded.A.array()).all());
}

TEST_CASE("solution evaluation") {
    auto d = build_dictionary(dt(2), ds(2), grid(0.5, 0.0, 2.0, 2, 4));
    auto zero = CompositeSolution::zeros(d.blocks());
    auto [zt, zs] = evaluate_solution(d, zero, 0.7);
    CHECK(zt == 0.0);
    CHECK(zs == 0.0);

    auto one = zero;
    one.a(4) = 2.0; // knot 1.0
    CHECK(evaluate_solution(d, one, 3.0).first == 4.0);

    std::mt19937_64 rng(9);
    auto sol = random_solution(d.blocks(), rng, true);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int i = 0; i < 100; ++i) {
        const double t = std::ldexp(std::round(std::ldexp(u(rng), 20)), -20);
        CHECK(evaluate_solution(d, sol, t).second == evaluate_solution(d, sol, t + 1.0).second);
    }

    auto bad = zero;
    bad.c.resize(3);
    CHECK_THROWS_AS(evaluate_solution(d, bad, 0.0), ValidationError);
}

TEST_CASE("canonical decomposition keeps the seasonal mean in alpha") {
    std::mt19937_64 rng(21);
    auto mixed = build_dictionary(OperatorSpec::sobolev(2.0, Role::Trend), ds(2), grid(0.5, 0.0, 2.0, 1, 8));
    auto sol = random_solution(mixed.blocks(), rng, true);
    const double mean =
        gauss_legendre([&](double t) { return evaluate_solution(mixed, sol, t).second; }, 0.0, 1.0, 8 * 4);
    CHECK(mean == doctest::Approx(sol.alpha).epsilon(1e-12));

    // Moving a constant between components changes the stored blocks.
    auto shifted = sol;
    shifted.alpha += 0.5;
    CHECK(shifted.stacked() != sol.stacked());

    auto pos = build_dictionary(dt(2), OperatorSpec::sobolev(2.0, Role::Seasonal), grid(0.5, 0.0, 2.0, 1, 8));
    auto s2 = random_solution(pos.blocks(), rng, true);
    const double m2 = gauss_legendre([&](double t) { return evaluate_solution(pos, s2, t).second; }, 0.0, 1.0, 32);
    CHECK(std::abs(m2) < 1e-6);
}

TEST_CASE("composite norm per case") {
    std::mt19937_64 rng(4);
    auto d = build_dictionary(dt(2), ds(2), grid(0.5, 0.0, 2.0, 2, 4));
    auto s = random_solution(d.blocks(), rng, true);
    const double tr = s.a.lpNorm<1>() + s.c.norm();
    const double se = s.b.lpNorm<1>();
    CHECK(composite_norm(d, s, 1.0) == doctest::Approx(tr + se));
    CHECK(composite_norm(d, s, 2.0) == doctest::Approx(std::hypot(tr, se)));
    CHECK(composite_norm(d, s, INFINITY) == doctest::Approx(std::max(tr, se)));
    CHECK(regularizer(s, 2.0, 3.0) == doctest::Approx(2.0 * s.a.lpNorm<1>() + 3.0 * se));

    auto mixed = build_dictionary(OperatorSpec::sobolev(2.0, Role::Trend), ds(2), grid(0.5, 0.0, 2.0, 2, 4));
    auto m = random_solution(mixed.blocks(), rng, true);
    CHECK(composite_norm(mixed, m, 1.0) == doctest::Approx(m.a.lpNorm<1>() + m.b.lpNorm<1>() + std::abs(m.alpha)));
}

TEST_CASE("design matrix csv and dictionary json") {
    auto d = build_dictionary(OperatorSpec::sobolev(2.0, Role::Trend), ds(2), grid(0.5, 0.0, 1.0, 0, 2));
    auto m = assemble(d, {SensingFunctional::sampling(0.25)});
    std::ostringstream os;
    write_csv(os, m);
    CHECK(os.str().rfind("a0,a1,a2,b0,b1,alpha\n", 0) == 0);
    const auto j = d.describe();
    CHECK(j["case"] == "trend-invertible-seasonal-not");
    CHECK(j["columns"] == 6);
}
