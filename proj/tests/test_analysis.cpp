#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "seasonal_spline/analysis.hpp"
#include "seasonal_spline/errors.hpp"

using namespace seasonal_spline;

namespace {

GroundTruth d2_truth() {
    GroundTruth t;
    t.trend_atoms = {{0.83, 1.0}, {2.31, -1.5}};
    t.poly = {0.3, 0.2};
    t.seasonal_atoms = {{0.137, 0.8}, {0.571, -0.8}};
    return t;
}

std::vector<SensingFunctional> spread_samples(int L, double span) {
    std::vector<SensingFunctional> plan;
    for (int i = 0; i < L; ++i) plan.push_back(SensingFunctional::sampling(span * (i + 0.5) / L + 0.01 * std::sin(7.0 * i)));
    return plan;
}

} // namespace

TEST_CASE("discretize_measure: binning examples") {
    const AtomicMeasure one({{0.3, 1.0}}, Domain::Line);
    const auto d = discretize_measure(one, 0.5);
    REQUIRE(d.atoms().size() == 1);
    CHECK(d.atoms()[0].location == 0.0);
    CHECK(d.atoms()[0].weight == 1.0);

    const AtomicMeasure pair({{0.1, 1.0}, {0.2, -1.0}}, Domain::Line);
    CHECK(pair.total_variation() == 2.0);
    const auto c = discretize_measure(pair, 0.5);
    REQUIRE(c.atoms().size() == 1);
    CHECK(c.atoms()[0].location == 0.0);
    CHECK(c.atoms()[0].weight == 0.0);
    CHECK(c.total_variation() == 0.0);

    const AtomicMeasure circ({{1.3, 2.0}, {-0.2, 1.0}}, Domain::Circle);
    CHECK(circ.atoms()[0].location == doctest::Approx(0.3));
    CHECK(circ.atoms()[1].location == doctest::Approx(0.8));
    CHECK_THROWS_AS(discretize_measure(circ, 0.3), ValidationError);
    const auto cd = discretize_measure(circ, 0.25);
    CHECK(cd.atoms()[0].location == 0.25);
    CHECK(cd.atoms()[1].location == 0.75);
    CHECK_THROWS_AS(discretize_measure(one, 0.0), ValidationError);
}

TEST_CASE("discretize_measure: total variation never increases") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> loc(-5.0, 5.0);
    std::normal_distribution<double> w;
    std::uniform_int_distribution<int> n(1, 30);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<Atom> atoms;
        for (int k = n(rng); k > 0; --k) atoms.push_back({loc(rng), w(rng)});
        const Domain dom = trial % 2 ? Domain::Circle : Domain::Line;
        const AtomicMeasure m(atoms, dom);
        const double h = 1.0 / (1 + trial % 17);
        const auto d = discretize_measure(m, h);
        CHECK(d.total_variation() <= m.total_variation());
        double s0 = 0.0, s1 = 0.0;
        for (const auto& a : m.atoms()) s0 += a.weight;
        for (const auto& a : d.atoms()) s1 += a.weight;
        CHECK(std::abs(s0 - s1) <= 1e-12 * (1.0 + m.total_variation()));
    }
}

TEST_CASE("discretize_measure: pairing bound with the modulus of continuity") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> loc(-3.0, 3.0), freq(0.5, 20.0), ph(0.0, 6.0), hs(0.001, 0.5);
    std::normal_distribution<double> w;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Atom> atoms;
        for (int k = 0; k < 10; ++k) atoms.push_back({loc(rng), w(rng)});
        const AtomicMeasure m(atoms, Domain::Line);
        const double om = freq(rng), c = ph(rng), h = hs(rng);
        auto phi = [&](double x) { return std::sin(om * x + c); };
        // |sin(a) - sin(b)| <= 2 |sin((a - b) / 2)|, maximized at the largest admissible gap.
        const double modulus = 2.0 * std::sin(std::min(0.5 * om * h, 0.5 * std::numbers::pi));
        const double gap = std::abs(discretize_measure(m, h).pair(phi) - m.pair(phi));
        CHECK(gap <= modulus * m.total_variation() + 1e-12);
        const double sampled = modulus_of_continuity(phi, -4.0, 4.0, h);
        CHECK(gap <= sampled * m.total_variation() + 1e-12);
    }
}

TEST_CASE("discretize_measure: densities keep their mass") {
    WeightedDensity d;
    d.origin = 0.25;
    d.step = 0.125;
    d.values = {1.0, 2.0, 0.5, 0.0, 3.0};
    const auto m = discretize_measure(d, 0.3);
    double mass = 0.0;
    for (const auto& a : m.atoms()) mass += a.weight;
    // Hat interpolant: total mass is step * sum(values).
    CHECK(mass == doctest::Approx(0.125 * 6.5).epsilon(1e-14));
    CHECK(m.total_variation() <= 0.125 * 6.5 + 1e-14);
}

TEST_CASE("ground truth validation") {
    auto t = d2_truth();
    CHECK_NOTHROW(t.validate());
    auto bad = t;
    bad.seasonal_atoms[0].weight = 0.5;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = t;
    bad.poly = {1.0};
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = t;
    bad.alpha = 1.0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);

    GroundTruth inv;
    inv.trend = OperatorSpec::sobolev(2.0, Role::Trend);
    inv.seasonal = OperatorSpec::sobolev(1.0, Role::Seasonal);
    inv.seasonal_atoms = {{0.2, 1.0}};
    CHECK_NOTHROW(inv.validate());
    inv.seasonal = OperatorSpec::derivative(2, Role::Seasonal);
    inv.alpha = 0.7;
    CHECK_THROWS_AS(inv.validate(), ValidationError);
    inv.seasonal_atoms = {{0.2, 1.0}, {0.4, -1.0}};
    CHECK_NOTHROW(inv.validate());
}

TEST_CASE("simulate: noiseless samples equal the evaluated truth") {
    GridSpec g;
    g.h_T = 0.25;
    g.t_lo = 0.0;
    g.t_hi = 3.0;
    g.n_S = 8;
    Dictionary dict(OperatorSpec::derivative(2, Role::Trend), OperatorSpec::derivative(2, Role::Seasonal), g);
    auto sol = CompositeSolution::zeros(dict.blocks());
    GroundTruth t;
    const std::size_t i1 = 12, i2 = 20;
    sol.a(static_cast<Eigen::Index>(i1)) = 1.0;
    sol.a(static_cast<Eigen::Index>(i2)) = -0.5;
    sol.c << 0.1, -0.3;
    sol.b(1) = 0.4;
    sol.b(6) = -0.4;
    t.trend_atoms = {{dict.trend_knots()[i1], 1.0}, {dict.trend_knots()[i2], -0.5}};
    t.poly = {0.1, -0.3};
    t.seasonal_atoms = {{dict.seasonal_knots()[1], 0.4}, {dict.seasonal_knots()[6], -0.4}};
    const auto plan = spread_samples(15, 3.0);
    const auto d = simulate(t, plan, 0.0, 7);
    for (std::size_t l = 0; l < plan.size(); ++l) {
        const auto [ft, fs] = evaluate_solution(dict, sol, std::get<Sampling>(plan[l].kind()).x);
        CHECK(std::abs(d.y(static_cast<Eigen::Index>(l)) - (ft + fs)) <= 1e-14);
    }
    CHECK(d.y == d.clean);
}

TEST_CASE("simulate: seeded noise is reproducible") {
    GroundTruth zero;
    zero.poly = {0.0, 0.0};
    const auto plan = spread_samples(20, 2.0);
    const auto a = simulate(zero, plan, 1.0, 99);
    const auto b = simulate(zero, plan, 1.0, 99);
    CHECK(a.y == b.y);
    const auto c = simulate(zero, plan, 1.0, 100);
    CHECK(a.y != c.y);
    CHECK(a.clean.isZero(0.0));
}

TEST_CASE("simulate: box averages of a piecewise-linear truth") {
    const auto t = d2_truth();
    // Closed forms: int (t - tau)_+ = ((b - tau)_+^2 - (a - tau)_+^2) / 2 and, for the
    // seasonal part, the antiderivative of -(u^2 - u + 1/6)/2 on every period piece.
    auto ramp = [](double a, double b, double tau) {
        const double pa = std::max(a - tau, 0.0), pb = std::max(b - tau, 0.0);
        return 0.5 * (pb * pb - pa * pa);
    };
    auto anti = [](double u) { return -0.5 * (u * u * u / 3.0 - u * u / 2.0 + u / 6.0); };
    auto periodic = [&](double a, double b, double s) {
        double total = 0.0, x = a;
        while (x < b) {
            const double next = std::min(b, std::floor(x - s) + 1.0 + s);
            const double base = std::floor(x - s) + s;
            total += anti(next - base) - anti(x - base);
            x = next;
        }
        return total;
    };
    std::vector<SensingFunctional> plan{SensingFunctional::box(0.1, 0.7), SensingFunctional::box(0.9, 1.6),
                                        SensingFunctional::box(2.2, 0.35)};
    const auto d = simulate(t, plan, 0.0, 1);
    for (std::size_t l = 0; l < plan.size(); ++l) {
        const auto& b = std::get<BoxAverage>(plan[l].kind());
        const double lo = b.start, hi = b.start + b.length;
        double ref = 0.3 * (hi - lo) + 0.1 * (hi * hi - lo * lo);
        for (const auto& a : t.trend_atoms) ref += a.weight * ramp(lo, hi, a.location);
        for (const auto& a : t.seasonal_atoms) ref += a.weight * periodic(lo, hi, a.location);
        CHECK(std::abs(d.y(static_cast<Eigen::Index>(l)) - ref) <= 1e-10);
    }
}

TEST_CASE("simulate: admissibility and json round trip") {
    GroundTruth t;
    t.trend = OperatorSpec::derivative(1, Role::Trend);
    t.poly = {0.0};
    CHECK_THROWS_AS(simulate(t, spread_samples(4, 1.0), 0.0, 1), AdmissibilityError);
    const auto u = d2_truth();
    const auto back = truth_from_json(nlohmann::json::parse(to_json(u).dump()));
    CHECK(back.trend_atoms.size() == 2);
    CHECK(back.seasonal_atoms[1].weight == -0.8);
    CHECK(back.poly == u.poly);
    auto j = to_json(u);
    j["extra"] = 1;
    CHECK_THROWS_AS(truth_from_json(j), ValidationError);
}

TEST_CASE("ladder: huge lambdas keep the objective constant") {
    const auto plan = spread_samples(12, 3.0);
    const auto d = simulate(d2_truth(), plan, 0.0, 1);
    LadderProblem p;
    p.plan = plan;
    p.y = d.y;
    p.solver.lambda_T = 1e6;
    p.solver.lambda_S = 1e6;
    p.t_lo = 0.0;
    p.t_hi = 3.0;
    const auto r = run_gamma_ladder(p, {{0.25, 4, {}}, {0.125, 8, {}}, {0.0625, 16, {}}}, 0.0, 3.0);
    CHECK(r.ok());
    for (const auto& x : r.rungs) {
        CHECK(x.solution.a.isZero(0.0));
        CHECK(x.solution.b.isZero(0.0));
        CHECK(x.objective == doctest::Approx(r.rungs[0].objective).epsilon(1e-12));
    }
}

TEST_CASE("ladder: nested rungs give non-increasing objectives") {
    const auto plan = spread_samples(16, 3.0);
    const auto d = simulate(d2_truth(), plan, 0.0, 1);
    LadderProblem p;
    p.plan = plan;
    p.y = d.y;
    p.solver.lambda_T = 1e-2;
    p.solver.lambda_S = 1e-2;
    p.t_lo = 0.0;
    p.t_hi = 3.0;
    const auto r = run_gamma_ladder(p, {{0.25, 4, {}}, {0.125, 8, {}}, {0.0625, 16, {}}}, 0.0, 3.0);
    CHECK(r.nested);
    CHECK(r.monotone);
    CHECK(r.all_kkt);
    for (std::size_t k = 1; k < r.rungs.size(); ++k) CHECK(r.rungs[k].objective <= r.rungs[k - 1].objective + 1e-9);
    for (const auto& x : r.rungs) {
        CHECK(x.l1_bound_ok);
        CHECK(std::isfinite(x.lipschitz_bound));
    }
    CHECK(r.sup_trend.size() == 2);
    CHECK(to_json(r)["monotonicity"] == "non-increasing");
    std::ostringstream csv;
    write_csv(csv, r);
    CHECK(csv.str().rfind("rung,h_T,h_S,n_S,status,objective", 0) == 0);
    int lines = 0;
    for (char ch : csv.str()) lines += ch == '\n';
    CHECK(lines == 4);
}

TEST_CASE("ladder: non-nested and failing rungs") {
    const auto plan = spread_samples(12, 3.0);
    const auto d = simulate(d2_truth(), plan, 0.0, 1);
    LadderProblem p;
    p.plan = plan;
    p.y = d.y;
    p.solver.lambda_T = 1e-2;
    p.solver.lambda_S = 1e-2;
    p.t_lo = 0.0;
    p.t_hi = 3.0;
    const auto odd = run_gamma_ladder(p, {{0.25, 4, {}}, {0.2, 6, {}}}, 0.0, 3.0);
    CHECK_FALSE(odd.nested);
    CHECK(to_json(odd)["monotonicity"] == "skipped: ladder not nested");

    const auto forced = run_gamma_ladder(p, {{0.25, 4, {}}, {0.125, 8, 1L}}, 0.0, 3.0);
    CHECK(forced.rungs[1].status == "not-converged");
    CHECK_FALSE(forced.ok());
    CHECK(forced.rungs[0].status == "ok");

    CHECK_THROWS_AS(run_gamma_ladder(p, {{0.25, 4, {}}}, 0.0, 3.0, 100), ValidationError);
    CHECK_THROWS_AS(run_gamma_ladder(p, {{0.25, 4, {}}, {0.5, 2, {}}}, 0.0, 3.0), ValidationError);
}
