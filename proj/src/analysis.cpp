#include "seasonal_spline/analysis.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "seasonal_spline/errors.hpp"

namespace seasonal_spline {

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();
constexpr double inf = std::numeric_limits<double>::infinity();

CaseFlag case_of(const OperatorSpec& trend, const OperatorSpec& seasonal) {
    if (admissibility_order(trend) >= 1) return CaseFlag::TrendOrderPositive;
    if (admissibility_order(seasonal) >= 1) return CaseFlag::TrendInvertibleSeasonalNot;
    return CaseFlag::BothInvertible;
}

nlohmann::json atoms_json(const std::vector<Atom>& atoms) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& x : atoms) a.push_back({{"location", x.location}, {"weight", x.weight}});
    return a;
}

std::vector<Atom> atoms_from(const nlohmann::json& j, const char* what) {
    if (!j.is_array()) throw ValidationError(std::string(what) + " must be an array");
    std::vector<Atom> out;
    for (const auto& a : j) {
        for (const auto& [key, _] : a.items())
            if (key != "location" && key != "weight") throw ValidationError("unknown atom key '" + key + "'");
        out.push_back({a.at("location").get<double>(), a.at("weight").get<double>()});
    }
    return out;
}

double finite_or_nan(double v) { return std::isfinite(v) ? v : nan; }

// Largest slope of psi over [lo, hi]; closed form for derivative operators.
double green_lipschitz(const OperatorSpec& op, const GreensFunction& psi, double lo, double hi) {
    if (const auto* d = std::get_if<OperatorSpec::Derivative>(&op.kind)) {
        if (d->order == 1) return hi > 0.0 ? inf : 0.0;
        if (hi <= 0.0) return 0.0;
        double f = 1.0;
        for (int k = 2; k <= d->order - 2; ++k) f *= k;
        return std::pow(hi, d->order - 2) / f;
    }
    const int n = 8192;
    const double dx = (hi - lo) / n;
    double best = 0.0, prev = psi(lo);
    for (int i = 1; i <= n; ++i) {
        const double v = psi(lo + i * dx);
        best = std::max(best, std::abs(v - prev) / dx);
        prev = v;
    }
    return best;
}

} // namespace

void GroundTruth::validate() const {
    trend.validate();
    seasonal.validate();
    if (trend.role != Role::Trend || seasonal.role != Role::Seasonal)
        throw ValidationError("ground truth needs a trend and a seasonal operator");
    const int nt = admissibility_order(trend);
    if (static_cast<int>(poly.size()) != nt) {
        std::ostringstream os;
        os << "ground truth has " << poly.size() << " polynomial coefficients, the trend operator needs N_T = " << nt;
        throw ValidationError(os.str());
    }
    const CaseFlag c = case_of(trend, seasonal);
    if (c != CaseFlag::BothInvertible) {
        double sum = 0.0, mass = 0.0;
        for (const auto& a : seasonal_atoms) {
            sum += a.weight;
            mass += std::abs(a.weight);
        }
        if (std::abs(sum) > 1e-12 * std::max(1.0, mass))
            throw ValidationError("seasonal weights must sum to zero for case " + to_string(c));
    }
    if (alpha != 0.0 && c != CaseFlag::TrendInvertibleSeasonalNot)
        throw ValidationError("a seasonal constant is only part of the model for case " +
                              to_string(CaseFlag::TrendInvertibleSeasonalNot));
    for (const auto& a : trend_atoms)
        if (!std::isfinite(a.location) || !std::isfinite(a.weight)) throw ValidationError("non-finite trend atom");
    for (const auto& a : seasonal_atoms)
        if (!std::isfinite(a.location) || !std::isfinite(a.weight)) throw ValidationError("non-finite seasonal atom");
}

TruthEvaluator::TruthEvaluator(const GroundTruth& truth, FourierOptions fourier)
    : truth_(truth), psi_(truth.trend), rho_(truth.seasonal, fourier) {
    truth_.validate();
}

std::pair<double, double> TruthEvaluator::operator()(double t) const {
    double ft = 0.0, fs = truth_.alpha;
    for (const auto& a : truth_.trend_atoms) ft += a.weight * psi_(t - a.location);
    double p = 1.0;
    for (double c : truth_.poly) {
        ft += c * p;
        p *= t;
    }
    for (const auto& a : truth_.seasonal_atoms) fs += a.weight * rho_(t - a.location);
    return {ft, fs};
}

double TruthEvaluator::measure(const SensingFunctional& phi) const {
    double v = 0.0;
    for (const auto& a : truth_.trend_atoms)
        v += a.weight * apply_to_trend_atom(phi, psi_, {TrendAtom::Kind::Green, a.location, 0});
    for (std::size_t j = 0; j < truth_.poly.size(); ++j)
        v += truth_.poly[j] * apply_to_trend_atom(phi, psi_, {TrendAtom::Kind::Monomial, 0.0, static_cast<int>(j)});
    for (const auto& a : truth_.seasonal_atoms)
        v += a.weight * apply_to_seasonal_atom(phi, rho_, {SeasonalAtom::Kind::Green, a.location});
    if (truth_.alpha != 0.0)
        v += truth_.alpha * apply_to_seasonal_atom(phi, rho_, {SeasonalAtom::Kind::Constant, 0.0});
    return v;
}

Dataset simulate(const GroundTruth& truth, const std::vector<SensingFunctional>& plan, double sigma,
                 std::uint64_t seed, FourierOptions fourier) {
    truth.validate();
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ValidationError("noise level must be finite and >= 0");
    if (plan.empty()) throw ValidationError("the sensing plan is empty");
    const bool any_sampling = std::any_of(plan.begin(), plan.end(), [](const auto& p) { return p.is_sampling(); });
    if (any_sampling && !sampling_admissible(truth.trend, truth.seasonal))
        throw AdmissibilityError("sampling is not admissible: " + sampling_violation(truth.trend, truth.seasonal));

    const TruthEvaluator eval(truth, fourier);
    Dataset d;
    d.plan = plan;
    d.truth = truth;
    d.sigma = sigma;
    d.seed = seed;
    const auto L = static_cast<Eigen::Index>(plan.size());
    d.clean.resize(L);
    for (Eigen::Index l = 0; l < L; ++l) d.clean(l) = eval.measure(plan[static_cast<std::size_t>(l)]);
    d.y = d.clean;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    for (Eigen::Index l = 0; l < L; ++l) {
        const double noise = g(rng);
        if (sigma > 0.0) d.y(l) += sigma * noise;
    }
    return d;
}

nlohmann::json to_json(const GroundTruth& t) {
    return {{"trend_operator", to_json(t.trend)},
            {"seasonal_operator", to_json(t.seasonal)},
            {"trend_atoms", atoms_json(t.trend_atoms)},
            {"poly", t.poly},
            {"seasonal_atoms", atoms_json(t.seasonal_atoms)},
            {"alpha", t.alpha}};
}

GroundTruth truth_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ValidationError("ground truth must be a JSON object");
    static const std::vector<std::string> keys{"trend_operator", "seasonal_operator", "trend_atoms",
                                               "poly",           "seasonal_atoms",    "alpha"};
    for (const auto& [key, _] : j.items())
        if (std::find(keys.begin(), keys.end(), key) == keys.end())
            throw ValidationError("unknown ground-truth key '" + key + "'");
    GroundTruth t;
    t.trend = operator_from_json(j.at("trend_operator"), Role::Trend);
    t.seasonal = operator_from_json(j.at("seasonal_operator"), Role::Seasonal);
    if (j.contains("trend_atoms")) t.trend_atoms = atoms_from(j["trend_atoms"], "trend_atoms");
    if (j.contains("poly")) t.poly = j["poly"].get<std::vector<double>>();
    if (j.contains("seasonal_atoms")) t.seasonal_atoms = atoms_from(j["seasonal_atoms"], "seasonal_atoms");
    t.alpha = j.value("alpha", 0.0);
    t.validate();
    return t;
}

bool knots_nested(const Dictionary& coarse, const Dictionary& fine) {
    auto contained = [](const std::vector<double>& small, const std::vector<double>& big, double tol) {
        for (double x : small) {
            const auto it = std::lower_bound(big.begin(), big.end(), x - tol);
            if (it == big.end() || std::abs(*it - x) > tol) return false;
        }
        return true;
    };
    const double tol_t = 1e-9 * fine.grid().h_T;
    const double tol_s = 1e-9 * fine.grid().h_S();
    return contained(coarse.trend_knots(), fine.trend_knots(), tol_t) &&
           contained(coarse.seasonal_knots(), fine.seasonal_knots(), tol_s);
}

namespace {

// Places the sparse coefficients of a coarse solution on the matching knots of a finer grid.
CompositeSolution transfer(const Dictionary& coarse, const CompositeSolution& sol, const Dictionary& fine) {
    auto out = CompositeSolution::zeros(fine.blocks());
    const auto& tf = fine.trend_knots();
    const double h = fine.grid().h_T;
    for (std::size_t i = 0; i < coarse.trend_knots().size(); ++i) {
        const double x = coarse.trend_knots()[i];
        const auto idx = static_cast<long>(std::llround((x - tf.front()) / h));
        if (idx >= 0 && idx < static_cast<long>(tf.size())) out.a(idx) = sol.a(static_cast<Eigen::Index>(i));
    }
    const int n = fine.grid().n_S;
    for (std::size_t i = 0; i < coarse.seasonal_knots().size(); ++i) {
        const auto idx = static_cast<long>(std::llround(coarse.seasonal_knots()[i] * n)) % n;
        out.b(idx) = sol.b(static_cast<Eigen::Index>(i));
    }
    return out;
}

} // namespace

ConvergenceReport run_gamma_ladder(const LadderProblem& problem, const std::vector<Rung>& ladder, double probe_lo,
                                   double probe_hi, int probe_points) {
    if (ladder.empty()) throw ValidationError("the ladder has no rungs");
    if (!(probe_hi > probe_lo)) throw ValidationError("probe interval must satisfy a < b");
    if (probe_points < 2048) throw ValidationError("the probe grid needs at least 2048 points");
    for (std::size_t k = 1; k < ladder.size(); ++k)
        if (!(ladder[k].h_T < ladder[k - 1].h_T || ladder[k].n_S > ladder[k - 1].n_S))
            throw ValidationError("ladder rungs must refine the previous rung");
    problem.solver.validate();

    ConvergenceReport rep;
    rep.probe_lo = probe_lo;
    rep.probe_hi = probe_hi;
    rep.probe_points = probe_points;
    rep.nested = true;
    const double width = problem.margin_width.value_or(2.0);
    const double l1_bound = problem.y.squaredNorm() / std::min(problem.solver.lambda_T, problem.solver.lambda_S);

    std::vector<std::optional<Dictionary>> dicts;
    for (std::size_t k = 0; k < ladder.size(); ++k) {
        const Rung& rung = ladder[k];
        RungResult res;
        res.rung = rung;
        res.l1_bound = l1_bound;
        const auto start = std::chrono::steady_clock::now();
        std::optional<Dictionary> dict;
        try {
            GridSpec g;
            g.h_T = rung.h_T;
            g.t_lo = problem.t_lo;
            g.t_hi = problem.t_hi;
            g.margin = static_cast<int>(std::ceil(width / rung.h_T - 1e-9));
            g.n_S = rung.n_S;
            dict.emplace(problem.trend, problem.seasonal, g, problem.fourier);
            const DesignMatrix A = assemble(*dict, problem.plan);
            SolverConfig cfg = problem.solver;
            if (rung.max_iters) cfg.max_iters = *rung.max_iters;

            std::optional<CompositeSolution> warm;
            if (k > 0 && dicts.back() && rep.rungs.back().has_solution && knots_nested(*dicts.back(), *dict))
                warm = transfer(*dicts.back(), rep.rungs.back().solution, *dict);

            TvResult tv;
            try {
                tv = solve_tv(A, problem.y, cfg, warm ? &*warm : nullptr);
            } catch (const NonConvergenceError& e) {
                tv = e.best();
                res.status = "not-converged";
                res.message = e.what();
            }
            res.has_solution = true;
            res.solution = tv.solution;
            res.objective = tv.solution.objective;
            res.kkt = tv.kkt;
            res.iterations = tv.iterations;
            if (res.status == "ok" && !tv.kkt.verdict) res.status = "kkt-failed";
        } catch (const std::exception& e) {
            res.status = "error";
            res.message = e.what();
        }
        res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

        if (res.has_solution) {
            res.l1_trend = res.solution.a.lpNorm<1>();
            res.l1_seasonal = res.solution.b.lpNorm<1>();
            res.l2_poly = res.solution.c.norm();
            res.l1_bound_ok = res.l1_trend + res.l1_seasonal <= l1_bound * (1.0 + 1e-12);
            const auto& knots = dict->trend_knots();
            const double lip_psi =
                knots.empty() ? 0.0
                              : green_lipschitz(dict->trend_operator(), dict->psi(), probe_lo - knots.back(),
                                                probe_hi - knots.front());
            const double r = std::max(std::abs(probe_lo), std::abs(probe_hi));
            double mono = 0.0;
            for (Eigen::Index j = 1; j < res.solution.c.size(); ++j) {
                const double d = static_cast<double>(j) * std::pow(r, static_cast<double>(j - 1));
                mono += d * d;
            }
            res.lipschitz_bound = (res.l1_trend > 0.0 ? res.l1_trend * lip_psi : 0.0) + res.l2_poly * std::sqrt(mono);
        }
        if (k > 0 && !(dict && dicts.back() && knots_nested(*dicts.back(), *dict))) rep.nested = false;
        dicts.push_back(std::move(dict));
        rep.rungs.push_back(std::move(res));
    }

    rep.all_kkt = std::all_of(rep.rungs.begin(), rep.rungs.end(),
                              [](const RungResult& r) { return r.has_solution && r.kkt.verdict; });
    if (rep.nested) {
        for (std::size_t k = 1; k < rep.rungs.size(); ++k) {
            const auto& a = rep.rungs[k - 1];
            const auto& b = rep.rungs[k];
            if (a.has_solution && b.has_solution &&
                b.objective > a.objective + rep.monotone_slack * std::max(1.0, std::abs(a.objective)))
                rep.monotone = false;
        }
    }

    // Common probe: a uniform grid plus every active knot and its half-cell neighbours.
    std::vector<double> pt, ps;
    for (int i = 0; i < probe_points; ++i) {
        pt.push_back(probe_lo + (probe_hi - probe_lo) * i / (probe_points - 1));
        ps.push_back(static_cast<double>(i) / probe_points);
    }
    for (std::size_t k = 0; k < rep.rungs.size(); ++k) {
        if (!rep.rungs[k].has_solution) continue;
        const auto& d = *dicts[k];
        const auto& sol = rep.rungs[k].solution;
        const double ht = d.grid().h_T, hs = d.grid().h_S();
        for (Eigen::Index j = 0; j < sol.a.size(); ++j) {
            if (sol.a(j) == 0.0) continue;
            for (double x : {d.trend_knots()[j] - 0.5 * ht, d.trend_knots()[j], d.trend_knots()[j] + 0.5 * ht})
                if (x >= probe_lo && x <= probe_hi) pt.push_back(x);
        }
        for (Eigen::Index j = 0; j < sol.b.size(); ++j) {
            if (sol.b(j) == 0.0) continue;
            for (double x : {d.seasonal_knots()[j] - 0.5 * hs, d.seasonal_knots()[j], d.seasonal_knots()[j] + 0.5 * hs})
                ps.push_back(fractional_part(x));
        }
    }
    std::vector<std::vector<double>> vt(rep.rungs.size()), vs(rep.rungs.size());
    for (std::size_t k = 0; k < rep.rungs.size(); ++k) {
        if (!rep.rungs[k].has_solution) continue;
        const auto& d = *dicts[k];
        const auto& sol = rep.rungs[k].solution;
        for (double x : pt) vt[k].push_back(evaluate_solution(d, sol, x).first);
        for (double x : ps) vs[k].push_back(evaluate_solution(d, sol, x).second);
    }
    for (std::size_t k = 1; k < rep.rungs.size(); ++k) {
        if (vt[k].empty() || vt[k - 1].empty()) {
            rep.sup_trend.push_back(nan);
            rep.sup_seasonal.push_back(nan);
            continue;
        }
        double st = 0.0, ss = 0.0;
        for (std::size_t i = 0; i < pt.size(); ++i) st = std::max(st, std::abs(vt[k][i] - vt[k - 1][i]));
        for (std::size_t i = 0; i < ps.size(); ++i) ss = std::max(ss, std::abs(vs[k][i] - vs[k - 1][i]));
        rep.sup_trend.push_back(st);
        rep.sup_seasonal.push_back(ss);
    }
    return rep;
}

nlohmann::json to_json(const ConvergenceReport& r) {
    nlohmann::json rungs = nlohmann::json::array();
    for (std::size_t k = 0; k < r.rungs.size(); ++k) {
        const auto& x = r.rungs[k];
        nlohmann::json j{{"h_T", x.rung.h_T},
                         {"h_S", 1.0 / x.rung.n_S},
                         {"n_S", x.rung.n_S},
                         {"status", x.status},
                         {"message", x.message},
                         {"objective", x.has_solution ? nlohmann::json(x.objective) : nlohmann::json()},
                         {"kkt", x.has_solution ? to_json(x.kkt) : nlohmann::json()},
                         {"iterations", x.iterations},
                         {"l1_trend", x.l1_trend},
                         {"l1_seasonal", x.l1_seasonal},
                         {"l2_poly", x.l2_poly},
                         {"l1_bound", x.l1_bound},
                         {"l1_bound_ok", x.l1_bound_ok},
                         {"lipschitz_bound", finite_or_nan(x.lipschitz_bound)},
                         {"wall_seconds", x.wall_seconds}};
        if (x.rung.max_iters) j["max_iters"] = *x.rung.max_iters;
        if (k > 0) {
            j["sup_diff_trend"] = finite_or_nan(r.sup_trend[k - 1]);
            j["sup_diff_seasonal"] = finite_or_nan(r.sup_seasonal[k - 1]);
        }
        rungs.push_back(std::move(j));
    }
    return {{"version", "v1"},
            {"rungs", rungs},
            {"probe", {{"trend_interval", {r.probe_lo, r.probe_hi}},
                       {"points", r.probe_points},
                       {"refinement", "active knots and half-cell neighbours added"}}},
            {"nested", r.nested},
            {"monotonicity", r.nested ? (r.monotone ? "non-increasing" : "violated") : "skipped: ladder not nested"},
            {"monotone_slack", r.monotone_slack},
            {"all_kkt", r.all_kkt},
            {"ok", r.ok()}};
}

void write_csv(std::ostream& out, const ConvergenceReport& r) {
    out << "rung,h_T,h_S,n_S,status,objective,kkt_verdict,kkt_worst,iterations,l1_trend,l1_seasonal,l1_bound_ok,"
           "lipschitz_bound,sup_diff_trend,sup_diff_seasonal,wall_seconds\n";
    out.precision(17);
    auto num = [&](double v) {
        if (std::isfinite(v)) out << v;
    };
    for (std::size_t k = 0; k < r.rungs.size(); ++k) {
        const auto& x = r.rungs[k];
        out << k << ',' << x.rung.h_T << ',' << 1.0 / x.rung.n_S << ',' << x.rung.n_S << ',' << x.status << ',';
        if (x.has_solution) num(x.objective);
        out << ',' << (x.has_solution && x.kkt.verdict ? 1 : 0) << ',';
        if (x.has_solution) num(x.kkt.worst());
        out << ',' << x.iterations << ',';
        num(x.l1_trend);
        out << ',';
        num(x.l1_seasonal);
        out << ',' << (x.l1_bound_ok ? 1 : 0) << ',';
        num(x.lipschitz_bound);
        out << ',';
        if (k > 0) num(r.sup_trend[k - 1]);
        out << ',';
        if (k > 0) num(r.sup_seasonal[k - 1]);
        out << ',';
        num(x.wall_seconds);
        out << '\n';
    }
}

} // namespace seasonal_spline
