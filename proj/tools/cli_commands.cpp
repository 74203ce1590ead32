#include "cli_commands.hpp"

#include <cmath>
#include <sstream>

#include "cli_io.hpp"
#include "seasonal_spline/errors.hpp"
#include "seasonal_spline/quadratic.hpp"

namespace seasonal_spline::cli {

namespace {

Measurements load_measurements(const RunConfig& cfg) {
    if (cfg.data_csv) return read_samples_csv(*cfg.data_csv);
    if (cfg.measurements) return read_measurements_json(*cfg.measurements);
    throw ValidationError("config needs 'data' (t,y CSV) or 'measurements' (plan JSON)");
}

const OperatorSpec& need(const std::optional<OperatorSpec>& op, const char* key) {
    if (!op) throw ValidationError(std::string("config needs '") + key + "'");
    return *op;
}

double need(const std::optional<double>& v, const char* key) {
    if (!v) throw ValidationError(std::string("config needs '") + key + "'");
    return *v;
}

GridSpec grid_for(const RunConfig& cfg, const Measurements& m) {
    if (!cfg.grid) throw ValidationError("config needs 'grid'");
    const auto [lo, hi] = plan_window(m.plan);
    GridSpec g;
    g.h_T = cfg.grid->h_T;
    g.n_S = cfg.grid->n_S;
    g.t_lo = cfg.grid->t_lo.value_or(lo);
    g.t_hi = cfg.grid->t_hi.value_or(hi);
    g.margin = cfg.grid->margin;
    return g;
}

std::vector<double> probe_grid(const RunConfig& cfg, double lo, double hi) {
    const double a = cfg.probe_lo.value_or(lo), b = cfg.probe_hi.value_or(hi);
    std::vector<double> t(static_cast<std::size_t>(cfg.probe_points));
    for (int i = 0; i < cfg.probe_points; ++i) t[static_cast<std::size_t>(i)] = a + (b - a) * i / (cfg.probe_points - 1);
    return t;
}

template <class Eval>
std::string evaluation_csv(const std::vector<double>& ts, Eval&& eval) {
    std::ostringstream os;
    os.precision(17);
    os << "t,f_T,f_S,f\n";
    for (double t : ts) {
        const auto [ft, fs] = eval(t);
        os << t << ',' << ft << ',' << fs << ',' << ft + fs << '\n';
    }
    return os.str();
}

nlohmann::json knots_json(const std::vector<Knot>& knots) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& k : knots) a.push_back({{"location", k.location}, {"weight", k.weight}});
    return a;
}

} // namespace

int cmd_fit(const RunConfig& cfg, std::ostream& log) {
    const auto m = load_measurements(cfg);
    const GridSpec g = grid_for(cfg, m);
    const Dictionary dict(need(cfg.trend, "trend_operator"), need(cfg.seasonal, "seasonal_operator"), g, cfg.fourier);
    SolverConfig sc = cfg.solver;
    sc.lambda_T = need(cfg.lambda_T, "lambda_T");
    sc.lambda_S = need(cfg.lambda_S, "lambda_S");
    sc.validate();
    const DesignMatrix A = assemble(dict, m.plan);

    int code = Ok;
    TvResult r;
    try {
        r = solve_tv(A, m.y, sc);
    } catch (const NonConvergenceError& e) {
        r = e.best();
        code = NumericError;
        log << "warning: " << e.what() << '\n';
    }
    if (!r.kkt.verdict) code = NumericError;
    const auto& sol = r.solution;
    const double residual = (m.y - A.A * sol.stacked()).norm();
    const auto support = extract_support(dict, A, m.y, sol, sc, cfg.support_eta);

    auto kkt = to_json(r.kkt);
    kkt["version"] = "v1";
    kkt["converged"] = r.converged;
    kkt["iterations"] = r.iterations;
    kkt["objective"] = sol.objective;
    kkt["lipschitz"] = r.lipschitz;
    kkt["residual_norm"] = residual;
    // ||y - A x||^2 <= J(x), so the objective bounds the data misfit.
    kkt["residual_bound"] = std::sqrt(sol.objective);
    nlohmann::json sup{{"version", "v1"},
                       {"eta", cfg.support_eta},
                       {"K_T", support.K_T},
                       {"K_S", support.K_S},
                       {"knot_bound", support.bound},
                       {"refit_ok", support.refit_ok},
                       {"trend", knots_json(support.trend)},
                       {"seasonal", knots_json(support.seasonal)}};
    auto solution = solution_to_json(dict, sol);
    solution["lambda_T"] = sc.lambda_T;
    solution["lambda_S"] = sc.lambda_S;

    write_json(cfg.out_dir / "solution.json", solution);
    write_json(cfg.out_dir / "kkt.json", kkt);
    write_json(cfg.out_dir / "support.json", sup);
    write_atomic(cfg.out_dir / "evaluation.csv",
                 evaluation_csv(probe_grid(cfg, g.t_lo, g.t_hi), [&](double t) { return evaluate_solution(dict, sol, t); }));

    log << "fit: " << m.y.size() << " measurements, " << A.A.cols() << " columns, case " << to_string(dict.case_flag())
        << ", objective " << sol.objective << ", iterations " << r.iterations << ", KKT "
        << (r.kkt.verdict ? "certified" : "not certified") << " (worst " << r.kkt.worst() << "), knots "
        << support.K_T << "+" << support.K_S << '\n';
    return code;
}

int cmd_quadratic(const RunConfig& cfg, std::ostream& log) {
    const auto m = load_measurements(cfg);
    const double lambda = need(cfg.lambda, "lambda");
    const KernelPair k(need(cfg.trend, "trend_operator"), need(cfg.seasonal, "seasonal_operator"), cfg.fourier);
    const Eigen::Index L = m.y.size();
    const Eigen::MatrixXd G = cfg.gram_identity ? Eigen::MatrixXd::Identity(L, L) : gram(m.plan, k);
    const auto s = solve_quadratic(G, m.y, lambda);
    const QuadraticSolution f(k, m.plan, s.alpha);

    nlohmann::json out{{"version", "v1"},
                       {"kernels", k.describe()},
                       {"solve", to_json(s)},
                       {"gram_override", cfg.gram_identity ? "identity" : "none"},
                       {"measurement_residual", (G * s.alpha - m.y).norm()}};
    write_json(cfg.out_dir / "quadratic.json", out);
    const auto [lo, hi] = plan_window(m.plan);
    double span_lo = lo, span_hi = hi;
    if (cfg.grid) {
        span_lo = cfg.grid->t_lo.value_or(lo);
        span_hi = cfg.grid->t_hi.value_or(hi);
    }
    write_atomic(cfg.out_dir / "evaluation.csv", evaluation_csv(probe_grid(cfg, span_lo, span_hi), f));

    log << "quadratic: " << L << " measurements, lambda " << lambda << ", relative residual " << s.residual
        << ", jitter " << s.jitter << '\n';
    return Ok;
}

int cmd_converge(const RunConfig& cfg, std::ostream& log) {
    if (!cfg.ladder) throw ValidationError("config needs 'ladder'");
    const auto m = load_measurements(cfg);
    LadderProblem p;
    p.trend = need(cfg.trend, "trend_operator");
    p.seasonal = need(cfg.seasonal, "seasonal_operator");
    p.plan = m.plan;
    p.y = m.y;
    p.solver = cfg.solver;
    p.solver.lambda_T = need(cfg.lambda_T, "lambda_T");
    p.solver.lambda_S = need(cfg.lambda_S, "lambda_S");
    const auto [lo, hi] = plan_window(m.plan);
    p.t_lo = cfg.grid && cfg.grid->t_lo ? *cfg.grid->t_lo : lo;
    p.t_hi = cfg.grid && cfg.grid->t_hi ? *cfg.grid->t_hi : hi;
    p.margin_width = cfg.ladder->margin_width;
    p.fourier = cfg.fourier;

    const auto rep = run_gamma_ladder(p, cfg.ladder->rungs, cfg.probe_lo.value_or(p.t_lo), cfg.probe_hi.value_or(p.t_hi),
                                      std::max(cfg.probe_points, 2048));
    write_json(cfg.out_dir / "convergence.json", to_json(rep));
    std::ostringstream csv;
    write_csv(csv, rep);
    write_atomic(cfg.out_dir / "convergence.csv", csv.str());

    for (std::size_t k = 0; k < rep.rungs.size(); ++k) {
        const auto& r = rep.rungs[k];
        log << "rung " << k << ": h_T " << r.rung.h_T << ", n_S " << r.rung.n_S << ", " << r.status;
        if (r.has_solution) log << ", J " << r.objective;
        if (k > 0) log << ", sup diff " << rep.sup_trend[k - 1] << " / " << rep.sup_seasonal[k - 1];
        log << '\n';
    }
    log << "converge: " << (rep.nested ? (rep.monotone ? "objective non-increasing" : "monotonicity violated")
                                       : "ladder not nested, monotonicity skipped")
        << (rep.all_kkt ? ", all rungs certified" : ", some rungs failed") << '\n';
    return rep.ok() ? Ok : NumericError;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& log) {
    if (!cfg.simulate) throw ValidationError("config needs 'simulate'");
    const auto& s = *cfg.simulate;
    const auto d = simulate(s.truth, s.plan, s.sigma, s.seed, cfg.fourier);

    const bool sampling = std::all_of(d.plan.begin(), d.plan.end(), [](const auto& p) { return p.is_sampling(); });
    if (sampling) {
        std::ostringstream os;
        os.precision(17);
        os << "t,y\n";
        for (std::size_t l = 0; l < d.plan.size(); ++l)
            os << std::get<Sampling>(d.plan[l].kind()).x << ',' << d.y(static_cast<Eigen::Index>(l)) << '\n';
        write_atomic(cfg.out_dir / "data.csv", os.str());
    }
    write_json(cfg.out_dir / "measurements.json",
               {{"version", "v1"},
                {"plan", plan_to_json(d.plan)},
                {"y", std::vector<double>(d.y.data(), d.y.data() + d.y.size())}});
    write_json(cfg.out_dir / "truth.json", to_json(d.truth));

    log << "simulate: " << d.plan.size() << " measurements, sigma " << s.sigma << ", seed " << s.seed << '\n';
    return Ok;
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const AdmissibilityError*>(&e) ||
        dynamic_cast<const UnsupportedOperatorError*>(&e) || dynamic_cast<const IllPosedNullspaceError*>(&e) ||
        dynamic_cast<const NotPeriodizableError*>(&e) || dynamic_cast<const nlohmann::json::exception*>(&e))
        return ConfigError;
    return NumericError;
}

int run_command(const std::string& verb, const RunConfig& cfg, std::ostream& log, std::ostream& err) {
    try {
        if (verb == "fit") return cmd_fit(cfg, log);
        if (verb == "quadratic") return cmd_quadratic(cfg, log);
        if (verb == "converge") return cmd_converge(cfg, log);
        if (verb == "simulate") return cmd_simulate(cfg, log);
        err << "error: unknown command '" << verb << "'\n";
        return ConfigError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
}

} // namespace seasonal_spline::cli
