#include "cli_config.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cli_io.hpp"
#include "seasonal_spline/errors.hpp"

namespace seasonal_spline::cli {

namespace {

void only_keys(const nlohmann::json& j, const char* where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ValidationError(std::string(where) + " must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
            throw ValidationError("unknown key '" + key + "' in " + where);
}

double number(const nlohmann::json& j, const char* key, const char* where) {
    const auto& v = j.at(key);
    if (!v.is_number()) throw ValidationError(std::string(where) + "." + key + " must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ValidationError(std::string(where) + "." + key + " must be finite");
    return d;
}

long integer(const nlohmann::json& j, const char* key, const char* where) {
    const auto& v = j.at(key);
    if (!v.is_number_integer()) throw ValidationError(std::string(where) + "." + key + " must be an integer");
    return v.get<long>();
}

GridConfig parse_grid(const nlohmann::json& j) {
    only_keys(j, "grid", {"h_T", "n_S", "h_S", "t_lo", "t_hi", "margin"});
    GridConfig g;
    g.h_T = number(j, "h_T", "grid");
    if (j.contains("n_S") == j.contains("h_S")) throw ValidationError("grid needs exactly one of n_S and h_S");
    g.n_S = j.contains("n_S") ? static_cast<int>(integer(j, "n_S", "grid"))
                              : seasonal_count_from_step(number(j, "h_S", "grid"));
    if (j.contains("t_lo")) g.t_lo = number(j, "t_lo", "grid");
    if (j.contains("t_hi")) g.t_hi = number(j, "t_hi", "grid");
    if (j.contains("margin")) g.margin = static_cast<int>(integer(j, "margin", "grid"));
    if (!(g.h_T > 0.0)) throw ValidationError("grid.h_T must be positive");
    if (g.n_S < 1) throw ValidationError("grid.n_S must be >= 1");
    return g;
}

void parse_solver(const nlohmann::json& j, SolverConfig& s) {
    only_keys(j, "solver", {"max_iters", "tol_obj", "window", "tol_kkt", "step", "restart", "polish"});
    if (j.contains("max_iters")) s.max_iters = integer(j, "max_iters", "solver");
    if (j.contains("tol_obj")) s.tol_obj = number(j, "tol_obj", "solver");
    if (j.contains("window")) s.window = static_cast<int>(integer(j, "window", "solver"));
    if (j.contains("tol_kkt")) s.tol_kkt = number(j, "tol_kkt", "solver");
    if (j.contains("step")) {
        const auto v = j.at("step").get<std::string>();
        if (v == "backtracking") {
            s.step = StepRule::Backtracking;
        } else if (v == "fixed") {
            s.step = StepRule::Fixed;
        } else {
            throw ValidationError("solver.step must be 'backtracking' or 'fixed'");
        }
    }
    if (j.contains("restart")) s.restart = j.at("restart").get<bool>();
    if (j.contains("polish")) s.polish = j.at("polish").get<bool>();
}

LadderConfig parse_ladder(const nlohmann::json& j) {
    only_keys(j, "ladder", {"rungs", "margin_width"});
    LadderConfig l;
    if (j.contains("margin_width")) l.margin_width = number(j, "margin_width", "ladder");
    const auto& rungs = j.at("rungs");
    if (!rungs.is_array() || rungs.empty()) throw ValidationError("ladder.rungs must be a non-empty array");
    for (const auto& r : rungs) {
        only_keys(r, "ladder rung", {"h_T", "n_S", "h_S", "max_iters"});
        Rung rung;
        rung.h_T = number(r, "h_T", "ladder rung");
        if (r.contains("n_S") == r.contains("h_S")) throw ValidationError("ladder rung needs exactly one of n_S and h_S");
        rung.n_S = r.contains("n_S") ? static_cast<int>(integer(r, "n_S", "ladder rung"))
                                     : seasonal_count_from_step(number(r, "h_S", "ladder rung"));
        if (r.contains("max_iters")) rung.max_iters = integer(r, "max_iters", "ladder rung");
        if (!(rung.h_T > 0.0) || rung.n_S < 1) throw ValidationError("ladder rungs need h_T > 0 and n_S >= 1");
        l.rungs.push_back(rung);
    }
    return l;
}

SimulateConfig parse_simulate(const nlohmann::json& j) {
    only_keys(j, "simulate", {"truth", "plan", "samples", "sigma", "seed"});
    SimulateConfig s;
    s.truth = truth_from_json(j.at("truth"));
    if (j.contains("plan") == j.contains("samples"))
        throw ValidationError("simulate needs exactly one of 'plan' and 'samples'");
    if (j.contains("plan")) {
        s.plan = plan_from_json(j.at("plan"));
    } else {
        const auto& smp = j.at("samples");
        if (smp.is_array()) {
            for (const auto& x : smp) s.plan.push_back(SensingFunctional::sampling(x.get<double>()));
        } else {
            only_keys(smp, "simulate.samples", {"start", "stop", "count"});
            const double a = number(smp, "start", "simulate.samples");
            const double b = number(smp, "stop", "simulate.samples");
            const long n = integer(smp, "count", "simulate.samples");
            if (n < 1 || !(b >= a)) throw ValidationError("simulate.samples needs count >= 1 and stop >= start");
            for (long i = 0; i < n; ++i)
                s.plan.push_back(SensingFunctional::sampling(n == 1 ? a : a + (b - a) * i / static_cast<double>(n - 1)));
        }
    }
    if (s.plan.empty()) throw ValidationError("simulate plan is empty");
    if (j.contains("sigma")) s.sigma = number(j, "sigma", "simulate");
    if (j.contains("seed")) s.seed = static_cast<std::uint64_t>(integer(j, "seed", "simulate"));
    if (!(s.sigma >= 0.0)) throw ValidationError("simulate.sigma must be >= 0");
    return s;
}

} // namespace

RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    only_keys(j, "config",
              {"trend_operator", "seasonal_operator", "data", "measurements", "lambda_T", "lambda_S", "lambda",
               "grid", "solver", "fourier", "probe", "support_eta", "ladder", "simulate", "out", "test_hooks"});
    RunConfig c;
    c.base_dir = base_dir;
    try {
        if (j.contains("trend_operator")) c.trend = operator_from_json(j.at("trend_operator"), Role::Trend);
        if (j.contains("seasonal_operator"))
            c.seasonal = operator_from_json(j.at("seasonal_operator"), Role::Seasonal);
        if (j.contains("data") && j.contains("measurements"))
            throw ValidationError("config needs at most one of 'data' and 'measurements'");
        if (j.contains("data")) c.data_csv = base_dir / j.at("data").get<std::string>();
        if (j.contains("measurements")) c.measurements = base_dir / j.at("measurements").get<std::string>();
        if (j.contains("lambda_T")) c.lambda_T = number(j, "lambda_T", "config");
        if (j.contains("lambda_S")) c.lambda_S = number(j, "lambda_S", "config");
        if (j.contains("lambda")) c.lambda = number(j, "lambda", "config");
        if (j.contains("grid")) c.grid = parse_grid(j.at("grid"));
        if (j.contains("solver")) parse_solver(j.at("solver"), c.solver);
        if (j.contains("fourier")) {
            const auto& f = j.at("fourier");
            only_keys(f, "fourier", {"terms", "tail_tol"});
            if (f.contains("terms")) c.fourier.terms = integer(f, "terms", "fourier");
            if (f.contains("tail_tol")) c.fourier.tail_tol = number(f, "tail_tol", "fourier");
            if (c.fourier.terms < 1 || !(c.fourier.tail_tol > 0.0))
                throw ValidationError("fourier needs terms >= 1 and tail_tol > 0");
        }
        if (j.contains("probe")) {
            const auto& p = j.at("probe");
            only_keys(p, "probe", {"points", "t_lo", "t_hi"});
            if (p.contains("points")) c.probe_points = static_cast<int>(integer(p, "points", "probe"));
            if (p.contains("t_lo")) c.probe_lo = number(p, "t_lo", "probe");
            if (p.contains("t_hi")) c.probe_hi = number(p, "t_hi", "probe");
        }
        if (j.contains("support_eta")) c.support_eta = number(j, "support_eta", "config");
        if (j.contains("ladder")) c.ladder = parse_ladder(j.at("ladder"));
        if (j.contains("simulate")) c.simulate = parse_simulate(j.at("simulate"));
        if (j.contains("out")) c.out_dir = base_dir / j.at("out").get<std::string>();
        if (j.contains("test_hooks")) {
            const auto& h = j.at("test_hooks");
            only_keys(h, "test_hooks", {"gram"});
            if (h.contains("gram")) {
                if (h.at("gram") != "identity") throw ValidationError("test_hooks.gram supports only 'identity'");
                c.gram_identity = true;
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    if (c.probe_points < 2) throw ValidationError("probe.points must be >= 2");
    if (c.probe_lo && c.probe_hi && !(*c.probe_hi > *c.probe_lo))
        throw ValidationError("probe.t_hi must exceed probe.t_lo");
    if (!(c.support_eta > 0.0 && c.support_eta < 1.0)) throw ValidationError("support_eta must lie in (0, 1)");
    return c;
}

RunConfig load_config(const std::filesystem::path& path, const Overrides& overrides) {
    const auto j = read_json_file(path);
    auto base = path.parent_path();
    if (base.empty()) base = ".";
    RunConfig c = parse_config(j, base);
    if (overrides.out_dir) c.out_dir = *overrides.out_dir;
    if (overrides.probe_points) {
        if (*overrides.probe_points < 2) throw ValidationError("--probe-points must be >= 2");
        c.probe_points = *overrides.probe_points;
    }
    if (overrides.seed && c.simulate) c.simulate->seed = *overrides.seed;
    return c;
}

} // namespace seasonal_spline::cli
