#include <doctest.h>

#include <atomic>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "cli_commands.hpp"
#include "cli_io.hpp"
#include "seasonal_spline/analysis.hpp"
#include "seasonal_spline/errors.hpp"

using namespace seasonal_spline;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    static std::atomic<int> counter{0};
    const auto p = fs::temp_directory_path() /
                   ("seasonal_spline_cli_" + name + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

struct Run {
    int code;
    std::string log, err;
};

Run run(const std::string& verb, const nlohmann::json& config, const fs::path& dir) {
    std::ostringstream log, err;
    cli::RunConfig cfg;
    try {
        cfg = cli::parse_config(config, dir);
    } catch (const std::exception& e) {
        return {cli::exit_code_for(e), "", e.what()};
    }
    const int code = cli::run_command(verb, cfg, log, err);
    return {code, log.str(), err.str()};
}

nlohmann::json d2() { return {{"kind", "derivative"}, {"order", 2}}; }
nlohmann::json sob(double g) { return {{"kind", "sobolev"}, {"gamma", g}}; }

nlohmann::json truth_json(bool with_season) {
    nlohmann::json t{{"trend_operator", d2()},
                     {"seasonal_operator", d2()},
                     {"trend_atoms", {{{"location", 0.83}, {"weight", 1.0}}, {{"location", 2.31}, {"weight", -1.5}}}},
                     {"poly", {0.3, 0.2}},
                     {"seasonal_atoms", nlohmann::json::array()},
                     {"alpha", 0.0}};
    if (with_season)
        t["seasonal_atoms"] = {{{"location", 0.25}, {"weight", 0.8}}, {{"location", 0.625}, {"weight", -0.8}}};
    return t;
}

// Simulates samples into dir/data.csv and returns the truth.
GroundTruth simulate_into(const fs::path& dir, bool with_season, int count, double sigma, std::uint64_t seed = 3) {
    const nlohmann::json cfg{{"simulate",
                              {{"truth", truth_json(with_season)},
                               {"samples", {{"start", 0.05}, {"stop", 2.95}, {"count", count}}},
                               {"sigma", sigma},
                               {"seed", seed}}},
                             {"out", "."}};
    REQUIRE(run("simulate", cfg, dir).code == 0);
    return truth_from_json(truth_json(with_season));
}

nlohmann::json fit_config(double lt, double ls, double h = 0.125, int n_S = 8) {
    return {{"trend_operator", d2()},
            {"seasonal_operator", d2()},
            {"data", "data.csv"},
            {"lambda_T", lt},
            {"lambda_S", ls},
            {"grid", {{"h_T", h}, {"n_S", n_S}, {"t_lo", 0.0}, {"t_hi", 3.0}}},
            {"probe", {{"points", 2048}}},
            {"out", "fit"}};
}

std::vector<std::vector<double>> read_eval(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    REQUIRE(line == "t,f_T,f_S,f");
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        std::vector<double> r;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) r.push_back(std::stod(cell));
        rows.push_back(r);
    }
    return rows;
}

} // namespace

TEST_CASE("cli fit: noiseless two-knot truth") {
    const auto dir = fresh_dir("fit");
    const auto truth = simulate_into(dir, true, 12, 0.0);
    const auto r = run("fit", fit_config(1e-4, 1e-4), dir);
    CHECK(r.code == 0);
    const auto sol = solution_from_json(cli::read_json_file(dir / "fit/solution.json"));
    CHECK(sol.a.size() > 0);
    const auto kkt = cli::read_json_file(dir / "fit/kkt.json");
    CHECK(kkt["verdict"] == true);
    CHECK(kkt["residual_norm"].get<double>() <= kkt["residual_bound"].get<double>());
    const TruthEvaluator eval(truth);
    double err = 0.0;
    for (const auto& row : read_eval(dir / "fit/evaluation.csv")) {
        const auto [ft, fs] = eval(row[0]);
        err = std::max(err, std::abs(row[3] - ft - fs));
    }
    // Regression baseline from the first certified run: sup error 0.0516.
    CHECK(err < 0.06);
}

TEST_CASE("cli fit: empty and malformed data") {
    const auto dir = fresh_dir("empty");
    std::ofstream(dir / "data.csv").close();
    const auto r = run("fit", fit_config(1e-3, 1e-3), dir);
    CHECK(r.code == 2);
    CHECK(r.err.find("data.csv") != std::string::npos);
    CHECK(r.err.find("empty") != std::string::npos);

    std::ofstream(dir / "data.csv") << "x,y\n1,2\n";
    CHECK(run("fit", fit_config(1e-3, 1e-3), dir).code == 2);
    std::ofstream(dir / "data.csv") << "t,y\n1,abc\n";
    CHECK(run("fit", fit_config(1e-3, 1e-3), dir).code == 2);

    auto bad = fit_config(1e-3, 1e-3);
    bad["lambda_X"] = 1.0;
    const auto u = run("fit", bad, dir);
    CHECK(u.code == 2);
    CHECK(u.err.find("lambda_X") != std::string::npos);
    auto nested = fit_config(1e-3, 1e-3);
    nested["grid"]["h_t"] = 0.1;
    CHECK(run("fit", nested, dir).code == 2);

    // Sampling with N_T = 1 is inadmissible.
    simulate_into(dir, false, 12, 0.0);
    auto d1 = fit_config(1e-3, 1e-3);
    d1["trend_operator"] = {{"kind", "derivative"}, {"order", 1}};
    const auto a = run("fit", d1, dir);
    CHECK(a.code == 2);
    CHECK(a.err.find("N_T=1") != std::string::npos);
}

TEST_CASE("cli fit: huge lambdas give the polynomial least-squares fit") {
    const auto dir = fresh_dir("huge");
    simulate_into(dir, true, 15, 0.05);
    CHECK(run("fit", fit_config(1e6, 1e6), dir).code == 0);
    const auto m = cli::read_samples_csv(dir / "data.csv");
    Eigen::MatrixXd V(m.y.size(), 2);
    for (Eigen::Index i = 0; i < m.y.size(); ++i) {
        V(i, 0) = 1.0;
        V(i, 1) = std::get<Sampling>(m.plan[static_cast<std::size_t>(i)].kind()).x;
    }
    const Eigen::VectorXd c = V.colPivHouseholderQr().solve(m.y);
    const auto rows = read_eval(dir / "fit/evaluation.csv");
    for (const auto& row : rows) {
        CHECK(std::abs(row[1] - (c(0) + c(1) * row[0])) <= 1e-9);
        CHECK(row[2] == rows.front()[2]);
    }
}

TEST_CASE("cli quadratic: identity Gram hook") {
    const auto dir = fresh_dir("gram");
    simulate_into(dir, true, 10, 0.1);
    const nlohmann::json cfg{{"trend_operator", sob(1.0)}, {"seasonal_operator", sob(1.0)}, {"data", "data.csv"},
                             {"lambda", 0.25},          {"out", "q"},                      {"test_hooks", {{"gram", "identity"}}}};
    CHECK(run("quadratic", cfg, dir).code == 0);
    const auto q = cli::read_json_file(dir / "q/quadratic.json");
    const auto alpha = q["solve"]["alpha"].get<std::vector<double>>();
    const auto m = cli::read_samples_csv(dir / "data.csv");
    for (std::size_t i = 0; i < alpha.size(); ++i) CHECK(alpha[i] == doctest::Approx(m.y(static_cast<Eigen::Index>(i)) / 1.25).epsilon(1e-14));
    CHECK(q["version"] == "v1");
}

TEST_CASE("cli coupling contrast on a pure-trend truth") {
    const auto dir = fresh_dir("contrast");
    simulate_into(dir, false, 20, 0.0);
    const nlohmann::json q{{"trend_operator", sob(1.0)},
                           {"seasonal_operator", sob(1.0)},
                           {"data", "data.csv"},
                           {"lambda", 0.01},
                           {"probe", {{"points", 1024}, {"t_lo", 0.0}, {"t_hi", 1.0}}},
                           {"out", "q"}};
    CHECK(run("quadratic", q, dir).code == 0);
    double lo = 1e300, hi = -1e300;
    for (const auto& row : read_eval(dir / "q/evaluation.csv")) {
        lo = std::min(lo, row[2]);
        hi = std::max(hi, row[2]);
    }
    CHECK(hi - lo > 1e-6);

    // TV path with lambda_S above the seasonal threshold.
    CHECK(run("fit", fit_config(1e-3, 1e3), dir).code == 0);
    const auto sol = solution_from_json(cli::read_json_file(dir / "fit/solution.json"));
    CHECK(sol.b.lpNorm<1>() < 1e-6);
}

TEST_CASE("cli converge: nested, non-nested and forced failure") {
    const auto dir = fresh_dir("converge");
    simulate_into(dir, true, 14, 0.0);
    auto cfg = fit_config(1e-2, 1e-2);
    cfg.erase("grid");
    cfg["ladder"] = {{"rungs", {{{"h_T", 0.25}, {"n_S", 4}}, {{"h_T", 0.125}, {"n_S", 8}}, {{"h_T", 0.0625}, {"n_S", 16}}}}};
    cfg["out"] = "c";
    CHECK(run("converge", cfg, dir).code == 0);
    const auto rep = cli::read_json_file(dir / "c/convergence.json");
    CHECK(rep["monotonicity"] == "non-increasing");
    const auto& rungs = rep["rungs"];
    for (std::size_t k = 1; k < rungs.size(); ++k)
        CHECK(rungs[k]["objective"].get<double>() <= rungs[k - 1]["objective"].get<double>() + 1e-9);
    CHECK(fs::exists(dir / "c/convergence.csv"));

    cfg["ladder"]["rungs"] = {{{"h_T", 0.25}, {"n_S", 4}}, {{"h_T", 0.2}, {"n_S", 5}}};
    CHECK(run("converge", cfg, dir).code == 0);
    CHECK(cli::read_json_file(dir / "c/convergence.json")["monotonicity"] == "skipped: ladder not nested");

    cfg["ladder"]["rungs"] = {{{"h_T", 0.25}, {"n_S", 4}}, {{"h_T", 0.125}, {"n_S", 8}, {"max_iters", 1}}};
    CHECK(run("converge", cfg, dir).code == 3);
    const auto failed = cli::read_json_file(dir / "c/convergence.json");
    CHECK(failed["rungs"][1]["status"] == "not-converged");
    CHECK(failed["ok"] == false);
}

TEST_CASE("cli fit: iteration budget gives exit 3 with artifacts") {
    const auto dir = fresh_dir("budget");
    simulate_into(dir, true, 12, 0.05);
    auto cfg = fit_config(1e-3, 1e-3);
    cfg["solver"] = {{"max_iters", 2}};
    CHECK(run("fit", cfg, dir).code == 3);
    CHECK(fs::exists(dir / "fit/solution.json"));
    CHECK(cli::read_json_file(dir / "fit/kkt.json")["converged"] == false);
}

TEST_CASE("cli simulate: determinism, noiseless values, artifacts") {
    const auto a = fresh_dir("simA"), b = fresh_dir("simB");
    simulate_into(a, true, 30, 0.5, 11);
    simulate_into(b, true, 30, 0.5, 11);
    CHECK(slurp(a / "data.csv") == slurp(b / "data.csv"));
    CHECK(slurp(a / "measurements.json") == slurp(b / "measurements.json"));

    const auto c = fresh_dir("simC");
    const auto truth = simulate_into(c, true, 30, 0.0);
    const TruthEvaluator eval(truth);
    const auto m = cli::read_samples_csv(c / "data.csv");
    for (std::size_t l = 0; l < m.plan.size(); ++l) {
        const auto [ft, fs] = eval(std::get<Sampling>(m.plan[l].kind()).x);
        CHECK(m.y(static_cast<Eigen::Index>(l)) == doctest::Approx(ft + fs).epsilon(1e-15));
    }
    const auto j = cli::read_measurements_json(c / "measurements.json");
    CHECK(j.y == m.y);
    CHECK(truth_from_json(cli::read_json_file(c / "truth.json")).trend_atoms.size() == 2);
}

TEST_CASE("cli round trip: residual shrinks with lambda") {
    const auto dir = fresh_dir("roundtrip");
    simulate_into(dir, true, 16, 0.0);
    double prev = 1e300;
    for (double lam : {1e-2, 1e-3, 1e-4}) {
        CHECK(run("fit", fit_config(lam, lam, 0.0625, 16), dir).code == 0);
        const auto kkt = cli::read_json_file(dir / "fit/kkt.json");
        const double res = kkt["residual_norm"].get<double>();
        CHECK(res <= kkt["residual_bound"].get<double>());
        CHECK(res < prev);
        prev = res;
    }
}

TEST_CASE("cli quick-start config reproduces the committed dataset") {
    const fs::path src = fs::path(SEASONAL_SPLINE_SOURCE_DIR) / "configs";
    const auto out = fresh_dir("quickstart");
    cli::Overrides ov;
    ov.out_dir = out;
    const auto cfg = cli::load_config(src / "quickstart_simulate.json", ov);
    std::ostringstream log, err;
    REQUIRE(cli::run_command("simulate", cfg, log, err) == 0);
    CHECK(slurp(out / "data.csv") == slurp(src / "quickstart/data.csv"));
}
