#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <json.hpp>

#include "seasonal_spline/analysis.hpp"
#include "seasonal_spline/dictionary.hpp"
#include "seasonal_spline/tv_solver.hpp"

namespace seasonal_spline::cli {

struct GridConfig {
    double h_T = 0.0;
    int n_S = 0;
    std::optional<double> t_lo, t_hi;
    std::optional<int> margin;
};

struct LadderConfig {
    std::vector<Rung> rungs;
    double margin_width = 2.0;
};

struct SimulateConfig {
    GroundTruth truth;
    std::vector<SensingFunctional> plan;
    double sigma = 0.0;
    std::uint64_t seed = 0;
};

/// One JSON document describing a run. Paths are relative to the config file.
struct RunConfig {
    std::filesystem::path base_dir;
    std::optional<OperatorSpec> trend, seasonal;
    std::optional<std::filesystem::path> data_csv, measurements;
    std::optional<double> lambda_T, lambda_S, lambda;
    std::optional<GridConfig> grid;
    SolverConfig solver;
    FourierOptions fourier;
    int probe_points = 2048;
    std::optional<double> probe_lo, probe_hi;
    double support_eta = 1e-6;
    std::optional<LadderConfig> ladder;
    std::optional<SimulateConfig> simulate;
    std::filesystem::path out_dir = "out";
    bool gram_identity = false; // test hook: replace the quadratic Gram matrix by I
};

/// Command-line overrides applied after parsing.
struct Overrides {
    std::optional<std::filesystem::path> out_dir;
    std::optional<int> probe_points;
    std::optional<std::uint64_t> seed;
};

/// Schema-validated parse; unknown keys at any level raise ValidationError.
RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path, const Overrides& overrides = {});

} // namespace seasonal_spline::cli
