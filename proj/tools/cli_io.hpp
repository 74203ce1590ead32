#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "seasonal_spline/sensing.hpp"

namespace seasonal_spline::cli {

struct Measurements {
    std::vector<SensingFunctional> plan;
    Eigen::VectorXd y;
};

/// Reads a "t,y" CSV into a sampling plan. Throws ValidationError naming the
/// file when it is missing, empty, has a different header or a bad row.
Measurements read_samples_csv(const std::filesystem::path& path);

/// Reads {"plan": [...], "y": [...]}.
Measurements read_measurements_json(const std::filesystem::path& path);

nlohmann::json read_json_file(const std::filesystem::path& path);

/// Writes through a temporary file in the same directory and renames it into place.
void write_atomic(const std::filesystem::path& path, const std::string& content);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

/// Locations of all functionals: [min, max] over sample points and supports.
std::pair<double, double> plan_window(const std::vector<SensingFunctional>& plan);

} // namespace seasonal_spline::cli
