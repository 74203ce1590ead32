#include "cli_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "seasonal_spline/errors.hpp"

namespace seasonal_spline::cli {

namespace {

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_number(const std::string& field, const std::filesystem::path& path, std::size_t line) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(field, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != field.size() || !std::isfinite(v)) {
        std::ostringstream os;
        os << "data file '" << path.string() << "' line " << line << ": '" << field << "' is not a finite number";
        throw ValidationError(os.str());
    }
    return v;
}

} // namespace

Measurements read_samples_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open data file '" + path.string() + "'");
    std::string line;
    std::size_t number = 0;
    std::string header;
    while (std::getline(in, line)) {
        ++number;
        header = trim(line);
        if (!header.empty()) break;
    }
    if (header.empty()) throw ValidationError("data file '" + path.string() + "' is empty");
    if (header != "t,y")
        throw ValidationError("data file '" + path.string() + "' must start with the header 't,y', found '" + header +
                              "'");
    std::vector<double> t, y;
    while (std::getline(in, line)) {
        ++number;
        const std::string row = trim(line);
        if (row.empty()) continue;
        const auto comma = row.find(',');
        if (comma == std::string::npos || row.find(',', comma + 1) != std::string::npos) {
            std::ostringstream os;
            os << "data file '" << path.string() << "' line " << number << ": expected two comma-separated values";
            throw ValidationError(os.str());
        }
        t.push_back(parse_number(trim(row.substr(0, comma)), path, number));
        y.push_back(parse_number(trim(row.substr(comma + 1)), path, number));
    }
    if (t.empty()) throw ValidationError("data file '" + path.string() + "' has no data rows");
    Measurements m;
    m.y = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
    for (double x : t) m.plan.push_back(SensingFunctional::sampling(x));
    return m;
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path.string() + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

Measurements read_measurements_json(const std::filesystem::path& path) {
    const auto j = read_json_file(path);
    if (!j.is_object()) throw ValidationError("'" + path.string() + "' must hold a JSON object");
    for (const auto& [key, _] : j.items())
        if (key != "plan" && key != "y" && key != "version")
            throw ValidationError("unknown key '" + key + "' in '" + path.string() + "'");
    Measurements m;
    try {
        m.plan = plan_from_json(j.at("plan"));
        const auto y = j.at("y").get<std::vector<double>>();
        m.y = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("'" + path.string() + "': " + e.what());
    }
    if (m.plan.empty()) throw ValidationError("'" + path.string() + "' has an empty plan");
    if (static_cast<std::size_t>(m.y.size()) != m.plan.size())
        throw ValidationError("'" + path.string() + "': plan and y have different lengths");
    if (!m.y.allFinite()) throw ValidationError("'" + path.string() + "': y must be finite");
    return m;
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("failed writing '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) { write_atomic(path, j.dump(2) + "\n"); }

std::pair<double, double> plan_window(const std::vector<SensingFunctional>& plan) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& phi : plan) {
        const auto& k = phi.kind();
        if (const auto* s = std::get_if<Sampling>(&k)) {
            lo = std::min(lo, s->x);
            hi = std::max(hi, s->x);
        } else if (const auto* b = std::get_if<BoxAverage>(&k)) {
            lo = std::min(lo, b->start);
            hi = std::max(hi, b->start + b->length);
        } else if (const auto* d = std::get_if<WeightedDensity>(&k)) {
            lo = std::min(lo, d->origin - d->step);
            hi = std::max(hi, d->origin + static_cast<double>(d->values.size()) * d->step);
        }
    }
    if (!(hi > lo)) hi = lo + 1.0;
    return {lo, hi};
}

} // namespace seasonal_spline::cli
