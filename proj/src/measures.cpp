#include "seasonal_spline/measures.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "seasonal_spline/errors.hpp"

namespace seasonal_spline {

namespace {

long circle_cells(double h) {
    const double n = 1.0 / h;
    const double r = std::round(n);
    if (std::abs(n - r) > 1e-9 * r) throw ValidationError("discretizing on the circle needs 1/h to be an integer");
    return static_cast<long>(r);
}

} // namespace

AtomicMeasure::AtomicMeasure(std::vector<Atom> atoms, Domain domain) : domain_(domain) {
    std::map<double, double> merged;
    for (const auto& a : atoms) {
        if (!std::isfinite(a.location) || !std::isfinite(a.weight))
            throw ValidationError("atom locations and weights must be finite");
        const double x = domain == Domain::Circle ? fractional_part(a.location) : a.location;
        merged[x] += a.weight;
    }
    atoms_.reserve(merged.size());
    for (const auto& [x, w] : merged) atoms_.push_back({x, w});
}

double AtomicMeasure::total_variation() const {
    double s = 0.0;
    for (const auto& a : atoms_) s += std::abs(a.weight);
    return s;
}

double AtomicMeasure::pair(const std::function<double(double)>& f) const {
    double s = 0.0;
    for (const auto& a : atoms_) s += a.weight * f(a.location);
    return s;
}

AtomicMeasure discretize_measure(const AtomicMeasure& w, double h) {
    if (!(h > 0.0) || !std::isfinite(h)) throw ValidationError("discretization step must be positive");
    std::vector<Atom> out;
    out.reserve(w.atoms().size());
    if (w.domain() == Domain::Circle) {
        const long n = circle_cells(h);
        for (const auto& a : w.atoms()) {
            long k = static_cast<long>(std::floor(a.location * static_cast<double>(n)));
            k = std::clamp(k, 0L, n - 1);
            out.push_back({static_cast<double>(k) / static_cast<double>(n), a.weight});
        }
    } else {
        for (const auto& a : w.atoms()) out.push_back({std::floor(a.location / h) * h, a.weight});
    }
    return AtomicMeasure(std::move(out), w.domain());
}

AtomicMeasure discretize_measure(const WeightedDensity& w, double h) {
    if (!(h > 0.0) || !std::isfinite(h)) throw ValidationError("discretization step must be positive");
    if (!(w.step > 0.0) || w.values.empty()) throw ValidationError("weighted density needs a positive step and values");
    // The weight is linear between consecutive nodes origin + j*step, j = -1..size;
    // integrate it exactly over every intersection with a cell [kh, (k+1)h).
    const long m = static_cast<long>(w.values.size());
    auto value = [&](long j) { return j >= 0 && j < m ? w.values[static_cast<std::size_t>(j)] : 0.0; };
    std::map<long, double> mass;
    for (long j = -1; j < m; ++j) {
        const double lo = w.origin + static_cast<double>(j) * w.step;
        const double hi = lo + w.step;
        const double v0 = value(j), v1 = value(j + 1);
        if (v0 == 0.0 && v1 == 0.0) continue;
        auto at = [&](double t) { return v0 + (v1 - v0) * (t - lo) / w.step; };
        double a = lo;
        while (a < hi) {
            const long k = static_cast<long>(std::floor(a / h));
            const double b = std::min(hi, static_cast<double>(k + 1) * h);
            if (b <= a) break;
            mass[k] += 0.5 * (b - a) * (at(a) + at(b));
            a = b;
        }
    }
    std::vector<Atom> out;
    for (const auto& [k, v] : mass) out.push_back({static_cast<double>(k) * h, v});
    return AtomicMeasure(std::move(out), Domain::Line);
}

double modulus_of_continuity(const std::function<double(double)>& f, double a, double b, double h, int points) {
    if (!(b > a) || !(h >= 0.0) || points < 2) throw ValidationError("modulus of continuity needs a < b, h >= 0");
    const double dx = (b - a) / (points - 1);
    std::vector<double> v(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) v[static_cast<std::size_t>(i)] = f(a + i * dx);
    const int reach = static_cast<int>(std::ceil(h / dx));
    double w = 0.0;
    for (int i = 0; i < points; ++i)
        for (int j = i + 1; j < points && j <= i + reach; ++j)
            w = std::max(w, std::abs(v[static_cast<std::size_t>(j)] - v[static_cast<std::size_t>(i)]));
    return w;
}

nlohmann::json to_json(const AtomicMeasure& m) {
    nlohmann::json atoms = nlohmann::json::array();
    for (const auto& a : m.atoms()) atoms.push_back({{"location", a.location}, {"weight", a.weight}});
    return {{"domain", m.domain() == Domain::Circle ? "circle" : "line"}, {"atoms", atoms}};
}

AtomicMeasure measure_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ValidationError("measure must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (key != "domain" && key != "atoms") throw ValidationError("unknown measure key '" + key + "'");
    const std::string d = j.value("domain", "line");
    if (d != "line" && d != "circle") throw ValidationError("measure domain must be 'line' or 'circle'");
    std::vector<Atom> atoms;
    for (const auto& a : j.at("atoms")) {
        for (const auto& [key, _] : a.items())
            if (key != "location" && key != "weight") throw ValidationError("unknown atom key '" + key + "'");
        atoms.push_back({a.at("location").get<double>(), a.at("weight").get<double>()});
    }
    return AtomicMeasure(std::move(atoms), d == "circle" ? Domain::Circle : Domain::Line);
}

} // namespace seasonal_spline
