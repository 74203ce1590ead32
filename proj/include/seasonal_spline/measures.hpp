#pragma once

#include <functional>
#include <vector>

#include <json.hpp>

#include "seasonal_spline/sensing.hpp"

namespace seasonal_spline {

enum class Domain { Line, Circle };

struct Atom {
    double location = 0.0;
    double weight = 0.0;
};

/// Finite sum of weighted Dirac masses on the line or on the circle R/Z.
///
/// Circle locations are reduced to [0, 1). Atoms at equal locations are merged
/// and sorted; zero weights are kept so that cancellation stays visible.
class AtomicMeasure {
public:
    AtomicMeasure() = default;
    AtomicMeasure(std::vector<Atom> atoms, Domain domain);

    const std::vector<Atom>& atoms() const { return atoms_; }
    Domain domain() const { return domain_; }

    /// Sum of |weights|.
    double total_variation() const;
    /// Sum of weights times f(location).
    double pair(const std::function<double(double)>& f) const;

private:
    std::vector<Atom> atoms_;
    Domain domain_ = Domain::Line;
};

/// Moves the mass of every cell [kh, (k+1)h) onto kh. On the circle 1/h must
/// be an integer. Never increases the total variation.
AtomicMeasure discretize_measure(const AtomicMeasure& w, double h);

/// Same binning for the measure with the density of a WeightedDensity (on the line).
AtomicMeasure discretize_measure(const WeightedDensity& w, double h);

/// Modulus of continuity of f on [a, b] at scale h from `points` samples. Pairs up
/// to one sample spacing beyond h are compared, so the estimate errs upward.
double modulus_of_continuity(const std::function<double(double)>& f, double a, double b, double h, int points = 4096);

nlohmann::json to_json(const AtomicMeasure& m);
AtomicMeasure measure_from_json(const nlohmann::json& j);

} // namespace seasonal_spline
