#pragma once

#include <complex>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "seasonal_spline/greens.hpp"
#include "seasonal_spline/quadrature.hpp"

namespace seasonal_spline {

/// Point evaluation f(x).
struct Sampling {
    double x = 0.0;
};

/// Integral of f over [start, start + length).
struct BoxAverage {
    double start = 0.0;
    double length = 1.0;
};

/// Integral of f against a weight given by samples on a uniform grid.
///
/// The weight is the piecewise-linear interpolant of values[k] at
/// origin + k*step and zero outside the table. 1/step and origin/step must be
/// integers so the grid is invariant under integer shifts. The declared decay
/// |phi(t)| <= decay_c / (1 + |t|^decay_p) bounds what the table leaves out.
struct WeightedDensity {
    double origin = 0.0;
    double step = 0.0;
    std::vector<double> values;
    double decay_c = 0.0;
    double decay_p = 2.0;
};

/// Per{phi}: the sum of all integer shifts of a functional, acting on 1-periodic functions.
struct Periodization {
    enum class Kind { Comb, Indicator, Tabulated };
    Kind kind = Kind::Comb;
    double offset = 0.0;            // Comb: the comb sits at offset + Z, offset in [0, 1)
    double start = 0.0;             // Indicator: sum_k 1[start + k, start + k + length)
    double length = 0.0;
    std::vector<double> table;      // Tabulated: values at j/n, j = 0..n-1, linear in between
    double tail_bound = 0.0;        // bound on shifts of the weight the table does not cover

    /// Value of the periodic function at t (Indicator and Tabulated only).
    double operator()(double t) const;
    /// Integral over one period.
    double mass() const;
    bool is_constant() const;
};

class SensingFunctional {
public:
    using Kind = std::variant<Sampling, BoxAverage, WeightedDensity>;

    static SensingFunctional sampling(double x);
    static SensingFunctional box(double start, double length);
    /// Throws NotPeriodizableError when decay_p <= 1.
    static SensingFunctional density(WeightedDensity d);

    const Kind& kind() const { return kind_; }
    const Periodization& periodized() const { return periodized_; }
    bool is_sampling() const { return std::holds_alternative<Sampling>(kind_); }
    std::string describe() const;

    /// Weight value at t (WeightedDensity only).
    double weight(double t) const;
    /// Fourier coefficient of Per{phi}: the integral of phi(t) e^{-2 pi i n t}.
    std::complex<double> fourier_coefficient(long n) const;
    /// Upper bound on |fourier_coefficient(n)| over all n: the L1 mass of the weight.
    double total_variation() const;

    /// <phi, f> on the line. `breaks` mark kinks of f; boxes and densities
    /// are integrated with Gauss-Legendre on pieces between them.
    double pair(const RealFunction& f, std::span<const double> breaks = {}) const;
    /// Points where the functional itself is not smooth (sampling point, box ends).
    std::vector<double> kinks() const;

private:
    explicit SensingFunctional(Kind k);
    Kind kind_;
    Periodization periodized_;
};

/// Periodization with a tolerance on the part of the weight outside its table.
/// Throws TruncationError when the declared decay cannot guarantee `eps`.
Periodization periodize(const SensingFunctional& phi, double eps);

struct TrendAtom {
    enum class Kind { Green, Monomial };
    Kind kind = Kind::Green;
    double knot = 0.0; // Green: psi(. - knot)
    int power = 0;     // Monomial: t^power
};

struct SeasonalAtom {
    enum class Kind { Green, Constant };
    Kind kind = Kind::Green;
    double knot = 0.0; // Green: rho(. - knot)
};

/// phi applied to a trend atom built on `psi`.
double apply_to_trend_atom(const SensingFunctional& phi, const GreensFunction& psi, const TrendAtom& atom);

/// Per{phi} applied to a periodic atom built on `rho`.
double apply_to_seasonal_atom(const SensingFunctional& phi, const GreensFunction& rho, const SeasonalAtom& atom);

nlohmann::json to_json(const SensingFunctional& phi);
SensingFunctional sensing_from_json(const nlohmann::json& j);
nlohmann::json plan_to_json(const std::vector<SensingFunctional>& plan);
std::vector<SensingFunctional> plan_from_json(const nlohmann::json& j);

} // namespace seasonal_spline
