#pragma once

#include <complex>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace seasonal_spline {

enum class Role { Trend, Seasonal };

std::string to_string(Role role);

/// A trend- or seasonal-admissible regularization operator.
///
/// Derivative(N) is D^N, Sobolev(g) is (Id - Delta)^{g/2}, and a Composition
/// multiplies the frequency responses of its factors. The identity is the
/// empty composition.
struct OperatorSpec {
    struct Derivative {
        int order = 1;
    };
    struct Sobolev {
        double gamma = 0.0;
    };
    struct Composition {
        std::vector<OperatorSpec> factors;
    };
    using Kind = std::variant<Derivative, Sobolev, Composition>;

    Kind kind;
    Role role = Role::Trend;

    static OperatorSpec derivative(int order, Role role);
    static OperatorSpec sobolev(double gamma, Role role);
    static OperatorSpec composition(std::vector<OperatorSpec> factors, Role role);

    /// Same operator acting in the other domain (line <-> circle).
    OperatorSpec with_role(Role r) const;

    /// Throws ValidationError for Derivative(N < 1), non-finite gamma, or a bad factor.
    void validate() const;

    /// Short human-readable form, e.g. "D^2" or "(Id-Delta)^(1.5/2)".
    std::string describe() const;

    bool operator==(const OperatorSpec& other) const;
};

/// N for D^N, 0 for Sobolev, and the sum over the factors of a composition.
int admissibility_order(const OperatorSpec& spec);

inline bool is_invertible(const OperatorSpec& spec) { return admissibility_order(spec) == 0; }

/// Frequency response of a trend operator: (i w)^N, (1 + w^2)^{g/2}, products.
std::complex<double> frequency_response(const OperatorSpec& spec, double omega);

/// Frequency sequence of a seasonal operator: (2 pi i n)^N, (1 + 4 pi^2 n^2)^{g/2}, products.
std::complex<double> frequency_sequence(const OperatorSpec& spec, long n);

/// Sum of derivative orders and Sobolev exponents; |L^[n]| grows like |n|^s.
double smoothing_exponent(const OperatorSpec& spec);

/// Point evaluation is continuous on the native space of the pair.
///
/// Derivative factors need order >= 2 and Sobolev factors need gamma > 1.
/// A composition is accepted only when one factor passes on its own and no
/// factor is a Sobolev operator with negative exponent.
bool sampling_admissible(const OperatorSpec& trend, const OperatorSpec& seasonal);

/// Names the first rule violated by sampling, or an empty string when admissible.
std::string sampling_violation(const OperatorSpec& trend, const OperatorSpec& seasonal);

nlohmann::json to_json(const OperatorSpec& spec);
OperatorSpec operator_from_json(const nlohmann::json& j, Role role);

} // namespace seasonal_spline
