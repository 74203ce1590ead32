#include <doctest.h>

#include <cmath>
#include <numbers>

#include "seasonal_spline/errors.hpp"
#include "seasonal_spline/operators.hpp"

using namespace seasonal_spline;
using std::numbers::pi;

TEST_CASE("admissibility order") {
    CHECK(admissibility_order(OperatorSpec::derivative(2, Role::Trend)) == 2);
    CHECK(admissibility_order(OperatorSpec::sobolev(2.0, Role::Trend)) == 0);
    auto comp = OperatorSpec::composition(
        {OperatorSpec::derivative(1, Role::Trend), OperatorSpec::sobolev(1.0, Role::Trend)}, Role::Trend);
    CHECK(admissibility_order(comp) == 1);
    CHECK(admissibility_order(OperatorSpec::composition({}, Role::Trend)) == 0);
    CHECK_THROWS_AS(OperatorSpec::derivative(0, Role::Trend), ValidationError);
    CHECK_THROWS_AS(OperatorSpec::sobolev(std::nan(""), Role::Seasonal), ValidationError);
}

TEST_CASE("frequency response") {
    auto s1 = OperatorSpec::sobolev(1.0, Role::Trend);
    CHECK(std::abs(frequency_response(s1, 1.0) - std::sqrt(2.0)) < 1e-15);
    CHECK(std::abs(frequency_response(OperatorSpec::derivative(1, Role::Trend), 0.0)) == 0.0);
    const std::complex<double> expected = std::complex<double>(0.0, 2.0) * std::complex<double>(0.0, 2.0);
    CHECK(std::abs(frequency_response(OperatorSpec::derivative(2, Role::Trend), 2.0) - expected) < 1e-14);
    CHECK_THROWS_AS(frequency_response(OperatorSpec::derivative(2, Role::Seasonal), 1.0), ValidationError);
}

TEST_CASE("frequency sequence") {
    auto s2 = OperatorSpec::sobolev(2.0, Role::Seasonal);
    CHECK(std::abs(frequency_sequence(s2, 1) - (1.0 + 4.0 * pi * pi)) < 1e-12);
    CHECK(std::abs(frequency_sequence(OperatorSpec::derivative(3, Role::Seasonal), 0)) == 0.0);
    // e^{2 pi i t} differentiated once picks up 2 pi i.
    const auto d1 = frequency_sequence(OperatorSpec::derivative(1, Role::Seasonal), 1);
    CHECK(std::abs(d1 - std::complex<double>(0.0, 2.0 * pi)) < 1e-14);
}

TEST_CASE("frequency sequence samples the response at 2 pi n") {
    std::vector<OperatorSpec> ops{
        OperatorSpec::derivative(1, Role::Trend), OperatorSpec::derivative(3, Role::Trend),
        OperatorSpec::sobolev(1.5, Role::Trend), OperatorSpec::sobolev(-0.5, Role::Trend),
        OperatorSpec::composition({OperatorSpec::derivative(2, Role::Trend), OperatorSpec::sobolev(2.0, Role::Trend)},
                                  Role::Trend)};
    for (const auto& op : ops) {
        const auto seasonal = op.with_role(Role::Seasonal);
        for (long n = -5; n <= 5; ++n) {
            const auto a = frequency_sequence(seasonal, n);
            const auto b = frequency_response(op, 2.0 * pi * static_cast<double>(n));
            CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)));
        }
    }
}

TEST_CASE("sampling admissibility") {
    auto d = [](int n, Role r) { return OperatorSpec::derivative(n, r); };
    auto s = [](double g, Role r) { return OperatorSpec::sobolev(g, r); };
    CHECK(sampling_admissible(d(2, Role::Trend), d(2, Role::Seasonal)));
    CHECK_FALSE(sampling_admissible(d(1, Role::Trend), d(2, Role::Seasonal)));
    CHECK_FALSE(sampling_admissible(d(2, Role::Trend), d(1, Role::Seasonal)));
    CHECK(sampling_admissible(s(1.5, Role::Trend), s(1.5, Role::Seasonal)));
    CHECK_FALSE(sampling_admissible(s(1.0, Role::Trend), s(1.5, Role::Seasonal)));
    CHECK(sampling_violation(d(1, Role::Trend), d(2, Role::Seasonal)).find("N_T=1") != std::string::npos);

    auto comp = OperatorSpec::composition({d(2, Role::Trend), s(1.0, Role::Trend)}, Role::Trend);
    CHECK(sampling_admissible(comp, d(2, Role::Seasonal)));
    auto rough = OperatorSpec::composition({d(2, Role::Trend), s(-0.5, Role::Trend)}, Role::Trend);
    CHECK_FALSE(sampling_admissible(rough, d(2, Role::Seasonal)));
    CHECK_THROWS_AS(sampling_admissible(d(2, Role::Seasonal), d(2, Role::Seasonal)), ValidationError);
}

TEST_CASE("operator json round trip") {
    auto comp = OperatorSpec::composition(
        {OperatorSpec::derivative(2, Role::Trend), OperatorSpec::sobolev(1.5, Role::Trend)}, Role::Trend);
    const auto j = to_json(comp);
    CHECK(operator_from_json(j, Role::Trend) == comp);
    CHECK_THROWS_AS(operator_from_json(nlohmann::json{{"kind", "derivative"}, {"order", 2}, {"extra", 1}}, Role::Trend),
                    ValidationError);
    CHECK_THROWS_AS(operator_from_json(nlohmann::json{{"kind", "spline"}}, Role::Trend), ValidationError);
    CHECK_THROWS_AS(operator_from_json(nlohmann::json{{"kind", "derivative"}, {"order", 0}}, Role::Trend),
                    ValidationError);
}
