#pragma once

#include <functional>
#include <span>

namespace seasonal_spline {

using RealFunction = std::function<double(double)>;

/// Adaptive Simpson on [a, b] with Richardson correction.
///
/// Throws IntegrationError when the requested absolute tolerance is not met
/// before the recursion depth limit.
double adaptive_simpson(const RealFunction& f, double a, double b, double tol, int max_depth = 40);

/// Same, after splitting [a, b] at every breakpoint that falls strictly inside.
/// Breakpoints mark kinks or jumps of the integrand.
double adaptive_simpson_split(const RealFunction& f, double a, double b, std::span<const double> breaks,
                              double tol, int max_depth = 40);

/// Composite Gauss-Legendre rule with `panels` equal panels of `order` nodes (order in 2..10).
double gauss_legendre(const RealFunction& f, double a, double b, int panels, int order = 8);

} // namespace seasonal_spline
