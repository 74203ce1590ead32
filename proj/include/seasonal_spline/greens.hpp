#pragma once

#include <complex>
#include <memory>
#include <vector>

#include "seasonal_spline/operators.hpp"

namespace seasonal_spline {

/// Truncation of Fourier-series evaluations. A call fails with TruncationError
/// when the analytic tail bound at the requested point exceeds `tail_tol`.
struct FourierOptions {
    long terms = 2048;
    double tail_tol = 1e-4;
};

enum class GreenMethod {
    TruncatedPower, // t_+^{N-1}/(N-1)!
    Matern,         // Bessel-K closed form of the Sobolev Green's function
    Bernoulli,      // -B_N({t})/N!
    Fourier,        // truncated sum of e^{2 pi i n t} / L^[n]
};

std::string to_string(GreenMethod m);

/// Green's function of a trend operator (role Trend) or periodic Green's
/// function of a seasonal operator (role Seasonal).
///
/// Seasonal Green's functions of non-invertible operators are the zero-mean
/// solutions of L rho = III - 1. Immutable; evaluation is thread-safe.
class GreensFunction {
public:
    struct Evaluation {
        double value = 0.0;
        double tail_bound = 0.0;
    };

    explicit GreensFunction(OperatorSpec source, FourierOptions fourier = {}, bool force_fourier = false);

    const OperatorSpec& source() const { return source_; }
    GreenMethod method() const { return method_; }
    const FourierOptions& fourier() const { return fourier_; }
    int order() const { return order_; }

    double operator()(double t) const { return evaluate(t).value; }
    Evaluation evaluate(double t) const;

    /// Integral over [a, b]; exact for closed forms, a Fourier antiderivative otherwise.
    double integral(double a, double b) const;

    /// Mean over one period (seasonal only): 1/L^[0] when invertible, 0 otherwise.
    double period_mean() const;

private:
    Evaluation fourier_sum(double t) const;
    double fourier_antiderivative_difference(double a, double b) const;
    double tail_scale() const;

    OperatorSpec source_;
    FourierOptions fourier_;
    GreenMethod method_;
    int order_ = 0;
    double exponent_ = 0.0;
    bool monotone_ = true;
    int derivative_order_ = 0;
    double gamma_ = 0.0;
    // 1/L^[n] for n = 0..terms+1 (Fourier method only).
    std::shared_ptr<const std::vector<std::complex<double>>> inverse_;
};

/// Closed-form trend Green's function value. D^N uses t_+^{N-1}/(N-1)!;
/// Sobolev uses the Bessel-K form; compositions are unsupported.
double trend_green_eval(const OperatorSpec& spec, double t);

/// Periodic Green's function value with the default method for the operator.
double periodic_green_eval(const OperatorSpec& spec, double t, FourierOptions fourier = {});

/// Bernoulli polynomial B_n(x) for 0 <= n <= 7.
double bernoulli_polynomial(int n, double x);

/// Fractional part in [0, 1).
double fractional_part(double t);

} // namespace seasonal_spline
