#include "seasonal_spline/greens.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <sstream>
#include <vector>

#include "seasonal_spline/errors.hpp"
#include "seasonal_spline/quadrature.hpp"

namespace seasonal_spline {

namespace {

constexpr double pi = std::numbers::pi;
constexpr double two_pi = 2.0 * pi;
constexpr double inf = std::numeric_limits<double>::infinity();

constexpr int max_bernoulli_closed_form = 6;

// Bernoulli numbers B_0..B_7 (B_1 = -1/2 convention).
constexpr std::array<double, 8> bernoulli_numbers{1.0, -0.5, 1.0 / 6.0, 0.0, -1.0 / 30.0, 0.0, 1.0 / 42.0, 0.0};

double factorial(int n) {
    double r = 1.0;
    for (int k = 2; k <= n; ++k) r *= k;
    return r;
}

double binomial(int n, int k) { return factorial(n) / (factorial(k) * factorial(n - k)); }

void flatten(const OperatorSpec& spec, std::vector<OperatorSpec>& out) {
    if (const auto* c = std::get_if<OperatorSpec::Composition>(&spec.kind)) {
        for (const auto& f : c->factors) flatten(f, out);
    } else {
        out.push_back(spec);
    }
}

// A composition with exactly one factor behaves as that factor.
OperatorSpec unwrap(const OperatorSpec& spec) {
    std::vector<OperatorSpec> factors;
    flatten(spec, factors);
    if (factors.size() == 1) return factors.front();
    return spec;
}

double truncated_power(int n, double t) {
    if (t < 0.0) return 0.0;
    if (n == 1) return 1.0;
    return std::pow(t, n - 1) / factorial(n - 1);
}

double matern_green(double gamma, double t) {
    if (gamma == 2.0) return 0.5 * std::exp(-std::abs(t));
    const double nu = 0.5 * (gamma - 1.0);
    const double x = std::abs(t);
    const double scale = std::pow(2.0, 0.5 * (1.0 - gamma)) / (std::sqrt(pi) * std::tgamma(0.5 * gamma));
    if (x == 0.0) {
        if (gamma <= 1.0) return inf;
        return std::tgamma(nu) / (2.0 * std::sqrt(pi) * std::tgamma(0.5 * gamma));
    }
    if (x > 700.0) return 0.0;
    return scale * std::pow(x, nu) * std::cyl_bessel_k(std::abs(nu), x);
}

} // namespace

std::string to_string(GreenMethod m) {
    switch (m) {
    case GreenMethod::TruncatedPower:
        return "truncated-power";
    case GreenMethod::Matern:
        return "matern";
    case GreenMethod::Bernoulli:
        return "bernoulli";
    case GreenMethod::Fourier:
        return "fourier";
    }
    return "unknown";
}

double fractional_part(double t) {
    const double f = t - std::floor(t);
    return f >= 1.0 ? 0.0 : f;
}

double bernoulli_polynomial(int n, double x) {
    if (n < 0 || n > 7) throw ValidationError("bernoulli_polynomial supports degrees 0..7");
    // B_n(x) = sum_k C(n,k) B_k x^{n-k}, evaluated by Horner in x.
    double r = 0.0;
    for (int p = n; p >= 0; --p) r = r * x + binomial(n, n - p) * bernoulli_numbers[n - p];
    return r;
}

GreensFunction::GreensFunction(OperatorSpec source, FourierOptions fourier, bool force_fourier)
    : source_(std::move(source)), fourier_(fourier) {
    source_.validate();
    order_ = admissibility_order(source_);
    exponent_ = smoothing_exponent(source_);
    const OperatorSpec op = unwrap(source_);

    std::vector<OperatorSpec> factors;
    flatten(source_, factors);
    for (const auto& f : factors) {
        if (const auto* s = std::get_if<OperatorSpec::Sobolev>(&f.kind); s && s->gamma < 0.0) monotone_ = false;
    }

    if (source_.role == Role::Trend) {
        if (force_fourier) throw UnsupportedOperatorError("trend Green's functions have no Fourier-series evaluator");
        if (const auto* d = std::get_if<OperatorSpec::Derivative>(&op.kind)) {
            derivative_order_ = d->order;
            method_ = GreenMethod::TruncatedPower;
        } else if (const auto* s = std::get_if<OperatorSpec::Sobolev>(&op.kind)) {
            if (s->gamma <= 0.0)
                throw UnsupportedOperatorError("trend Green's function of " + op.describe() + " is not a function");
            gamma_ = s->gamma;
            method_ = GreenMethod::Matern;
        } else {
            throw UnsupportedOperatorError("no closed-form trend Green's function for " + source_.describe());
        }
        return;
    }

    const auto* d = std::get_if<OperatorSpec::Derivative>(&op.kind);
    if (d && d->order <= max_bernoulli_closed_form && !force_fourier) {
        derivative_order_ = d->order;
        method_ = GreenMethod::Bernoulli;
        return;
    }
    if (exponent_ <= 0.0)
        throw UnsupportedOperatorError("periodic Green's function of " + source_.describe() +
                                       " has non-decaying Fourier coefficients");
    if (fourier_.terms < 1) throw ValidationError("Fourier term count must be positive");
    method_ = GreenMethod::Fourier;

    auto inv = std::make_shared<std::vector<std::complex<double>>>(static_cast<std::size_t>(fourier_.terms) + 2);
    for (long n = 1; n <= fourier_.terms + 1; ++n)
        (*inv)[static_cast<std::size_t>(n)] = 1.0 / frequency_sequence(source_, n);
    (*inv)[0] = order_ >= 1 ? std::complex<double>(0.0) : 1.0 / frequency_sequence(source_, 0);
    inverse_ = std::move(inv);
}

double GreensFunction::tail_scale() const {
    // |1/L^[n]| <= K n^{-s} for n >= 1.
    std::vector<OperatorSpec> factors;
    flatten(source_, factors);
    double k = std::pow(two_pi, -exponent_);
    for (const auto& f : factors)
        if (const auto* s = std::get_if<OperatorSpec::Sobolev>(&f.kind); s && s->gamma < 0.0)
            k *= std::pow(1.0 + 1.0 / (4.0 * pi * pi), -0.5 * s->gamma);
    return k;
}

GreensFunction::Evaluation GreensFunction::fourier_sum(double t) const {
    const long m = fourier_.terms;
    const double x = fractional_part(t);

    const auto& inv = *inverse_;

    double sum = 0.0;
    const std::complex<double> step = std::polar(1.0, two_pi * x);
    std::complex<double> w = step;
    for (long n = 1; n <= m; ++n) {
        if (n % 64 == 0) w = std::polar(1.0, two_pi * x * static_cast<double>(n));
        sum += (inv[static_cast<std::size_t>(n)] * w).real();
        w *= step;
    }
    Evaluation ev;
    ev.value = inv[0].real() + 2.0 * sum;

    double bound = inf;
    if (exponent_ > 1.0) bound = 2.0 * tail_scale() * std::pow(static_cast<double>(m), 1.0 - exponent_) / (exponent_ - 1.0);
    const double s = std::abs(std::sin(pi * x));
    if (monotone_) {
        const double next = std::abs(inv[static_cast<std::size_t>(m) + 1]);
        if (s > 0.0) {
            bound = std::min(bound, 2.0 * next / s);
        } else if (order_ % 2 == 1) {
            // Every remaining term is a multiple of sin(2 pi n t) = 0.
            bound = 0.0;
        }
    }
    ev.tail_bound = bound;
    if (!(bound <= fourier_.tail_tol)) {
        std::ostringstream os;
        os << "Fourier tail bound " << bound << " exceeds tolerance " << fourier_.tail_tol << " for "
           << source_.describe() << " at t=" << t << " with " << m << " terms";
        throw TruncationError(os.str());
    }
    return ev;
}

GreensFunction::Evaluation GreensFunction::evaluate(double t) const {
    switch (method_) {
    case GreenMethod::TruncatedPower:
        return {truncated_power(derivative_order_, t), 0.0};
    case GreenMethod::Matern:
        return {matern_green(gamma_, t), 0.0};
    case GreenMethod::Bernoulli: {
        const int n = derivative_order_;
        const double x = fractional_part(t);
        // The Fourier series of the sawtooth converges to the midpoint of its jump.
        if (n == 1 && x == 0.0) return {0.0, 0.0};
        return {-bernoulli_polynomial(n, x) / factorial(n), 0.0};
    }
    case GreenMethod::Fourier:
        return fourier_sum(t);
    }
    return {};
}

double GreensFunction::fourier_antiderivative_difference(double a, double b) const {
    const long m = fourier_.terms;
    double sum = 0.0;
    const double xa = fractional_part(a);
    const double xb = fractional_part(b);
    for (long n = 1; n <= m; ++n) {
        const std::complex<double> z = (*inverse_)[static_cast<std::size_t>(n)];
        const double dn = static_cast<double>(n);
        const std::complex<double> diff = std::polar(1.0, two_pi * dn * xb) - std::polar(1.0, two_pi * dn * xa);
        sum += (z * diff / std::complex<double>(0.0, two_pi * dn)).real();
    }
    const double bound = (2.0 / pi) * tail_scale() * std::pow(static_cast<double>(m), -exponent_) / exponent_;
    if (!(bound <= fourier_.tail_tol)) {
        std::ostringstream os;
        os << "Fourier antiderivative tail bound " << bound << " exceeds tolerance " << fourier_.tail_tol;
        throw TruncationError(os.str());
    }
    return period_mean() * (b - a) + 2.0 * sum;
}

double GreensFunction::integral(double a, double b) const {
    switch (method_) {
    case GreenMethod::TruncatedPower: {
        const int n = derivative_order_;
        auto anti = [n](double t) { return t <= 0.0 ? 0.0 : std::pow(t, n) / factorial(n); };
        return anti(b) - anti(a);
    }
    case GreenMethod::Matern: {
        const double g = gamma_;
        if (g == 2.0) {
            auto anti = [](double t) { return t >= 0.0 ? 0.5 * (1.0 - std::exp(-t)) : -0.5 * (1.0 - std::exp(t)); };
            return anti(b) - anti(a);
        }
        const std::array<double, 1> kink{0.0};
        return adaptive_simpson_split([g](double t) { return matern_green(g, t); }, a, b, kink,
                                      1e-11 * std::max(1.0, std::abs(b - a)));
    }
    case GreenMethod::Bernoulli: {
        const int n = derivative_order_;
        auto anti = [n](double t) { return -bernoulli_polynomial(n + 1, fractional_part(t)) / factorial(n + 1); };
        // Zero mean makes the antiderivative periodic; only the fractional parts matter.
        return anti(b) - anti(a);
    }
    case GreenMethod::Fourier:
        return fourier_antiderivative_difference(a, b);
    }
    return 0.0;
}

double GreensFunction::period_mean() const {
    if (source_.role != Role::Seasonal) throw ValidationError("period_mean applies to seasonal Green's functions");
    if (order_ >= 1) return 0.0;
    return (1.0 / frequency_sequence(source_, 0)).real();
}

double trend_green_eval(const OperatorSpec& spec, double t) {
    if (spec.role != Role::Trend) throw ValidationError("trend_green_eval needs a trend operator");
    return GreensFunction(spec)(t);
}

double periodic_green_eval(const OperatorSpec& spec, double t, FourierOptions fourier) {
    if (spec.role != Role::Seasonal) throw ValidationError("periodic_green_eval needs a seasonal operator");
    return GreensFunction(spec, fourier)(t);
}

} // namespace seasonal_spline
