#include "seasonal_spline/quadratic.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "seasonal_spline/errors.hpp"
#include "seasonal_spline/parallel.hpp"

namespace seasonal_spline {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

// Sobolev exponent of an operator that is a single Sobolev factor.
double sobolev_exponent(const OperatorSpec& spec, const char* which) {
    const OperatorSpec* op = &spec;
    while (const auto* c = std::get_if<OperatorSpec::Composition>(&op->kind)) {
        if (c->factors.size() != 1) break;
        op = &c->factors.front();
    }
    if (!is_invertible(spec))
        throw UnsupportedOperatorError(std::string("the quadratic path needs an invertible ") + which +
                                       " operator; " + spec.describe() + " has a null space");
    const auto* s = std::get_if<OperatorSpec::Sobolev>(&op->kind);
    if (!s)
        throw UnsupportedOperatorError(std::string("quadratic kernels support Sobolev ") + which +
                                       " operators only, got " + spec.describe());
    if (!(s->gamma > 0.5))
        throw UnsupportedOperatorError(std::string("the ") + which + " kernel of " + spec.describe() +
                                       " is unbounded; the exponent must exceed 1/2");
    return s->gamma;
}

} // namespace

KernelPair::KernelPair(OperatorSpec trend, OperatorSpec seasonal, FourierOptions fourier)
    : trend_(std::move(trend)), seasonal_(std::move(seasonal)), fourier_(fourier),
      gamma_T_(sobolev_exponent(trend_, "trend")), gamma_S_(sobolev_exponent(seasonal_, "seasonal")),
      trend_green_(OperatorSpec::sobolev(2.0 * gamma_T_, Role::Trend)),
      seasonal_green_(OperatorSpec::sobolev(2.0 * gamma_S_, Role::Seasonal), fourier, true) {
    if (trend_.role != Role::Trend || seasonal_.role != Role::Seasonal)
        throw ValidationError("kernel pair needs a trend and a seasonal operator");
    spectrum_.resize(static_cast<std::size_t>(fourier_.terms) + 1);
    for (long n = 0; n <= fourier_.terms; ++n)
        spectrum_[static_cast<std::size_t>(n)] = 1.0 / std::norm(frequency_sequence(seasonal_, n));
    // |L^[n]|^{-2} <= (2 pi n)^{-s} with s = 2 gamma_S; sum over |n| > M bounded by an integral.
    const double s = 2.0 * gamma_S_;
    tail_ = 2.0 * std::pow(two_pi, -s) * std::pow(static_cast<double>(fourier_.terms), 1.0 - s) / (s - 1.0);
}

double KernelPair::trend(double x, double y) const {
    if (x < y) std::swap(x, y);
    return trend_green_(x - y);
}

double KernelPair::seasonal(double x, double y) const {
    if (x < y) std::swap(x, y);
    return seasonal_green_(x - y);
}

std::string KernelPair::trend_method() const { return gamma_T_ == 1.0 ? "exponential" : "matern-bessel"; }

nlohmann::json KernelPair::describe() const {
    return {{"trend_operator", to_json(trend_)},
            {"seasonal_operator", to_json(seasonal_)},
            {"trend_kernel", trend_method()},
            {"seasonal_kernel", "fourier"},
            {"fourier_terms", fourier_.terms},
            {"seasonal_tail_bound", tail_}};
}

std::vector<std::complex<double>> periodic_coefficients(const SensingFunctional& phi, long terms) {
    std::vector<std::complex<double>> c(static_cast<std::size_t>(terms) + 1);
    for (long n = 0; n <= terms; ++n) c[static_cast<std::size_t>(n)] = phi.fourier_coefficient(n);
    return c;
}

double trend_section(const KernelPair& k, const SensingFunctional& phi, double t) {
    const auto& kind = phi.kind();
    if (const auto* s = std::get_if<Sampling>(&kind)) return k.trend(t, s->x);
    if (const auto* b = std::get_if<BoxAverage>(&kind))
        return k.trend_green().integral(t - b->start - b->length, t - b->start);
    const double brk[1] = {t};
    return phi.pair([&](double u) { return k.trend(t, u); }, brk);
}

GramParts gram_parts(const std::vector<SensingFunctional>& plan, const KernelPair& k) {
    const auto L = static_cast<Eigen::Index>(plan.size());
    if (L == 0) throw ValidationError("the sensing plan is empty");
    const long M = k.fourier().terms;

    std::vector<std::vector<std::complex<double>>> coef(plan.size());
    parallel_for(plan.size(), [&](std::size_t i) { coef[i] = periodic_coefficients(plan[i], M); });

    std::vector<std::pair<Eigen::Index, Eigen::Index>> upper;
    for (Eigen::Index i = 0; i < L; ++i)
        for (Eigen::Index j = i; j < L; ++j) upper.emplace_back(i, j);

    GramParts g{Eigen::MatrixXd(L, L), Eigen::MatrixXd(L, L)};
    const auto& rho = k.seasonal_spectrum();
    parallel_for(upper.size(), [&](std::size_t p) {
        const auto [i, j] = upper[p];
        const auto& phi_i = plan[static_cast<std::size_t>(i)];
        const auto& phi_j = plan[static_cast<std::size_t>(j)];
        const double bound = phi_i.total_variation() * phi_j.total_variation() * k.seasonal_tail();
        if (!(bound <= k.fourier().tail_tol)) {
            std::ostringstream os;
            os << "seasonal Gram entry (" << i << ", " << j << ") has truncation bound " << bound
               << " above tolerance " << k.fourier().tail_tol << " with " << M << " terms";
            throw TruncationError(os.str());
        }
        const auto kinks = phi_j.kinks();
        const double t = phi_i.pair([&](double u) { return trend_section(k, phi_j, u); }, kinks);

        const auto& ci = coef[static_cast<std::size_t>(i)];
        const auto& cj = coef[static_cast<std::size_t>(j)];
        double s = 0.0;
        for (long n = M; n >= 1; --n) {
            const auto idx = static_cast<std::size_t>(n);
            s += rho[idx] * (ci[idx] * std::conj(cj[idx])).real();
        }
        s = rho[0] * (ci[0] * std::conj(cj[0])).real() + 2.0 * s;
        g.trend(i, j) = t;
        g.trend(j, i) = t;
        g.seasonal(i, j) = s;
        g.seasonal(j, i) = s;
    });
    return g;
}

Eigen::MatrixXd gram(const std::vector<SensingFunctional>& plan, const KernelPair& k) {
    return gram_parts(plan, k).total();
}

QuadraticSolve solve_quadratic(const Eigen::MatrixXd& G, const Eigen::VectorXd& y, double lambda) {
    const Eigen::Index L = G.rows();
    if (G.cols() != L || y.size() != L) throw ValidationError("Gram matrix and data sizes do not match");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ValidationError("lambda must be positive and finite");
    if (!G.allFinite() || !y.allFinite()) throw ValidationError("Gram matrix and data must be finite");
    if ((G - G.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, G.cwiseAbs().maxCoeff()))
        throw ValidationError("Gram matrix is not symmetric");

    QuadraticSolve out;
    out.lambda = lambda;
    out.alpha = Eigen::VectorXd::Zero(L);
    const double ynorm = y.norm();
    if (ynorm == 0.0) return out;

    Eigen::MatrixXd system = G;
    system.diagonal().array() += lambda;
    const double scale = std::max(system.trace() / static_cast<double>(L), std::numeric_limits<double>::min());
    const double max_jitter = 1e-6 * scale;

    double jitter = 0.0;
    for (;;) {
        Eigen::MatrixXd shifted = system;
        shifted.diagonal().array() += jitter;
        const Eigen::LLT<Eigen::MatrixXd> llt(shifted);
        if (llt.info() == Eigen::Success) {
            Eigen::VectorXd alpha = llt.solve(y);
            if (alpha.allFinite()) {
                Eigen::VectorXd r = y - system * alpha;
                double rel = r.norm() / ynorm;
                int steps = 0;
                while (rel > 1e-12 && steps < 10) {
                    const Eigen::VectorXd next = alpha + llt.solve(r);
                    const Eigen::VectorXd rn = y - system * next;
                    const double reln = rn.norm() / ynorm;
                    if (!(reln < rel)) break;
                    alpha = next;
                    r = rn;
                    rel = reln;
                    ++steps;
                }
                out.alpha = std::move(alpha);
                out.residual = rel;
                out.jitter = jitter;
                out.refinements = steps;
                return out;
            }
        }
        jitter = jitter == 0.0 ? 1e-14 * scale : jitter * 100.0;
        if (jitter > max_jitter) {
            std::ostringstream os;
            os << "Cholesky factorization of G + lambda I failed up to jitter " << jitter;
            throw ConditioningError(os.str(), jitter);
        }
    }
}

QuadraticSolution::QuadraticSolution(const KernelPair& k, std::vector<SensingFunctional> plan, Eigen::VectorXd alpha)
    : k_(k), plan_(std::move(plan)), alpha_(std::move(alpha)) {
    if (static_cast<std::size_t>(alpha_.size()) != plan_.size())
        throw ValidationError("alpha and the sensing plan have different lengths");
    const long M = k_.fourier().terms;
    combined_.assign(static_cast<std::size_t>(M) + 1, 0.0);
    for (std::size_t l = 0; l < plan_.size(); ++l) {
        const double a = alpha_(static_cast<Eigen::Index>(l));
        if (a == 0.0) continue;
        for (long n = 0; n <= M; ++n) combined_[static_cast<std::size_t>(n)] += a * plan_[l].fourier_coefficient(n);
    }
    for (long n = 0; n <= M; ++n) combined_[static_cast<std::size_t>(n)] *= k_.seasonal_spectrum()[static_cast<std::size_t>(n)];
}

std::pair<double, double> QuadraticSolution::operator()(double t) const {
    double ft = 0.0;
    for (std::size_t l = 0; l < plan_.size(); ++l) {
        const double a = alpha_(static_cast<Eigen::Index>(l));
        if (a != 0.0) ft += a * trend_section(k_, plan_[l], t);
    }
    const double x = fractional_part(t);
    const long M = static_cast<long>(combined_.size()) - 1;
    const std::complex<double> step = std::polar(1.0, two_pi * x);
    std::complex<double> w = step;
    double s = 0.0;
    for (long n = 1; n <= M; ++n) {
        if (n % 64 == 0) w = std::polar(1.0, two_pi * x * static_cast<double>(n));
        s += (combined_[static_cast<std::size_t>(n)] * w).real();
        w *= step;
    }
    return {ft, combined_[0].real() + 2.0 * s};
}

std::pair<double, double> evaluate_quadratic(const Eigen::VectorXd& alpha, const std::vector<SensingFunctional>& plan,
                                             const KernelPair& k, double t) {
    return QuadraticSolution(k, plan, alpha)(t);
}

double quadratic_objective(const GramParts& g, const Eigen::VectorXd& y, double lambda, const Eigen::VectorXd& beta,
                           const Eigen::VectorXd& gamma) {
    const Eigen::VectorXd r = y - g.trend * beta - g.seasonal * gamma;
    return r.squaredNorm() + lambda * (beta.dot(g.trend * beta) + gamma.dot(g.seasonal * gamma));
}

nlohmann::json to_json(const QuadraticSolve& s) {
    return {{"lambda", s.lambda},
            {"alpha", std::vector<double>(s.alpha.data(), s.alpha.data() + s.alpha.size())},
            {"relative_residual", s.residual},
            {"jitter", s.jitter},
            {"refinements", s.refinements}};
}

} // namespace seasonal_spline
