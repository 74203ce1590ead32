#pragma once

#include <complex>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "seasonal_spline/greens.hpp"
#include "seasonal_spline/sensing.hpp"

namespace seasonal_spline {

/// Reproducing kernels of the quadratic problem.
///
/// k_T(x, y) = psi_{L_T^* L_T}(x - y), the Green's function of the squared
/// trend operator. k_S(x, y) = rho_{L_S^* L_S}({x} - {y}), a Fourier series
/// over |L_S^[n]|^{-2}. Both operators must be Sobolev with exponent > 1/2 so
/// the kernels are bounded. Immutable after construction.
class KernelPair {
public:
    KernelPair(OperatorSpec trend, OperatorSpec seasonal, FourierOptions fourier = {});

    const OperatorSpec& trend_operator() const { return trend_; }
    const OperatorSpec& seasonal_operator() const { return seasonal_; }
    double gamma_T() const { return gamma_T_; }
    double gamma_S() const { return gamma_S_; }
    const FourierOptions& fourier() const { return fourier_; }

    double trend(double x, double y) const;
    double seasonal(double x, double y) const;

    /// Green's function of L_T^* L_T on the line and of L_S^* L_S on the circle.
    const GreensFunction& trend_green() const { return trend_green_; }
    const GreensFunction& seasonal_green() const { return seasonal_green_; }

    /// |L_S^[n]|^{-2} for n = 0..terms.
    const std::vector<double>& seasonal_spectrum() const { return spectrum_; }
    /// Bound on the neglected part of sum_n |L_S^[n]|^{-2} |c_i[n]| |c_j[n]| per unit of mass.
    double seasonal_tail() const { return tail_; }

    std::string trend_method() const;
    nlohmann::json describe() const;

private:
    OperatorSpec trend_, seasonal_;
    FourierOptions fourier_;
    double gamma_T_ = 0.0, gamma_S_ = 0.0;
    GreensFunction trend_green_, seasonal_green_;
    std::vector<double> spectrum_;
    double tail_ = 0.0;
};

/// Trend and seasonal parts of the Gram matrix; their sum is the system matrix.
struct GramParts {
    Eigen::MatrixXd trend;
    Eigen::MatrixXd seasonal;
    Eigen::MatrixXd total() const { return trend + seasonal; }
};

/// Fourier coefficients of Per{phi} for n = 0..terms.
std::vector<std::complex<double>> periodic_coefficients(const SensingFunctional& phi, long terms);

/// (phi * k_T)(t) = <phi, k_T(t - .)>.
double trend_section(const KernelPair& k, const SensingFunctional& phi, double t);

/// Gram matrix parts. Upper triangle computed in canonical order and mirrored,
/// so both parts are exactly symmetric. Parallel over rows.
/// Throws UnsupportedOperatorError or AdmissibilityError.
GramParts gram_parts(const std::vector<SensingFunctional>& plan, const KernelPair& k);
Eigen::MatrixXd gram(const std::vector<SensingFunctional>& plan, const KernelPair& k);

struct QuadraticSolve {
    Eigen::VectorXd alpha;
    double lambda = 0.0;
    double residual = 0.0; // ||(G + lambda I) alpha - y|| / ||y||
    double jitter = 0.0;   // diagonal shift added to obtain a factorization
    int refinements = 0;
};

/// Solves (G + lambda I) alpha = y by Cholesky with iterative refinement.
/// Escalates a diagonal jitter when the factorization fails and throws
/// ConditioningError once the jitter exceeds 1e-6 trace(G)/L.
QuadraticSolve solve_quadratic(const Eigen::MatrixXd& G, const Eigen::VectorXd& y, double lambda);

/// The coupled reconstruction f_T = sum alpha_l (phi_l * k_T), f_S = sum alpha_l (Per{phi_l} * k_S).
/// Precomputes the combined seasonal spectrum so each evaluation is O(L + terms).
class QuadraticSolution {
public:
    QuadraticSolution(const KernelPair& k, std::vector<SensingFunctional> plan, Eigen::VectorXd alpha);

    std::pair<double, double> operator()(double t) const;
    const Eigen::VectorXd& alpha() const { return alpha_; }

private:
    KernelPair k_;
    std::vector<SensingFunctional> plan_;
    Eigen::VectorXd alpha_;
    std::vector<std::complex<double>> combined_;
};

std::pair<double, double> evaluate_quadratic(const Eigen::VectorXd& alpha, const std::vector<SensingFunctional>& plan,
                                             const KernelPair& k, double t);

/// ||y - G_T beta - G_S gamma||^2 + lambda (beta^T G_T beta + gamma^T G_S gamma): the objective
/// restricted to f_T = sum beta_l (phi_l * k_T), f_S = sum gamma_l (Per{phi_l} * k_S).
double quadratic_objective(const GramParts& g, const Eigen::VectorXd& y, double lambda, const Eigen::VectorXd& beta,
                           const Eigen::VectorXd& gamma);

nlohmann::json to_json(const QuadraticSolve& s);

} // namespace seasonal_spline
