#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "seasonal_spline/dictionary.hpp"
#include "seasonal_spline/measures.hpp"
#include "seasonal_spline/tv_solver.hpp"

namespace seasonal_spline {

/// Continuous-domain ground truth: f_T = sum w_k psi(. - t_k) + sum c_j t^j and
/// f_S = sum v_k rho(. - s_k) + alpha.
struct GroundTruth {
    OperatorSpec trend = OperatorSpec::derivative(2, Role::Trend);
    OperatorSpec seasonal = OperatorSpec::derivative(2, Role::Seasonal);
    std::vector<Atom> trend_atoms;
    std::vector<double> poly;
    std::vector<Atom> seasonal_atoms;
    double alpha = 0.0;

    /// Checks the conventions of the operator pair: N_T polynomial coefficients,
    /// zero-sum seasonal weights unless both operators are invertible, and a
    /// constant only when the trend is invertible and the seasonal operator is not.
    void validate() const;
};

/// Evaluates a ground truth; Green's functions are built once.
class TruthEvaluator {
public:
    explicit TruthEvaluator(const GroundTruth& truth, FourierOptions fourier = {});

    std::pair<double, double> operator()(double t) const;
    /// phi(f_T + f_S), exact up to the quadrature of the sensing module.
    double measure(const SensingFunctional& phi) const;

private:
    GroundTruth truth_;
    GreensFunction psi_, rho_;
};

struct Dataset {
    Eigen::VectorXd y;
    Eigen::VectorXd clean;
    std::vector<SensingFunctional> plan;
    GroundTruth truth;
    double sigma = 0.0;
    std::uint64_t seed = 0;
};

/// y_l = phi_l(f_T + f_S) + sigma g_l with g drawn from a seeded mt19937_64.
Dataset simulate(const GroundTruth& truth, const std::vector<SensingFunctional>& plan, double sigma,
                 std::uint64_t seed, FourierOptions fourier = {});

nlohmann::json to_json(const GroundTruth& t);
GroundTruth truth_from_json(const nlohmann::json& j);

/// One grid of a refinement ladder. max_iters overrides the solver budget for this rung.
struct Rung {
    double h_T = 0.0;
    int n_S = 1;
    std::optional<long> max_iters;
};

struct LadderProblem {
    OperatorSpec trend = OperatorSpec::derivative(2, Role::Trend);
    OperatorSpec seasonal = OperatorSpec::derivative(2, Role::Seasonal);
    std::vector<SensingFunctional> plan;
    Eigen::VectorXd y;
    SolverConfig solver;
    double t_lo = 0.0, t_hi = 1.0;     // trend knot window
    std::optional<double> margin_width; // knots extend this far past the window; default 2
    FourierOptions fourier;
};

struct RungResult {
    Rung rung;
    std::string status = "ok"; // ok, kkt-failed, not-converged, error
    std::string message;
    bool has_solution = false;
    CompositeSolution solution;
    double objective = 0.0;
    KktReport kkt;
    long iterations = 0;
    double l1_trend = 0.0, l1_seasonal = 0.0, l2_poly = 0.0;
    double l1_bound = 0.0;
    bool l1_bound_ok = false;
    double lipschitz_bound = 0.0; // ||a||_1 Lip(psi) + ||c||_2 Lip(monomials) on the probe interval
    double wall_seconds = 0.0;
};

struct ConvergenceReport {
    std::vector<RungResult> rungs;
    std::vector<double> sup_trend;    // sup |f_T^{k+1} - f_T^k| on the probe interval; NaN if a rung has no solution
    std::vector<double> sup_seasonal; // same for f_S on [0, 1)
    double probe_lo = 0.0, probe_hi = 1.0;
    int probe_points = 2048;
    bool nested = false;
    bool monotone = true;          // meaningful only when nested
    double monotone_slack = 1e-9;  // relative, floored at 1
    bool all_kkt = false;

    /// All rungs certified and, for nested ladders, the objective non-increasing.
    bool ok() const { return all_kkt && (!nested || monotone); }
};

/// Solves every rung in order, warm-starting nested rungs from the previous
/// solution. Rung failures are recorded and the ladder continues.
ConvergenceReport run_gamma_ladder(const LadderProblem& problem, const std::vector<Rung>& ladder, double probe_lo,
                                   double probe_hi, int probe_points = 2048);

/// Every trend and seasonal knot of `coarse` is a knot of `fine`.
bool knots_nested(const Dictionary& coarse, const Dictionary& fine);

nlohmann::json to_json(const ConvergenceReport& r);
void write_csv(std::ostream& out, const ConvergenceReport& r);

} // namespace seasonal_spline
