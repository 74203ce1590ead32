#pragma once

#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "seasonal_spline/dictionary.hpp"

namespace seasonal_spline {

enum class StepRule { Fixed, Backtracking };

struct SolverConfig {
    double lambda_T = 1.0;
    double lambda_S = 1.0;
    long max_iters = 200000;
    double tol_obj = 1e-10; // relative objective decrease over `window` iterations
    int window = 50;
    double tol_kkt = 1e-6;
    StepRule step = StepRule::Backtracking;
    bool restart = true;
    /// Periodically solve the sign-fixed problem on the current support.
    bool polish = true;

    void validate() const;
};

/// First-order optimality of the discretized problem, with r = 2 A^T (A x - y).
struct KktReport {
    double trend_excess = 0.0;          // max over inactive a_j of |r_j| - lambda_T, clipped at 0
    double seasonal_excess = 0.0;       // same for b with the shift mu
    double trend_stationarity = 0.0;    // max over active a_j of |r_j + lambda_T sign(a_j)|
    double seasonal_stationarity = 0.0; // max over active b_j of |r_j + mu + lambda_S sign(b_j)|
    double mu = 0.0;                    // multiplier of sum(b) = 0
    double unregularized_gradient = 0.0; // max |r_j| over c and alpha
    double tol = 0.0;
    bool verdict = false;

    double active_residual() const { return std::max(trend_stationarity, seasonal_stationarity); }
    double worst() const;
};

struct TvResult {
    CompositeSolution solution;
    KktReport kkt;
    long iterations = 0;
    std::vector<double> history; // objective after each iteration, non-increasing
    double lipschitz = 0.0;
    bool converged = false;
};

/// Iteration budget exhausted. Carries the best iterate and its certificate.
class NonConvergenceError : public std::runtime_error {
public:
    NonConvergenceError(const std::string& what, TvResult best) : std::runtime_error(what), best_(std::move(best)) {}
    const TvResult& best() const { return best_; }

private:
    TvResult best_;
};

/// ||y - A x||^2 + lambda_T ||a||_1 + lambda_S ||b||_1.
double tv_objective(const DesignMatrix& A, const Eigen::VectorXd& y, const CompositeSolution& sol,
                    const SolverConfig& cfg);

/// argmin_b theta ||b||_1 + 1/2 ||b - v||^2 subject to sum(b) = 0.
Eigen::VectorXd prox_l1_zero_sum(const Eigen::VectorXd& v, double theta);

KktReport kkt_check(const CompositeSolution& sol, const DesignMatrix& A, const Eigen::VectorXd& y,
                    const SolverConfig& cfg);

/// Accelerated proximal gradient with monotone restarts. Throws
/// IllPosedNullspaceError when the unpenalized columns are rank deficient and
/// NonConvergenceError when max_iters is exhausted.
TvResult solve_tv(const DesignMatrix& A, const Eigen::VectorXd& y, const SolverConfig& cfg,
                  const CompositeSolution* warm_start = nullptr);

struct Knot {
    double location = 0.0;
    double weight = 0.0;
};

struct SupportReport {
    std::vector<Knot> trend, seasonal;
    int K_T = 0;
    int K_S = 0;
    int bound = 0; // L + 1 - N_T
    bool refit_ok = false;
    CompositeSolution refit;
};

/// Keeps |coef| > eta * max|coef| per block, removes linearly dependent
/// atoms along null directions (fit kept, l1 term not increased), then refits
/// the remaining coefficients with their signs fixed. When the refit would
/// flip a sign the pruned coefficients are reported and refit_ok is false.
SupportReport extract_support(const Dictionary& dict, const DesignMatrix& A, const Eigen::VectorXd& y,
                              const CompositeSolution& sol, const SolverConfig& cfg, double eta);

nlohmann::json to_json(const KktReport& k);
nlohmann::json solution_to_json(const Dictionary& dict, const CompositeSolution& sol);
CompositeSolution solution_from_json(const nlohmann::json& j);

} // namespace seasonal_spline
