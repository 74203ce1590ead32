#pragma once

#include <optional>
#include <ostream>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "seasonal_spline/greens.hpp"
#include "seasonal_spline/operators.hpp"
#include "seasonal_spline/sensing.hpp"

namespace seasonal_spline {

/// Discretization grids. Trend knots are the multiples of h_T inside the
/// window widened by `margin` knots on each side; seasonal knots are k/n_S.
struct GridSpec {
    double h_T = 0.0;
    double t_lo = 0.0;
    double t_hi = 1.0;
    std::optional<int> margin; // defaults to ceil(2 / h_T)
    int n_S = 1;

    int margin_count() const;
    double h_S() const { return 1.0 / n_S; }
    void validate() const;
};

/// n_S = 1/h_S, or ValidationError when 1/h_S is not an integer.
int seasonal_count_from_step(double h_S);

enum class CaseFlag {
    BothInvertible,             // N_T = 0, N_S = 0
    TrendOrderPositive,         // N_T >= 1
    TrendInvertibleSeasonalNot, // N_T = 0, N_S >= 1
};

std::string to_string(CaseFlag c);

struct BlockRange {
    Eigen::Index begin = 0;
    Eigen::Index size = 0;
    Eigen::Index end() const { return begin + size; }
};

/// Column layout: [trend Greens | monomials t^0..t^{N_T-1} | seasonal Greens | constant].
struct Blocks {
    BlockRange trend, poly, seasonal, constant;
    Eigen::Index cols() const { return constant.end(); }
};

class Dictionary {
public:
    Dictionary(OperatorSpec trend, OperatorSpec seasonal, GridSpec grid, FourierOptions fourier = {});

    const OperatorSpec& trend_operator() const { return trend_; }
    const OperatorSpec& seasonal_operator() const { return seasonal_; }
    const GridSpec& grid() const { return grid_; }
    CaseFlag case_flag() const { return case_; }
    int trend_order() const { return n_t_; }
    int seasonal_order() const { return n_s_; }
    bool has_constant() const { return case_ == CaseFlag::TrendInvertibleSeasonalNot; }
    bool zero_sum_active() const { return case_ != CaseFlag::BothInvertible; }

    const std::vector<double>& trend_knots() const { return trend_knots_; }
    const std::vector<double>& seasonal_knots() const { return seasonal_knots_; }
    const Blocks& blocks() const { return blocks_; }

    const GreensFunction& psi() const { return psi_; }
    const GreensFunction& rho() const { return rho_; }

    nlohmann::json describe() const;

private:
    OperatorSpec trend_, seasonal_;
    GridSpec grid_;
    CaseFlag case_;
    int n_t_, n_s_;
    std::vector<double> trend_knots_, seasonal_knots_;
    Blocks blocks_;
    GreensFunction psi_, rho_;
};

Dictionary build_dictionary(const OperatorSpec& trend, const OperatorSpec& seasonal, const GridSpec& grid,
                            FourierOptions fourier = {});

struct DesignMatrix {
    Eigen::MatrixXd A;
    Blocks blocks;
    bool zero_sum = false;
};

/// Entry (l, j) is functional l applied to atom j. Rows are filled in parallel.
/// Throws AdmissibilityError for samplings the operator pair cannot evaluate.
DesignMatrix assemble(const Dictionary& dict, const std::vector<SensingFunctional>& plan);

void write_csv(std::ostream& out, const DesignMatrix& m);

/// Coefficient blocks (a, c, b, alpha) in the dictionary's column order.
struct CompositeSolution {
    Eigen::VectorXd a, c, b;
    double alpha = 0.0;
    bool has_alpha = false;
    double objective = 0.0;

    static CompositeSolution zeros(const Blocks& blocks);
    static CompositeSolution from_stacked(const Blocks& blocks, const Eigen::VectorXd& x);
    Eigen::VectorXd stacked() const;
};

/// (f_T(t), f_S(t)).
std::pair<double, double> evaluate_solution(const Dictionary& dict, const CompositeSolution& sol, double t);

/// lambda_T ||a||_1 + lambda_S ||b||_1.
double regularizer(const CompositeSolution& sol, double lambda_T, double lambda_S);

/// Native-space p-norm in coefficient form; p >= 1, infinity allowed.
double composite_norm(const Dictionary& dict, const CompositeSolution& sol, double p);

} // namespace seasonal_spline
