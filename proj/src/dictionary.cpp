#include "seasonal_spline/dictionary.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "seasonal_spline/errors.hpp"
#include "seasonal_spline/parallel.hpp"

namespace seasonal_spline {

int GridSpec::margin_count() const { return margin ? *margin : static_cast<int>(std::ceil(2.0 / h_T - 1e-12)); }

void GridSpec::validate() const {
    if (!(h_T > 0.0) || !std::isfinite(h_T)) throw ValidationError("grid h_T must be positive and finite");
    if (!std::isfinite(t_lo) || !std::isfinite(t_hi) || !(t_lo <= t_hi))
        throw ValidationError("grid window must satisfy t_lo <= t_hi");
    if (margin && *margin < 0) throw ValidationError("grid margin must be >= 0");
    if (n_S < 1) throw ValidationError("grid n_S must be a positive integer");
    const double span = (t_hi - t_lo) / h_T + 2.0 * margin_count();
    if (span > 5e6) throw ValidationError("trend grid has too many knots");
}

int seasonal_count_from_step(double h_S) {
    if (!(h_S > 0.0) || h_S > 1.0) throw ValidationError("h_S must lie in (0, 1]");
    const double n = 1.0 / h_S;
    const double r = std::round(n);
    if (std::abs(n - r) > 1e-9 * r) {
        std::ostringstream os;
        os << "1/h_S = " << n << " is not an integer";
        throw ValidationError(os.str());
    }
    return static_cast<int>(r);
}

std::string to_string(CaseFlag c) {
    switch (c) {
    case CaseFlag::BothInvertible:
        return "both-invertible";
    case CaseFlag::TrendOrderPositive:
        return "trend-order-positive";
    case CaseFlag::TrendInvertibleSeasonalNot:
        return "trend-invertible-seasonal-not";
    }
    return "unknown";
}

namespace {

CaseFlag classify(int n_t, int n_s) {
    if (n_t >= 1) return CaseFlag::TrendOrderPositive;
    return n_s >= 1 ? CaseFlag::TrendInvertibleSeasonalNot : CaseFlag::BothInvertible;
}

const OperatorSpec& checked_role(const OperatorSpec& op, Role role) {
    if (op.role != role) throw ValidationError("expected a " + to_string(role) + " operator, got " + to_string(op.role));
    return op;
}

} // namespace

Dictionary::Dictionary(OperatorSpec trend, OperatorSpec seasonal, GridSpec grid, FourierOptions fourier)
    : trend_(checked_role(trend, Role::Trend)),
      seasonal_(checked_role(seasonal, Role::Seasonal)),
      grid_((grid.validate(), grid)),
      case_(classify(admissibility_order(trend_), admissibility_order(seasonal_))),
      n_t_(admissibility_order(trend_)),
      n_s_(admissibility_order(seasonal_)),
      psi_(trend_, fourier),
      rho_(seasonal_, fourier) {
    const double h = grid_.h_T;
    const int m = grid_.margin_count();
    const auto k_lo = static_cast<long>(std::ceil(grid_.t_lo / h - 1e-9)) - m;
    const auto k_hi = static_cast<long>(std::floor(grid_.t_hi / h + 1e-9)) + m;
    for (long k = k_lo; k <= k_hi; ++k) trend_knots_.push_back(static_cast<double>(k) * h);
    for (int k = 0; k < grid_.n_S; ++k) seasonal_knots_.push_back(static_cast<double>(k) / grid_.n_S);

    blocks_.trend = {0, static_cast<Eigen::Index>(trend_knots_.size())};
    blocks_.poly = {blocks_.trend.end(), n_t_};
    blocks_.seasonal = {blocks_.poly.end(), grid_.n_S};
    blocks_.constant = {blocks_.seasonal.end(), has_constant() ? 1 : 0};
}

nlohmann::json Dictionary::describe() const {
    return {
        {"version", "v1"},
        {"trend_operator", to_json(trend_)},
        {"seasonal_operator", to_json(seasonal_)},
        {"case", to_string(case_)},
        {"N_T", n_t_},
        {"N_S", n_s_},
        {"grid",
         {{"h_T", grid_.h_T}, {"t_lo", grid_.t_lo}, {"t_hi", grid_.t_hi}, {"margin", grid_.margin_count()},
          {"n_S", grid_.n_S}}},
        {"trend_knots", trend_knots_},
        {"seasonal_knots", seasonal_knots_},
        {"constant", has_constant()},
        {"zero_sum", zero_sum_active()},
        {"columns", blocks_.cols()},
    };
}

Dictionary build_dictionary(const OperatorSpec& trend, const OperatorSpec& seasonal, const GridSpec& grid,
                            FourierOptions fourier) {
    return Dictionary(trend, seasonal, grid, fourier);
}

DesignMatrix assemble(const Dictionary& dict, const std::vector<SensingFunctional>& plan) {
    if (plan.empty()) throw ValidationError("sensing plan is empty");
    const std::string violation = sampling_violation(dict.trend_operator(), dict.seasonal_operator());
    if (!violation.empty()) {
        for (std::size_t l = 0; l < plan.size(); ++l) {
            if (plan[l].is_sampling())
                throw AdmissibilityError("functional " + std::to_string(l) + " (" + plan[l].describe() +
                                         ") is not admissible: " + violation);
        }
    }

    DesignMatrix out;
    out.blocks = dict.blocks();
    out.zero_sum = dict.zero_sum_active();
    const auto& b = out.blocks;
    out.A.resize(static_cast<Eigen::Index>(plan.size()), b.cols());

    const auto& tk = dict.trend_knots();
    const auto& sk = dict.seasonal_knots();
    parallel_for(plan.size(), [&](std::size_t l) {
        const auto row = static_cast<Eigen::Index>(l);
        const auto& phi = plan[l];
        for (Eigen::Index j = 0; j < b.trend.size; ++j)
            out.A(row, b.trend.begin + j) =
                apply_to_trend_atom(phi, dict.psi(), {TrendAtom::Kind::Green, tk[static_cast<std::size_t>(j)], 0});
        for (Eigen::Index j = 0; j < b.poly.size; ++j)
            out.A(row, b.poly.begin + j) =
                apply_to_trend_atom(phi, dict.psi(), {TrendAtom::Kind::Monomial, 0.0, static_cast<int>(j)});
        for (Eigen::Index j = 0; j < b.seasonal.size; ++j)
            out.A(row, b.seasonal.begin + j) = apply_to_seasonal_atom(
                phi, dict.rho(), {SeasonalAtom::Kind::Green, sk[static_cast<std::size_t>(j)]});
        if (b.constant.size == 1)
            out.A(row, b.constant.begin) = apply_to_seasonal_atom(phi, dict.rho(), {SeasonalAtom::Kind::Constant, 0.0});
    });
    if (!out.A.allFinite()) throw ValidationError("design matrix has non-finite entries");
    return out;
}

void write_csv(std::ostream& out, const DesignMatrix& m) {
    const auto& b = m.blocks;
    for (Eigen::Index j = 0; j < m.A.cols(); ++j) {
        if (j) out << ',';
        if (j < b.trend.end()) {
            out << "a" << j - b.trend.begin;
        } else if (j < b.poly.end()) {
            out << "c" << j - b.poly.begin;
        } else if (j < b.seasonal.end()) {
            out << "b" << j - b.seasonal.begin;
        } else {
            out << "alpha";
        }
    }
    out << '\n' << std::setprecision(17);
    for (Eigen::Index i = 0; i < m.A.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.A.cols(); ++j) {
            if (j) out << ',';
            out << m.A(i, j);
        }
        out << '\n';
    }
}

CompositeSolution CompositeSolution::zeros(const Blocks& blocks) {
    CompositeSolution s;
    s.a = Eigen::VectorXd::Zero(blocks.trend.size);
    s.c = Eigen::VectorXd::Zero(blocks.poly.size);
    s.b = Eigen::VectorXd::Zero(blocks.seasonal.size);
    s.has_alpha = blocks.constant.size == 1;
    return s;
}

CompositeSolution CompositeSolution::from_stacked(const Blocks& blocks, const Eigen::VectorXd& x) {
    if (x.size() != blocks.cols()) throw ValidationError("stacked coefficient vector has the wrong length");
    CompositeSolution s;
    s.a = x.segment(blocks.trend.begin, blocks.trend.size);
    s.c = x.segment(blocks.poly.begin, blocks.poly.size);
    s.b = x.segment(blocks.seasonal.begin, blocks.seasonal.size);
    s.has_alpha = blocks.constant.size == 1;
    s.alpha = s.has_alpha ? x(blocks.constant.begin) : 0.0;
    return s;
}

Eigen::VectorXd CompositeSolution::stacked() const {
    Eigen::VectorXd x(a.size() + c.size() + b.size() + (has_alpha ? 1 : 0));
    x << a, c, b;
    if (has_alpha) x(x.size() - 1) = alpha;
    return x;
}

namespace {

void check_lengths(const Dictionary& dict, const CompositeSolution& sol) {
    const auto& b = dict.blocks();
    if (sol.a.size() != b.trend.size || sol.c.size() != b.poly.size || sol.b.size() != b.seasonal.size ||
        sol.has_alpha != (b.constant.size == 1)) {
        std::ostringstream os;
        os << "coefficient blocks (" << sol.a.size() << ", " << sol.c.size() << ", " << sol.b.size() << ", "
           << (sol.has_alpha ? 1 : 0) << ") do not match the dictionary (" << b.trend.size << ", " << b.poly.size
           << ", " << b.seasonal.size << ", " << b.constant.size << ")";
        throw ValidationError(os.str());
    }
}

} // namespace

std::pair<double, double> evaluate_solution(const Dictionary& dict, const CompositeSolution& sol, double t) {
    check_lengths(dict, sol);
    double trend = 0.0;
    const auto& tk = dict.trend_knots();
    for (Eigen::Index k = 0; k < sol.a.size(); ++k)
        if (sol.a(k) != 0.0) trend += sol.a(k) * dict.psi()(t - tk[static_cast<std::size_t>(k)]);
    double power = 1.0;
    for (Eigen::Index m = 0; m < sol.c.size(); ++m) {
        trend += sol.c(m) * power;
        power *= t;
    }
    double seasonal = sol.has_alpha ? sol.alpha : 0.0;
    const double x = fractional_part(t);
    const auto& sk = dict.seasonal_knots();
    for (Eigen::Index k = 0; k < sol.b.size(); ++k)
        if (sol.b(k) != 0.0) seasonal += sol.b(k) * dict.rho()(x - sk[static_cast<std::size_t>(k)]);
    return {trend, seasonal};
}

double regularizer(const CompositeSolution& sol, double lambda_T, double lambda_S) {
    // Index-order sums, so the value does not depend on vectorization.
    double ta = 0.0, tb = 0.0;
    for (Eigen::Index j = 0; j < sol.a.size(); ++j) ta += std::abs(sol.a(j));
    for (Eigen::Index j = 0; j < sol.b.size(); ++j) tb += std::abs(sol.b(j));
    return lambda_T * ta + lambda_S * tb;
}

double composite_norm(const Dictionary& dict, const CompositeSolution& sol, double p) {
    check_lengths(dict, sol);
    if (!(p >= 1.0)) throw ValidationError("composite norm needs p >= 1");
    double trend = sol.a.lpNorm<1>();
    double seasonal = sol.b.lpNorm<1>();
    switch (dict.case_flag()) {
    case CaseFlag::BothInvertible:
        break;
    case CaseFlag::TrendOrderPositive:
        trend += sol.c.norm();
        break;
    case CaseFlag::TrendInvertibleSeasonalNot:
        seasonal += std::abs(sol.alpha);
        break;
    }
    if (std::isinf(p)) return std::max(trend, seasonal);
    return std::pow(std::pow(trend, p) + std::pow(seasonal, p), 1.0 / p);
}

} // namespace seasonal_spline
