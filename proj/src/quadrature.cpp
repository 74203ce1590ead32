#include "seasonal_spline/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "seasonal_spline/errors.hpp"

namespace seasonal_spline {

namespace {

struct SimpsonState {
    const RealFunction& f;
    int max_depth;
    bool failed = false;
};

double simpson_step(SimpsonState& st, double a, double b, double fa, double fm, double fb, double whole, double tol,
                    int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = st.f(lm);
    const double frm = st.f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    if (depth >= st.max_depth) {
        st.failed = true;
        return left + right + delta / 15.0;
    }
    return simpson_step(st, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1) +
           simpson_step(st, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
}

// Nodes and weights on [-1, 1], computed once per order by Golub-Welsch.
const std::pair<std::vector<double>, std::vector<double>>& legendre_rule(int order) {
    static const auto rules = [] {
        std::vector<std::pair<std::vector<double>, std::vector<double>>> out(11);
        for (int n = 2; n <= 10; ++n) {
            Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
            for (int i = 1; i < n; ++i) {
                const double b = i / std::sqrt(4.0 * i * i - 1.0);
                jac(i, i - 1) = b;
                jac(i - 1, i) = b;
            }
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
            std::vector<double> x(n), w(n);
            for (int i = 0; i < n; ++i) {
                x[i] = es.eigenvalues()(i);
                w[i] = 2.0 * es.eigenvectors()(0, i) * es.eigenvectors()(0, i);
            }
            out[n] = {x, w};
        }
        return out;
    }();
    return rules.at(order);
}

} // namespace

double adaptive_simpson(const RealFunction& f, double a, double b, double tol, int max_depth) {
    if (a == b) return 0.0;
    SimpsonState st{f, max_depth};
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    const double r = simpson_step(st, a, b, fa, fm, fb, whole, tol, 0);
    if (st.failed || !std::isfinite(r)) {
        std::ostringstream os;
        os << "adaptive Simpson did not reach tolerance " << tol << " on [" << a << ", " << b << "]";
        throw IntegrationError(os.str());
    }
    return r;
}

double adaptive_simpson_split(const RealFunction& f, double a, double b, std::span<const double> breaks, double tol,
                              int max_depth) {
    if (a == b) return 0.0;
    const double sign = a < b ? 1.0 : -1.0;
    if (a > b) std::swap(a, b);
    std::vector<double> cuts{a};
    for (double x : breaks)
        if (x > a && x < b) cuts.push_back(x);
    cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    const double per_piece = tol / static_cast<double>(cuts.size() - 1);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
        total += adaptive_simpson(f, cuts[i], cuts[i + 1], per_piece, max_depth);
    return sign * total;
}

double gauss_legendre(const RealFunction& f, double a, double b, int panels, int order) {
    const auto& [x, w] = legendre_rule(std::clamp(order, 2, 10));
    const double h = (b - a) / panels;
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double lo = a + p * h;
        const double mid = lo + 0.5 * h;
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * f(mid + 0.5 * h * x[i]);
        total += 0.5 * h * s;
    }
    return total;
}

} // namespace seasonal_spline
