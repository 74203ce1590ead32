#include "seasonal_spline/tv_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "seasonal_spline/errors.hpp"

namespace seasonal_spline {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

double soft(double v, double theta) {
    if (v > theta) return v - theta;
    if (v < -theta) return v + theta;
    return 0.0;
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// The problem with c and alpha eliminated: for fixed sparse blocks z = (a, b)
// the optimal unpenalized block is a least-squares fit, so
//   F(z) = ||Q^perp (y - A_S z)||^2 + lambda_T ||a||_1 + lambda_S ||b||_1.
struct Reduced {
    Index n_a = 0, n_b = 0;
    MatrixXd As;                           // [trend | seasonal] columns
    MatrixXd Au;                           // [poly | constant] columns
    Eigen::ColPivHouseholderQR<MatrixXd> qr;
    MatrixXd At;                           // projected sparse columns
    VectorXd yt;                           // projected data
    double lambda_T = 0.0, lambda_S = 0.0;
    bool zero_sum = false;

    Reduced(const DesignMatrix& m, const VectorXd& y, const SolverConfig& cfg) {
        const auto& b = m.blocks;
        const Index rows = m.A.rows();
        n_a = b.trend.size;
        n_b = b.seasonal.size;
        lambda_T = cfg.lambda_T;
        lambda_S = cfg.lambda_S;
        zero_sum = m.zero_sum;
        As.resize(rows, n_a + n_b);
        As << m.A.middleCols(b.trend.begin, n_a), m.A.middleCols(b.seasonal.begin, n_b);
        Au.resize(rows, b.poly.size + b.constant.size);
        Au << m.A.middleCols(b.poly.begin, b.poly.size), m.A.middleCols(b.constant.begin, b.constant.size);
        At = As;
        yt = y;
        if (Au.cols() > 0) {
            qr.compute(Au);
            if (qr.rank() < Au.cols()) {
                std::ostringstream os;
                os << "the null-space columns (polynomials and constant) have rank " << qr.rank() << " < "
                   << Au.cols() << " on this sensing plan; the problem is ill-posed";
                throw IllPosedNullspaceError(os.str());
            }
            const MatrixXd q = qr.householderQ() * MatrixXd::Identity(rows, Au.cols());
            At -= q * (q.transpose() * As);
            yt -= q * (q.transpose() * y);
        }
    }

    double penalty(const VectorXd& z) const {
        return lambda_T * z.head(n_a).lpNorm<1>() + lambda_S * z.tail(n_b).lpNorm<1>();
    }
    double smooth(const VectorXd& z) const { return (At * z - yt).squaredNorm(); }
    double value(const VectorXd& z) const { return smooth(z) + penalty(z); }

    VectorXd prox(const VectorXd& v, double step) const {
        VectorXd out(v.size());
        for (Index j = 0; j < n_a; ++j) out(j) = soft(v(j), step * lambda_T);
        if (zero_sum) {
            out.tail(n_b) = prox_l1_zero_sum(v.tail(n_b), step * lambda_S);
        } else {
            for (Index j = n_a; j < n_a + n_b; ++j) out(j) = soft(v(j), step * lambda_S);
        }
        return out;
    }

    VectorXd unpenalized(const VectorXd& z, const VectorXd& y) const {
        if (Au.cols() == 0) return VectorXd();
        return qr.solve(VectorXd(y - As * z));
    }

    CompositeSolution lift(const DesignMatrix& m, const VectorXd& z, const VectorXd& y) const {
        VectorXd x(m.blocks.cols());
        const auto& b = m.blocks;
        const VectorXd u = unpenalized(z, y);
        x.segment(b.trend.begin, n_a) = z.head(n_a);
        x.segment(b.seasonal.begin, n_b) = z.tail(n_b);
        x.segment(b.poly.begin, b.poly.size) = u.head(b.poly.size);
        x.segment(b.constant.begin, b.constant.size) = u.tail(b.constant.size);
        return CompositeSolution::from_stacked(b, x);
    }

    // Largest eigenvalue of 2 At^T At by power iteration on the smaller Gram side.
    double lipschitz() const {
        const bool wide = At.rows() <= At.cols();
        const MatrixXd g = wide ? MatrixXd(At * At.transpose()) : MatrixXd(At.transpose() * At);
        if (g.rows() == 0) return 1.0;
        VectorXd v = VectorXd::Ones(g.rows()) / std::sqrt(static_cast<double>(g.rows()));
        double est = 0.0;
        for (int it = 0; it < 1000; ++it) {
            VectorXd w = g * v;
            const double n = w.norm();
            if (n == 0.0) return 1.0;
            v = w / n;
            if (std::abs(n - est) <= 1e-10 * n) {
                est = n;
                break;
            }
            est = n;
        }
        return std::max(2.0 * est, 1e-300);
    }

    std::vector<Index> support_of(const VectorXd& z) const {
        std::vector<Index> support;
        for (Index j = 0; j < z.size(); ++j)
            if (z(j) != 0.0) support.push_back(j);
        return support;
    }

    double weight(Index j) const { return j < n_a ? lambda_T : lambda_S; }

    // Moves along null directions of the support columns (and of the zero-sum
    // row) until they are independent. Each move keeps A z and sum(b) and does
    // not increase the l1 term, and zeroes at least one coefficient.
    void prune(VectorXd& z) const {
        for (;;) {
            const auto support = support_of(z);
            const auto m = static_cast<Index>(support.size());
            if (m == 0) return;
            const bool constrained = zero_sum && std::any_of(support.begin(), support.end(),
                                                             [&](Index j) { return j >= n_a; });
            MatrixXd cols(At.rows() + (constrained ? 1 : 0), m);
            for (Index k = 0; k < m; ++k) {
                const Index j = support[static_cast<std::size_t>(k)];
                cols.col(k).head(At.rows()) = At.col(j);
                if (constrained) cols(At.rows(), k) = j >= n_a ? 1.0 : 0.0;
            }
            Eigen::FullPivLU<MatrixXd> lu(cols);
            lu.setThreshold(1e-10);
            if (lu.rank() == m) return;
            VectorXd d = lu.kernel().col(0);
            double slope = 0.0;
            for (Index k = 0; k < m; ++k) slope += weight(support[static_cast<std::size_t>(k)]) *
                                                   sign(z(support[static_cast<std::size_t>(k)])) * d(k);
            if (slope > 0.0) d = -d;
            double step = std::numeric_limits<double>::infinity();
            Index hit = -1;
            for (Index k = 0; k < m; ++k) {
                const double zk = z(support[static_cast<std::size_t>(k)]);
                if (zk * d(k) < 0.0 && -zk / d(k) < step) {
                    step = -zk / d(k);
                    hit = k;
                }
            }
            if (hit < 0) {
                d = -d; // slope is zero here, so either direction is admissible
                for (Index k = 0; k < m; ++k) {
                    const double zk = z(support[static_cast<std::size_t>(k)]);
                    if (zk * d(k) < 0.0 && -zk / d(k) < step) {
                        step = -zk / d(k);
                        hit = k;
                    }
                }
            }
            if (hit < 0) return;
            for (Index k = 0; k < m; ++k) {
                const Index j = support[static_cast<std::size_t>(k)];
                const double moved = z(j) + step * d(k);
                z(j) = k == hit || sign(moved) != sign(z(j)) ? 0.0 : moved;
            }
        }
    }

    // Minimizer of F over {supp z in S, sign z = s} after pruning. Returns the
    // pruned point when the face minimizer flips a sign; `solved` tells which.
    VectorXd refine(const VectorXd& z0, bool& solved) const {
        solved = false;
        VectorXd z = z0;
        prune(z);
        const auto support = support_of(z);
        const auto m = static_cast<Index>(support.size());
        if (m == 0) {
            solved = true;
            return z;
        }
        const bool constrained =
            zero_sum && std::any_of(support.begin(), support.end(), [&](Index j) { return j >= n_a; });
        const Index n = m + (constrained ? 1 : 0);

        MatrixXd cols(At.rows(), m);
        VectorXd rhs(n);
        for (Index k = 0; k < m; ++k) cols.col(k) = At.col(support[static_cast<std::size_t>(k)]);
        MatrixXd kkt = MatrixXd::Zero(n, n);
        kkt.topLeftCorner(m, m) = 2.0 * cols.transpose() * cols;
        rhs.head(m) = 2.0 * cols.transpose() * yt;
        for (Index k = 0; k < m; ++k) {
            const Index j = support[static_cast<std::size_t>(k)];
            rhs(k) -= weight(j) * sign(z(j));
            if (constrained && j >= n_a) {
                kkt(k, m) = 1.0;
                kkt(m, k) = 1.0;
            }
        }
        if (constrained) rhs(m) = 0.0;
        Eigen::FullPivLU<MatrixXd> lu(kkt);
        lu.setThreshold(1e-12);
        if (lu.rank() < n) return z;
        const VectorXd sol = lu.solve(rhs);
        VectorXd out = VectorXd::Zero(z.size());
        for (Index k = 0; k < m; ++k) {
            const Index j = support[static_cast<std::size_t>(k)];
            if (sign(sol(k)) != sign(z(j))) return z;
            out(j) = sol(k);
        }
        solved = true;
        return out;
    }
};

// max over the seasonal block of the KKT violation, for a given shift mu.
double seasonal_violation(const VectorXd& r, const VectorXd& b, double lambda, double mu, double* excess,
                          double* stationarity) {
    double ex = 0.0, st = 0.0;
    for (Index j = 0; j < b.size(); ++j) {
        if (b(j) == 0.0) {
            ex = std::max(ex, std::abs(r(j) + mu) - lambda);
        } else {
            st = std::max(st, std::abs(r(j) + mu + lambda * sign(b(j))));
        }
    }
    ex = std::max(ex, 0.0);
    if (excess) *excess = ex;
    if (stationarity) *stationarity = st;
    return std::max(ex, st);
}

} // namespace

void SolverConfig::validate() const {
    if (!(lambda_T > 0.0) || !(lambda_S > 0.0) || !std::isfinite(lambda_T) || !std::isfinite(lambda_S))
        throw ValidationError("lambda_T and lambda_S must be positive and finite");
    if (max_iters < 1) throw ValidationError("max_iters must be >= 1");
    if (!(tol_obj > 0.0) || !(tol_kkt > 0.0)) throw ValidationError("solver tolerances must be positive");
    if (window < 1) throw ValidationError("objective window must be >= 1");
}

double KktReport::worst() const {
    return std::max({trend_excess, seasonal_excess, trend_stationarity, seasonal_stationarity, unregularized_gradient});
}

double tv_objective(const DesignMatrix& A, const Eigen::VectorXd& y, const CompositeSolution& sol,
                    const SolverConfig& cfg) {
    return (y - A.A * sol.stacked()).squaredNorm() + regularizer(sol, cfg.lambda_T, cfg.lambda_S);
}

Eigen::VectorXd prox_l1_zero_sum(const Eigen::VectorXd& v, double theta) {
    if (theta < 0.0) throw ValidationError("prox threshold must be >= 0");
    const Index n = v.size();
    if (n == 0) return v;
    if (theta == 0.0) return (v.array() - v.mean()).matrix();

    auto total = [&](double mu) {
        double s = 0.0;
        for (Index k = 0; k < n; ++k) s += soft(v(k) - mu, theta);
        return s;
    };
    // total(mu) is non-increasing: >= 0 at the lower end, <= 0 at the upper end.
    double lo = v.minCoeff() - theta;
    double hi = v.maxCoeff() + theta;
    for (int it = 0; it < 48; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (total(mid) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    double mu = 0.5 * (lo + hi);

    // On the identified active set the root is explicit.
    double acc = 0.0;
    Index count = 0;
    for (Index k = 0; k < n; ++k) {
        const double d = v(k) - mu;
        if (std::abs(d) > theta) {
            acc += v(k) - theta * sign(d);
            ++count;
        }
    }
    if (count == 0) return VectorXd::Zero(n);
    const double exact = acc / static_cast<double>(count);
    if (std::abs(total(exact)) <= std::abs(total(mu))) mu = exact;

    VectorXd out(n);
    for (Index k = 0; k < n; ++k) out(k) = soft(v(k) - mu, theta);
    return out;
}

KktReport kkt_check(const CompositeSolution& sol, const DesignMatrix& A, const Eigen::VectorXd& y,
                    const SolverConfig& cfg) {
    const auto& b = A.blocks;
    if (y.size() != A.A.rows()) throw ValidationError("data length does not match the design matrix");
    const VectorXd r = 2.0 * A.A.transpose() * (A.A * sol.stacked() - y);
    KktReport k;
    k.tol = cfg.tol_kkt;
    for (Index j = 0; j < b.trend.size; ++j) {
        const double rj = r(b.trend.begin + j);
        if (sol.a(j) == 0.0) {
            k.trend_excess = std::max(k.trend_excess, std::abs(rj) - cfg.lambda_T);
        } else {
            k.trend_stationarity = std::max(k.trend_stationarity, std::abs(rj + cfg.lambda_T * sign(sol.a(j))));
        }
    }
    for (Index j = b.poly.begin; j < b.poly.end(); ++j)
        k.unregularized_gradient = std::max(k.unregularized_gradient, std::abs(r(j)));
    for (Index j = b.constant.begin; j < b.constant.end(); ++j)
        k.unregularized_gradient = std::max(k.unregularized_gradient, std::abs(r(j)));

    const VectorXd rb = r.segment(b.seasonal.begin, b.seasonal.size);
    if (A.zero_sum && rb.size() > 0) {
        // The violation is convex in mu; golden-section search on a bracket.
        const double span = rb.cwiseAbs().maxCoeff() + cfg.lambda_S + 1.0;
        double lo = -span, hi = span;
        const double g = 0.5 * (std::sqrt(5.0) - 1.0);
        double m1 = hi - g * (hi - lo), m2 = lo + g * (hi - lo);
        double f1 = seasonal_violation(rb, sol.b, cfg.lambda_S, m1, nullptr, nullptr);
        double f2 = seasonal_violation(rb, sol.b, cfg.lambda_S, m2, nullptr, nullptr);
        for (int it = 0; it < 200 && hi - lo > 1e-15 * span; ++it) {
            if (f1 <= f2) {
                hi = m2;
                m2 = m1;
                f2 = f1;
                m1 = hi - g * (hi - lo);
                f1 = seasonal_violation(rb, sol.b, cfg.lambda_S, m1, nullptr, nullptr);
            } else {
                lo = m1;
                m1 = m2;
                f1 = f2;
                m2 = lo + g * (hi - lo);
                f2 = seasonal_violation(rb, sol.b, cfg.lambda_S, m2, nullptr, nullptr);
            }
        }
        k.mu = 0.5 * (lo + hi);
    }
    seasonal_violation(rb, sol.b, cfg.lambda_S, k.mu, &k.seasonal_excess, &k.seasonal_stationarity);
    k.trend_excess = std::max(k.trend_excess, 0.0);
    bool feasible = true;
    if (A.zero_sum) feasible = std::abs(sol.b.sum()) <= 1e-9 * std::max(1.0, sol.b.lpNorm<1>());
    k.verdict = feasible && k.worst() <= cfg.tol_kkt;
    return k;
}

TvResult solve_tv(const DesignMatrix& A, const Eigen::VectorXd& y, const SolverConfig& cfg,
                  const CompositeSolution* warm_start) {
    cfg.validate();
    if (A.A.rows() < 1) throw ValidationError("at least one measurement is required");
    if (y.size() != A.A.rows()) throw ValidationError("data length does not match the design matrix");
    if (!A.A.allFinite() || !y.allFinite()) throw ValidationError("design matrix and data must be finite");
    if (A.A.rows() < A.blocks.poly.size) {
        std::ostringstream os;
        os << "L = " << A.A.rows() << " measurements cannot resolve a null space of dimension N_T = "
           << A.blocks.poly.size;
        throw IllPosedNullspaceError(os.str());
    }

    const Reduced red(A, y, cfg);
    const Index n = red.n_a + red.n_b;

    VectorXd z = VectorXd::Zero(n);
    if (warm_start) {
        if (warm_start->a.size() != red.n_a || warm_start->b.size() != red.n_b)
            throw ValidationError("warm start does not match the design matrix blocks");
        z << warm_start->a, warm_start->b;
        if (red.zero_sum && red.n_b > 0) {
            // Re-center on the support only, so exact zeros stay inactive.
            auto b = z.tail(red.n_b);
            const auto nz = static_cast<double>((b.array() != 0.0).count());
            if (nz > 0.0) {
                const double shift = b.sum() / nz;
                for (Index j = 0; j < red.n_b; ++j)
                    if (b(j) != 0.0) b(j) -= shift;
            }
        }
    }

    TvResult out;
    double L = red.lipschitz();
    if (cfg.step == StepRule::Fixed) L *= 1.01;
    out.lipschitz = L;

    double fz = red.value(z);
    VectorXd w = z;
    double t = 1.0;
    out.history.reserve(1024);

    auto certify = [&](const VectorXd& zz) {
        out.solution = red.lift(A, zz, y);
        out.solution.objective = tv_objective(A, y, out.solution, cfg);
        out.kkt = kkt_check(out.solution, A, y, cfg);
        return out.kkt.verdict;
    };
    auto window_ok = [&]() {
        const auto h = out.history.size();
        if (h <= static_cast<std::size_t>(cfg.window)) return false;
        const double drop = out.history[h - 1 - static_cast<std::size_t>(cfg.window)] - out.history[h - 1];
        return drop <= cfg.tol_obj * std::max(1.0, std::abs(out.history.back()));
    };

    for (long it = 1; it <= cfg.max_iters; ++it) {
        const VectorXd resid = red.At * w - red.yt;
        const double fw = resid.squaredNorm();
        const VectorXd grad = 2.0 * red.At.transpose() * resid;
        VectorXd p;
        for (;;) {
            p = red.prox(w - grad / L, 1.0 / L);
            if (cfg.step == StepRule::Fixed) break;
            const VectorXd d = p - w;
            const double model = fw + grad.dot(d) + 0.5 * L * d.squaredNorm();
            if (red.smooth(p) <= model + 1e-12 * std::max(1.0, fw)) break;
            L *= 2.0;
        }
        const double fp = red.value(p);
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        if (fp <= fz) {
            const VectorXd prev = z;
            z = p;
            fz = fp;
            w = z + ((t - 1.0) / t_next) * (z - prev);
            t = t_next;
        } else if (cfg.restart) {
            w = z;
            t = 1.0;
        } else {
            w = z + (t / t_next) * (p - z);
            t = t_next;
        }

        if (cfg.polish && it % 25 == 0) {
            // Jump to the face minimizer only when it is certified optimal,
            // so failed attempts leave the momentum sequence alone.
            bool solved = false;
            const VectorXd candidate = red.refine(z, solved);
            const double fc = red.value(candidate);
            if (solved && fc <= fz && certify(candidate)) {
                z = candidate;
                fz = fc;
                w = z;
                t = 1.0;
            }
        }
        out.history.push_back(fz);
        out.iterations = it;

        if ((it % 10 == 0 || it == cfg.max_iters) && window_ok() && certify(z)) {
            out.converged = true;
            out.lipschitz = L;
            return out;
        }
    }
    certify(z);
    out.lipschitz = L;
    std::ostringstream os;
    os << "TV solver did not converge in " << cfg.max_iters << " iterations (worst KKT residual " << out.kkt.worst()
       << ", tolerance " << cfg.tol_kkt << ")";
    throw NonConvergenceError(os.str(), std::move(out));
}

SupportReport extract_support(const Dictionary& dict, const DesignMatrix& A, const Eigen::VectorXd& y,
                              const CompositeSolution& sol, const SolverConfig& cfg, double eta) {
    if (!(eta > 0.0 && eta < 1.0)) throw ValidationError("support threshold eta must lie in (0, 1)");
    SupportReport rep;
    rep.bound = static_cast<int>(A.A.rows()) + 1 - dict.trend_order();

    CompositeSolution kept = sol;
    auto threshold = [eta](Eigen::VectorXd& v) {
        if (v.size() == 0) return;
        const double cut = eta * v.cwiseAbs().maxCoeff();
        for (Index j = 0; j < v.size(); ++j)
            if (std::abs(v(j)) <= cut) v(j) = 0.0;
    };
    threshold(kept.a);
    threshold(kept.b);

    rep.refit = sol;
    const Reduced red(A, y, cfg);
    VectorXd z(red.n_a + red.n_b);
    z << kept.a, kept.b;
    bool solved = false;
    const VectorXd refit = red.refine(z, solved);
    rep.refit = red.lift(A, refit, y);
    rep.refit_ok = solved;
    rep.refit.objective = tv_objective(A, y, rep.refit, cfg);

    const auto& src = rep.refit;
    for (Index j = 0; j < src.a.size(); ++j)
        if (src.a(j) != 0.0) rep.trend.push_back({dict.trend_knots()[static_cast<std::size_t>(j)], src.a(j)});
    for (Index j = 0; j < src.b.size(); ++j)
        if (src.b(j) != 0.0) rep.seasonal.push_back({dict.seasonal_knots()[static_cast<std::size_t>(j)], src.b(j)});
    rep.K_T = static_cast<int>(rep.trend.size());
    rep.K_S = static_cast<int>(rep.seasonal.size());
    return rep;
}

nlohmann::json to_json(const KktReport& k) {
    return {{"trend_excess", k.trend_excess},
            {"seasonal_excess", k.seasonal_excess},
            {"trend_stationarity", k.trend_stationarity},
            {"seasonal_stationarity", k.seasonal_stationarity},
            {"mu", k.mu},
            {"unregularized_gradient", k.unregularized_gradient},
            {"tol", k.tol},
            {"verdict", k.verdict}};
}

namespace {

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_vec(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_array()) throw ValidationError(std::string("solution needs array \"") + key + "\"");
    const auto v = j[key].get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Index>(v.size()));
}

} // namespace

nlohmann::json solution_to_json(const Dictionary& dict, const CompositeSolution& sol) {
    nlohmann::json j{{"version", "v1"},
                     {"case", to_string(dict.case_flag())},
                     {"a", to_vec(sol.a)},
                     {"c", to_vec(sol.c)},
                     {"b", to_vec(sol.b)},
                     {"objective", sol.objective},
                     {"trend_knots", dict.trend_knots()},
                     {"seasonal_knots", dict.seasonal_knots()}};
    j["alpha"] = sol.has_alpha ? nlohmann::json(sol.alpha) : nlohmann::json(nullptr);
    return j;
}

CompositeSolution solution_from_json(const nlohmann::json& j) {
    if (!j.is_object() || j.value("version", "") != "v1") throw ValidationError("expected a v1 solution object");
    CompositeSolution s;
    s.a = from_vec(j, "a");
    s.c = from_vec(j, "c");
    s.b = from_vec(j, "b");
    s.has_alpha = j.contains("alpha") && !j["alpha"].is_null();
    s.alpha = s.has_alpha ? j["alpha"].get<double>() : 0.0;
    s.objective = j.value("objective", 0.0);
    return s;
}

} // namespace seasonal_spline
