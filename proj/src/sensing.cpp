#include "seasonal_spline/sensing.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

#include "seasonal_spline/errors.hpp"
#include "seasonal_spline/quadrature.hpp"

namespace seasonal_spline {

namespace {

constexpr double pi = std::numbers::pi;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// Integer nearest to x when x is within `tol` of it; throws otherwise.
long exact_integer(double x, const char* what) {
    const double r = std::round(x);
    if (!std::isfinite(x) || std::abs(x - r) > 1e-9 * std::max(1.0, std::abs(x)))
        throw ValidationError(std::string(what) + " must be an integer");
    return static_cast<long>(r);
}

long table_period(const WeightedDensity& d) { return exact_integer(1.0 / d.step, "1/step of a weighted density"); }

// Sum over j >= 0 of c / (1 + (r + j)^p): the part of a decaying weight beyond distance r.
double one_sided_tail(double c, double p, double r) {
    r = std::max(r, 0.0);
    const double head = c / (1.0 + std::pow(r, p));
    const double rest = r >= 1.0 ? c * std::pow(r, 1.0 - p) / (p - 1.0) : c * ((1.0 - r) + 1.0 / (p - 1.0));
    return head + rest;
}

// Integral of f against the hat-function weight, cell by cell, with extra splits.
double integrate_weight(const WeightedDensity& d, const RealFunction& f, std::span<const double> breaks) {
    const long k = static_cast<long>(d.values.size());
    double total = 0.0;
    for (long j = -1; j < k; ++j) {
        const double lo = d.origin + static_cast<double>(j) * d.step;
        const double hi = lo + d.step;
        const double v0 = j >= 0 ? d.values[static_cast<std::size_t>(j)] : 0.0;
        const double v1 = j + 1 < k ? d.values[static_cast<std::size_t>(j + 1)] : 0.0;
        if (v0 == 0.0 && v1 == 0.0) continue;
        auto g = [&](double t) { return (v0 + (v1 - v0) * (t - lo) / d.step) * f(t); };
        double a = lo;
        for (double b : breaks) {
            if (b > a && b < hi) {
                total += gauss_legendre(g, a, b, 1);
                a = b;
            }
        }
        total += gauss_legendre(g, a, hi, 1);
    }
    return total;
}

double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(x) / x; }

} // namespace

double Periodization::operator()(double t) const {
    switch (kind) {
    case Kind::Comb:
        throw ValidationError("a Dirac comb has no pointwise value");
    case Kind::Indicator:
        return std::floor(t - start) - std::floor(t - start - length);
    case Kind::Tabulated: {
        const auto n = table.size();
        const double x = fractional_part(t) * static_cast<double>(n);
        const auto j = std::min(static_cast<std::size_t>(x), n - 1);
        const double w = x - static_cast<double>(j);
        return table[j] * (1.0 - w) + table[(j + 1) % n] * w;
    }
    }
    return 0.0;
}

double Periodization::mass() const {
    switch (kind) {
    case Kind::Comb:
        return 1.0;
    case Kind::Indicator:
        return length;
    case Kind::Tabulated: {
        double s = 0.0;
        for (double v : table) s += v;
        return s / static_cast<double>(table.size());
    }
    }
    return 0.0;
}

bool Periodization::is_constant() const {
    if (kind == Kind::Indicator) return length == std::round(length);
    if (kind == Kind::Tabulated) {
        for (double v : table)
            if (v != table.front()) return false;
        return true;
    }
    return false;
}

SensingFunctional::SensingFunctional(Kind k) : kind_(std::move(k)) {
    std::visit(overloaded{
                   [&](const Sampling& s) {
                       periodized_.kind = Periodization::Kind::Comb;
                       periodized_.offset = fractional_part(s.x);
                   },
                   [&](const BoxAverage& b) {
                       periodized_.kind = Periodization::Kind::Indicator;
                       periodized_.start = fractional_part(b.start);
                       periodized_.length = b.length;
                   },
                   [&](const WeightedDensity& d) {
                       const long n = table_period(d);
                       const long i0 = exact_integer(d.origin / d.step, "origin/step of a weighted density");
                       periodized_.kind = Periodization::Kind::Tabulated;
                       periodized_.table.assign(static_cast<std::size_t>(n), 0.0);
                       for (std::size_t k = 0; k < d.values.size(); ++k) {
                           const long j = ((i0 + static_cast<long>(k)) % n + n) % n;
                           periodized_.table[static_cast<std::size_t>(j)] += d.values[k];
                       }
                       const double lo = d.origin - d.step;
                       const double hi = d.origin + static_cast<double>(d.values.size()) * d.step;
                       periodized_.tail_bound =
                           one_sided_tail(d.decay_c, d.decay_p, -lo) + one_sided_tail(d.decay_c, d.decay_p, hi);
                   },
               },
               kind_);
}

SensingFunctional SensingFunctional::sampling(double x) {
    if (!std::isfinite(x)) throw ValidationError("sampling location must be finite");
    return SensingFunctional(Sampling{x});
}

SensingFunctional SensingFunctional::box(double start, double length) {
    if (!std::isfinite(start) || !std::isfinite(length) || length <= 0.0)
        throw ValidationError("box average needs a finite start and a positive length");
    return SensingFunctional(BoxAverage{start, length});
}

SensingFunctional SensingFunctional::density(WeightedDensity d) {
    if (!(d.decay_p > 1.0)) {
        std::ostringstream os;
        os << "weighted density with decay exponent p=" << d.decay_p
           << " is not periodizable (p > 1 is required for an integrable tail)";
        throw NotPeriodizableError(os.str());
    }
    if (!(d.step > 0.0) || !std::isfinite(d.origin)) throw ValidationError("weighted density needs step > 0");
    if (d.values.empty()) throw ValidationError("weighted density needs at least one sample");
    if (!(d.decay_c >= 0.0)) throw ValidationError("weighted density decay constant must be >= 0");
    for (double v : d.values)
        if (!std::isfinite(v)) throw ValidationError("weighted density samples must be finite");
    return SensingFunctional(std::move(d));
}

std::string SensingFunctional::describe() const {
    std::ostringstream os;
    std::visit(overloaded{
                   [&](const Sampling& s) { os << "sampling at x=" << s.x; },
                   [&](const BoxAverage& b) { os << "box average over [" << b.start << ", " << b.start + b.length << ")"; },
                   [&](const WeightedDensity& d) {
                       os << "weighted density on [" << d.origin << ", "
                          << d.origin + static_cast<double>(d.values.size() - 1) * d.step << "]";
                   },
               },
               kind_);
    return os.str();
}

double SensingFunctional::weight(double t) const {
    const auto* d = std::get_if<WeightedDensity>(&kind_);
    if (!d) throw ValidationError("weight() applies to weighted densities");
    const double x = (t - d->origin) / d->step;
    const double j = std::floor(x);
    const double w = x - j;
    const long k = static_cast<long>(d->values.size());
    auto at = [&](double idx) {
        if (idx < 0.0 || idx >= static_cast<double>(k)) return 0.0;
        return d->values[static_cast<std::size_t>(idx)];
    };
    return at(j) * (1.0 - w) + at(j + 1.0) * w;
}

std::complex<double> SensingFunctional::fourier_coefficient(long n) const {
    const double w = 2.0 * pi * static_cast<double>(n);
    return std::visit(overloaded{
                          [&](const Sampling&) { return std::polar(1.0, -w * periodized_.offset); },
                          [&](const BoxAverage& b) {
                              if (n == 0) return std::complex<double>(b.length, 0.0);
                              const auto e0 = std::polar(1.0, -w * periodized_.start);
                              const auto e1 = std::polar(1.0, -w * (periodized_.start + b.length));
                              return (e0 - e1) / std::complex<double>(0.0, w);
                          },
                          [&](const WeightedDensity& d) {
                              // Fourier transform of a hat of half-width h is h sinc^2(w h / 2).
                              const auto& table = periodized_.table;
                              std::complex<double> s = 0.0;
                              const double h = 1.0 / static_cast<double>(table.size());
                              for (std::size_t j = 0; j < table.size(); ++j)
                                  s += table[j] * std::polar(1.0, -w * static_cast<double>(j) * h);
                              const double sc = sinc(0.5 * w * d.step);
                              return d.step * sc * sc * s;
                          },
                      },
                      kind_);
}

double SensingFunctional::total_variation() const {
    return std::visit(overloaded{
                          [](const Sampling&) { return 1.0; },
                          [](const BoxAverage& b) { return b.length; },
                          [](const WeightedDensity& d) {
                              double s = 0.0;
                              for (double v : d.values) s += std::abs(v);
                              return s * d.step;
                          },
                      },
                      kind_);
}

double SensingFunctional::pair(const RealFunction& f, std::span<const double> breaks) const {
    return std::visit(overloaded{
                          [&](const Sampling& s) { return f(s.x); },
                          [&](const BoxAverage& b) {
                              std::vector<double> cuts{b.start};
                              for (double x : breaks)
                                  if (x > b.start && x < b.start + b.length) cuts.push_back(x);
                              cuts.push_back(b.start + b.length);
                              std::sort(cuts.begin(), cuts.end());
                              double total = 0.0;
                              for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
                                  const double w = cuts[i + 1] - cuts[i];
                                  if (w <= 0.0) continue;
                                  const int panels = std::max(2, static_cast<int>(std::ceil(32.0 * w)));
                                  total += gauss_legendre(f, cuts[i], cuts[i + 1], panels);
                              }
                              return total;
                          },
                          [&](const WeightedDensity& d) { return integrate_weight(d, f, breaks); },
                      },
                      kind_);
}

std::vector<double> SensingFunctional::kinks() const {
    return std::visit(overloaded{
                          [](const Sampling& s) { return std::vector<double>{s.x}; },
                          [](const BoxAverage& b) { return std::vector<double>{b.start, b.start + b.length}; },
                          [](const WeightedDensity&) { return std::vector<double>{}; },
                      },
                      kind_);
}

Periodization periodize(const SensingFunctional& phi, double eps) {
    const auto& p = phi.periodized();
    if (p.tail_bound > eps) {
        std::ostringstream os;
        os << "periodization of " << phi.describe() << " has tail bound " << p.tail_bound << " above " << eps
           << "; extend the table";
        throw TruncationError(os.str());
    }
    return p;
}

double apply_to_trend_atom(const SensingFunctional& phi, const GreensFunction& psi, const TrendAtom& atom) {
    if (atom.kind == TrendAtom::Kind::Monomial && atom.power < 0) throw ValidationError("monomial power must be >= 0");
    const bool green = atom.kind == TrendAtom::Kind::Green;
    return std::visit(overloaded{
                          [&](const Sampling& s) {
                              return green ? psi(s.x - atom.knot) : std::pow(s.x, atom.power);
                          },
                          [&](const BoxAverage& b) {
                              const double a = b.start;
                              const double e = b.start + b.length;
                              if (green) return psi.integral(a - atom.knot, e - atom.knot);
                              const int q = atom.power + 1;
                              return (std::pow(e, q) - std::pow(a, q)) / q;
                          },
                          [&](const WeightedDensity& d) {
                              const std::array<double, 1> kink{atom.knot};
                              if (green)
                                  return integrate_weight(d, [&](double t) { return psi(t - atom.knot); }, kink);
                              return integrate_weight(d, [&](double t) { return std::pow(t, atom.power); }, {});
                          },
                      },
                      phi.kind());
}

double apply_to_seasonal_atom(const SensingFunctional& phi, const GreensFunction& rho, const SeasonalAtom& atom) {
    const auto& per = phi.periodized();
    if (atom.kind == SeasonalAtom::Kind::Constant) return per.mass();
    return std::visit(overloaded{
                          [&](const Sampling&) { return rho(per.offset - atom.knot); },
                          [&](const BoxAverage& b) {
                              return rho.integral(per.start - atom.knot, per.start + b.length - atom.knot);
                          },
                          [&](const WeightedDensity&) {
                              const auto n = per.table.size();
                              const double h = 1.0 / static_cast<double>(n);
                              const double v = fractional_part(atom.knot);
                              double total = 0.0;
                              for (std::size_t j = 0; j < n; ++j) {
                                  const double lo = static_cast<double>(j) * h;
                                  const double hi = lo + h;
                                  const double p0 = per.table[j];
                                  const double p1 = per.table[(j + 1) % n];
                                  auto g = [&](double t) { return (p0 + (p1 - p0) * (t - lo) / h) * rho(t - v); };
                                  if (v > lo && v < hi) {
                                      total += gauss_legendre(g, lo, v, 1) + gauss_legendre(g, v, hi, 1);
                                  } else {
                                      total += gauss_legendre(g, lo, hi, 1);
                                  }
                              }
                              return total;
                          },
                      },
                      phi.kind());
}

nlohmann::json to_json(const SensingFunctional& phi) {
    return std::visit(overloaded{
                          [](const Sampling& s) { return nlohmann::json{{"kind", "sampling"}, {"x", s.x}}; },
                          [](const BoxAverage& b) {
                              return nlohmann::json{{"kind", "box"}, {"start", b.start}, {"len", b.length}};
                          },
                          [](const WeightedDensity& d) {
                              return nlohmann::json{{"kind", "density"}, {"origin", d.origin}, {"step", d.step},
                                                    {"values", d.values}, {"decay_c", d.decay_c},
                                                    {"decay_p", d.decay_p}};
                          },
                      },
                      phi.kind());
}

SensingFunctional sensing_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
        throw ValidationError("sensing functional must be an object with a string \"kind\"");
    const std::string kind = j["kind"];
    auto number = [&](const char* key) {
        if (!j.contains(key) || !j[key].is_number())
            throw ValidationError(kind + " functional needs a numeric \"" + key + "\"");
        return j[key].get<double>();
    };
    auto reject_extra = [&](std::initializer_list<const char*> allowed) {
        for (const auto& [key, _] : j.items()) {
            bool ok = key == "kind";
            for (const char* a : allowed) ok = ok || key == a;
            if (!ok) throw ValidationError("unknown key \"" + key + "\" in " + kind + " functional");
        }
    };
    if (kind == "sampling") {
        reject_extra({"x"});
        return SensingFunctional::sampling(number("x"));
    }
    if (kind == "box") {
        reject_extra({"start", "len"});
        return SensingFunctional::box(number("start"), number("len"));
    }
    if (kind == "density") {
        reject_extra({"origin", "step", "values", "decay_c", "decay_p"});
        WeightedDensity d;
        d.origin = number("origin");
        d.step = number("step");
        d.decay_c = number("decay_c");
        d.decay_p = number("decay_p");
        if (!j.contains("values") || !j["values"].is_array())
            throw ValidationError("density functional needs a \"values\" array");
        for (const auto& v : j["values"]) {
            if (!v.is_number()) throw ValidationError("density values must be numbers");
            d.values.push_back(v.get<double>());
        }
        return SensingFunctional::density(std::move(d));
    }
    throw ValidationError("unknown sensing functional kind \"" + kind + "\"");
}

nlohmann::json plan_to_json(const std::vector<SensingFunctional>& plan) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& phi : plan) out.push_back(to_json(phi));
    return out;
}

std::vector<SensingFunctional> plan_from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw ValidationError("sensing plan must be a JSON array");
    std::vector<SensingFunctional> plan;
    plan.reserve(j.size());
    for (const auto& item : j) plan.push_back(sensing_from_json(item));
    return plan;
}

} // namespace seasonal_spline
