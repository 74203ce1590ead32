#include "seasonal_spline/operators.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "seasonal_spline/errors.hpp"

namespace seasonal_spline {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double two_pi = 2.0 * std::numbers::pi;

// Criterion for point evaluation on a single (non-composite) operator.
bool single_sampling_ok(const OperatorSpec& spec) {
    return std::visit(overloaded{
                          [](const OperatorSpec::Derivative& d) { return d.order >= 2; },
                          [](const OperatorSpec::Sobolev& s) { return s.gamma > 1.0; },
                          [](const OperatorSpec::Composition&) { return false; },
                      },
                      spec.kind);
}

bool roughening(const OperatorSpec& spec) {
    if (const auto* s = std::get_if<OperatorSpec::Sobolev>(&spec.kind)) return s->gamma < 0.0;
    if (const auto* c = std::get_if<OperatorSpec::Composition>(&spec.kind)) {
        for (const auto& f : c->factors)
            if (roughening(f)) return true;
    }
    return false;
}

void flatten(const OperatorSpec& spec, std::vector<OperatorSpec>& out) {
    if (const auto* c = std::get_if<OperatorSpec::Composition>(&spec.kind)) {
        for (const auto& f : c->factors) flatten(f, out);
    } else {
        out.push_back(spec);
    }
}

bool pointwise_ok(const OperatorSpec& spec) {
    std::vector<OperatorSpec> factors;
    flatten(spec, factors);
    if (factors.empty()) return false;
    if (roughening(spec)) return false;
    for (const auto& f : factors)
        if (single_sampling_ok(f)) return true;
    return false;
}

} // namespace

std::string to_string(Role role) { return role == Role::Trend ? "trend" : "seasonal"; }

OperatorSpec OperatorSpec::derivative(int order, Role role) {
    OperatorSpec s{Derivative{order}, role};
    s.validate();
    return s;
}

OperatorSpec OperatorSpec::sobolev(double gamma, Role role) {
    OperatorSpec s{Sobolev{gamma}, role};
    s.validate();
    return s;
}

OperatorSpec OperatorSpec::composition(std::vector<OperatorSpec> factors, Role role) {
    for (auto& f : factors) f = f.with_role(role);
    OperatorSpec s{Composition{std::move(factors)}, role};
    s.validate();
    return s;
}

OperatorSpec OperatorSpec::with_role(Role r) const {
    OperatorSpec out = *this;
    out.role = r;
    if (auto* c = std::get_if<Composition>(&out.kind)) {
        for (auto& f : c->factors) f = f.with_role(r);
    }
    return out;
}

void OperatorSpec::validate() const {
    std::visit(overloaded{
                   [](const Derivative& d) {
                       if (d.order < 1)
                           throw ValidationError("derivative order must be >= 1 (got " +
                                                 std::to_string(d.order) +
                                                 "); write the identity as an empty composition");
                   },
                   [](const Sobolev& s) {
                       if (!std::isfinite(s.gamma)) throw ValidationError("sobolev exponent must be finite");
                   },
                   [](const Composition& c) {
                       for (const auto& f : c.factors) f.validate();
                   },
               },
               kind);
}

std::string OperatorSpec::describe() const {
    return std::visit(overloaded{
                          [](const Derivative& d) { return "D^" + std::to_string(d.order); },
                          [](const Sobolev& s) {
                              std::ostringstream os;
                              os << "(Id-Delta)^(" << s.gamma << "/2)";
                              return os.str();
                          },
                          [](const Composition& c) {
                              if (c.factors.empty()) return std::string("Id");
                              std::string out;
                              for (std::size_t i = 0; i < c.factors.size(); ++i) {
                                  if (i) out += " * ";
                                  out += c.factors[i].describe();
                              }
                              return out;
                          },
                      },
                      kind);
}

bool OperatorSpec::operator==(const OperatorSpec& other) const {
    if (role != other.role || kind.index() != other.kind.index()) return false;
    return std::visit(overloaded{
                          [&](const Derivative& d) { return d.order == std::get<Derivative>(other.kind).order; },
                          [&](const Sobolev& s) { return s.gamma == std::get<Sobolev>(other.kind).gamma; },
                          [&](const Composition& c) {
                              const auto& o = std::get<Composition>(other.kind);
                              if (c.factors.size() != o.factors.size()) return false;
                              for (std::size_t i = 0; i < c.factors.size(); ++i)
                                  if (!(c.factors[i] == o.factors[i])) return false;
                              return true;
                          },
                      },
                      kind);
}

int admissibility_order(const OperatorSpec& spec) {
    spec.validate();
    return std::visit(overloaded{
                          [](const OperatorSpec::Derivative& d) { return d.order; },
                          [](const OperatorSpec::Sobolev&) { return 0; },
                          [](const OperatorSpec::Composition& c) {
                              int n = 0;
                              for (const auto& f : c.factors) n += admissibility_order(f);
                              return n;
                          },
                      },
                      spec.kind);
}

std::complex<double> frequency_response(const OperatorSpec& spec, double omega) {
    if (spec.role != Role::Trend) throw ValidationError("frequency_response needs a trend operator");
    spec.validate();
    return std::visit(overloaded{
                          [&](const OperatorSpec::Derivative& d) {
                              return std::pow(std::complex<double>(0.0, omega), d.order);
                          },
                          [&](const OperatorSpec::Sobolev& s) {
                              return std::complex<double>(std::pow(1.0 + omega * omega, 0.5 * s.gamma), 0.0);
                          },
                          [&](const OperatorSpec::Composition& c) {
                              std::complex<double> r{1.0, 0.0};
                              for (const auto& f : c.factors) r *= frequency_response(f, omega);
                              return r;
                          },
                      },
                      spec.kind);
}

std::complex<double> frequency_sequence(const OperatorSpec& spec, long n) {
    if (spec.role != Role::Seasonal) throw ValidationError("frequency_sequence needs a seasonal operator");
    spec.validate();
    const double w = two_pi * static_cast<double>(n);
    return std::visit(overloaded{
                          [&](const OperatorSpec::Derivative& d) {
                              return std::pow(std::complex<double>(0.0, w), d.order);
                          },
                          [&](const OperatorSpec::Sobolev& s) {
                              return std::complex<double>(std::pow(1.0 + w * w, 0.5 * s.gamma), 0.0);
                          },
                          [&](const OperatorSpec::Composition& c) {
                              std::complex<double> r{1.0, 0.0};
                              for (const auto& f : c.factors) r *= frequency_sequence(f, n);
                              return r;
                          },
                      },
                      spec.kind);
}

double smoothing_exponent(const OperatorSpec& spec) {
    return std::visit(overloaded{
                          [](const OperatorSpec::Derivative& d) { return static_cast<double>(d.order); },
                          [](const OperatorSpec::Sobolev& s) { return s.gamma; },
                          [](const OperatorSpec::Composition& c) {
                              double s = 0.0;
                              for (const auto& f : c.factors) s += smoothing_exponent(f);
                              return s;
                          },
                      },
                      spec.kind);
}

std::string sampling_violation(const OperatorSpec& trend, const OperatorSpec& seasonal) {
    if (trend.role != Role::Trend || seasonal.role != Role::Seasonal)
        throw ValidationError("sampling_admissible expects a (trend, seasonal) operator pair");
    trend.validate();
    seasonal.validate();
    auto rule = [](const OperatorSpec& s) {
        std::vector<OperatorSpec> factors;
        flatten(s, factors);
        if (factors.size() == 1) {
            if (const auto* d = std::get_if<OperatorSpec::Derivative>(&factors[0].kind))
                return "sampling with N_" + std::string(s.role == Role::Trend ? "T" : "S") + "=" +
                       std::to_string(d->order) + " (derivative operators need order >= 2)";
            if (const auto* g = std::get_if<OperatorSpec::Sobolev>(&factors[0].kind)) {
                std::ostringstream os;
                os << "sampling with gamma_" << (s.role == Role::Trend ? "T" : "S") << "=" << g->gamma
                   << " (sobolev operators need gamma > 1)";
                return os.str();
            }
        }
        return "sampling with " + to_string(s.role) + " operator " + s.describe() +
               " (no factor is sampling-admissible on its own, or a factor roughens)";
    };
    if (!pointwise_ok(trend)) return rule(trend);
    if (!pointwise_ok(seasonal)) return rule(seasonal);
    return {};
}

bool sampling_admissible(const OperatorSpec& trend, const OperatorSpec& seasonal) {
    return sampling_violation(trend, seasonal).empty();
}

nlohmann::json to_json(const OperatorSpec& spec) {
    return std::visit(overloaded{
                          [](const OperatorSpec::Derivative& d) {
                              return nlohmann::json{{"kind", "derivative"}, {"order", d.order}};
                          },
                          [](const OperatorSpec::Sobolev& s) {
                              return nlohmann::json{{"kind", "sobolev"}, {"gamma", s.gamma}};
                          },
                          [](const OperatorSpec::Composition& c) {
                              nlohmann::json factors = nlohmann::json::array();
                              for (const auto& f : c.factors) factors.push_back(to_json(f));
                              return nlohmann::json{{"kind", "composition"}, {"factors", factors}};
                          },
                      },
                      spec.kind);
}

OperatorSpec operator_from_json(const nlohmann::json& j, Role role) {
    if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
        throw ValidationError("operator spec must be an object with a string \"kind\"");
    const std::string kind = j["kind"];
    auto reject_extra = [&](std::initializer_list<const char*> allowed) {
        for (const auto& [key, _] : j.items()) {
            bool ok = key == "kind";
            for (const char* a : allowed) ok = ok || key == a;
            if (!ok) throw ValidationError("unknown key \"" + key + "\" in " + kind + " operator");
        }
    };
    if (kind == "derivative") {
        reject_extra({"order"});
        if (!j.contains("order") || !j["order"].is_number_integer())
            throw ValidationError("derivative operator needs an integer \"order\"");
        return OperatorSpec::derivative(j["order"].get<int>(), role);
    }
    if (kind == "sobolev") {
        reject_extra({"gamma"});
        if (!j.contains("gamma") || !j["gamma"].is_number())
            throw ValidationError("sobolev operator needs a numeric \"gamma\"");
        return OperatorSpec::sobolev(j["gamma"].get<double>(), role);
    }
    if (kind == "composition") {
        reject_extra({"factors"});
        if (!j.contains("factors") || !j["factors"].is_array())
            throw ValidationError("composition operator needs a \"factors\" array");
        std::vector<OperatorSpec> factors;
        for (const auto& f : j["factors"]) factors.push_back(operator_from_json(f, role));
        return OperatorSpec::composition(std::move(factors), role);
    }
    throw ValidationError("unknown operator kind \"" + kind + "\"");
}

} // namespace seasonal_spline
