#include "advsnell/payoff.hpp"

#include "advsnell/error.hpp"

#include <algorithm>
#include <cmath>

namespace advsnell {

PayoffProcess::PayoffProcess(Evaluator evaluator, double bound, std::optional<double> lipschitz,
                             std::string label, SummaryRule requires_summaries, bool scalar_only)
    : evaluator_(std::move(evaluator)),
      bound_(bound),
      lipschitz_(lipschitz),
      label_(std::move(label)),
      requires_(requires_summaries),
      scalar_only_(scalar_only) {
    if (!(bound_ >= 0.0) || !std::isfinite(bound_)) throw ConfigError("payoff bound must be finite and >= 0");
}

PayoffProcess PayoffProcess::tabulated(std::vector<double> values, std::string label) {
    double bound = 0.0;
    for (double v : values) {
        if (!std::isfinite(v)) throw ModelError("tabulated payoff contains a non-finite value");
        bound = std::max(bound, std::abs(v));
    }
    const std::size_t n = values.size();
    PayoffProcess out(
        [values = std::move(values)](const ScenarioLattice&, NodeId id) { return values[id]; }, bound,
        std::nullopt, std::move(label), {}, false);
    out.table_size_ = n;
    return out;
}

void PayoffProcess::check_compatible(const ScenarioLattice& lattice) const {
    if (requires_.running_max && !lattice.summaries().running_max) {
        throw ConfigError("payoff '" + label_ + "' needs a lattice with the running-max summary");
    }
    if (requires_.running_sum && !lattice.summaries().running_sum) {
        throw ConfigError("payoff '" + label_ + "' needs a lattice with the running-sum summary");
    }
    if (scalar_only_ && lattice.dimension() != 1) {
        throw ConfigError("payoff '" + label_ + "' is defined for d = 1 only");
    }
    if (table_size_ && *table_size_ != lattice.size()) {
        throw ConfigError("tabulated payoff does not match the lattice size");
    }
}

double PayoffProcess::evaluate(const ScenarioLattice& lattice, NodeId id) const {
    check_compatible(lattice);
    return evaluator_(lattice, id);
}

ValueField PayoffProcess::tabulate(const ScenarioLattice& lattice) const {
    check_compatible(lattice);
    ValueField out(lattice.size());
    for (NodeId id = 0; id < lattice.size(); ++id) {
        const double x = evaluator_(lattice, id);
        if (!std::isfinite(x) || std::abs(x) > bound_) {
            throw ModelError("payoff '" + label_ + "' violates its bound at node " + std::to_string(id));
        }
        out[id] = x;
    }
    return out;
}

PayoffProcess PayoffProcess::negated() const {
    PayoffProcess out = *this;
    out.evaluator_ = [inner = evaluator_](const ScenarioLattice& lattice, NodeId id) {
        return -inner(lattice, id);
    };
    out.label_ = "-(" + label_ + ")";
    return out;
}

PayoffProcess make_builtin(const PayoffSpec& spec) {
    for (double v : {spec.strike, spec.spot, spec.value}) {
        if (!std::isfinite(v)) throw ConfigError("payoff parameters must be finite");
    }
    const double scale = std::max({1.0, std::abs(spec.strike), std::abs(spec.spot), std::abs(spec.value)});
    const double cap = spec.cap.value_or(1e6 * scale);
    if (!(cap > 0.0) || !std::isfinite(cap)) throw ConfigError("payoff cap must be positive and finite");
    const double K = spec.strike;
    const double S0 = spec.spot;
    switch (spec.kind) {
    case PayoffKind::put:
        return PayoffProcess(
            [=](const ScenarioLattice& L, NodeId id) { return std::min(cap, std::max(K - (S0 + L.level(id)), 0.0)); },
            cap, 1.0, "put(K=" + std::to_string(K) + ")");
    case PayoffKind::call:
        return PayoffProcess(
            [=](const ScenarioLattice& L, NodeId id) { return std::min(cap, std::max(S0 + L.level(id) - K, 0.0)); },
            cap, 1.0, "call(K=" + std::to_string(K) + ")");
    case PayoffKind::lookback_max:
        return PayoffProcess(
            [=](const ScenarioLattice& L, NodeId id) {
                return std::min(cap, std::max(S0 + L.running_max(id) - K, 0.0));
            },
            cap, 1.0, "lookback_max(K=" + std::to_string(K) + ")", SummaryRule{true, false});
    case PayoffKind::running_avg_put:
        return PayoffProcess(
            [=](const ScenarioLattice& L, NodeId id) {
                const double avg = S0 + L.running_sum(id) / (L.layer(id) + 1);
                return std::min(cap, std::max(K - avg, 0.0));
            },
            cap, 1.0, "running_avg_put(K=" + std::to_string(K) + ")", SummaryRule{false, true});
    case PayoffKind::constant: {
        if (std::abs(spec.value) > cap) throw ConfigError("constant payoff exceeds its cap");
        const double c = spec.value;
        return PayoffProcess([c](const ScenarioLattice&, NodeId) { return c; }, std::abs(c), 0.0,
                             "constant(" + std::to_string(c) + ")", {}, false);
    }
    }
    throw ConfigError("unknown payoff kind");
}

PayoffKind parse_payoff_kind(const std::string& name) {
    if (name == "put") return PayoffKind::put;
    if (name == "call") return PayoffKind::call;
    if (name == "lookback_max") return PayoffKind::lookback_max;
    if (name == "running_avg_put") return PayoffKind::running_avg_put;
    if (name == "constant") return PayoffKind::constant;
    throw ConfigError("unknown payoff kind '" + name + "'");
}

const char* to_string(PayoffKind kind) {
    switch (kind) {
    case PayoffKind::put: return "put";
    case PayoffKind::call: return "call";
    case PayoffKind::lookback_max: return "lookback_max";
    case PayoffKind::running_avg_put: return "running_avg_put";
    case PayoffKind::constant: return "constant";
    }
    return "?";
}

} // namespace advsnell
