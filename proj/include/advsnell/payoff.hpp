#pragma once

// Bounded reward processes X evaluated as node functionals.

#include "advsnell/fields.hpp"
#include "advsnell/scenario.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace advsnell {

enum class PayoffKind { put, call, lookback_max, running_avg_put, constant };

struct PayoffSpec {
    PayoffKind kind = PayoffKind::constant;
    double strike = 0.0;
    /// Price level is spot + B_t (first coordinate).
    double spot = 0.0;
    /// Value of `constant`.
    double value = 0.0;
    /// Bound M; defaults to 1e6 * max(1, |strike|, |spot|, |value|).
    std::optional<double> cap;
};

class PayoffProcess {
public:
    using Evaluator = std::function<double(const ScenarioLattice&, NodeId)>;

    PayoffProcess(Evaluator evaluator, double bound, std::optional<double> lipschitz, std::string label,
                  SummaryRule requires_summaries = {}, bool scalar_only = true);

    /// Tabulated values by NodeId, e.g. payoffs listed in an explicit tree.
    static PayoffProcess tabulated(std::vector<double> values, std::string label = "tabulated");

    /// Deterministic value in [-M, M]. Throws ConfigError when the lattice
    /// lacks a required summary or has the wrong dimension.
    double evaluate(const ScenarioLattice& lattice, NodeId id) const;

    /// Evaluates every node and asserts |X| <= M exhaustively (ModelError otherwise).
    ValueField tabulate(const ScenarioLattice& lattice) const;

    void check_compatible(const ScenarioLattice& lattice) const;

    /// -X, with the same bound and modulus.
    PayoffProcess negated() const;

    double bound() const { return bound_; }
    const std::optional<double>& lipschitz() const { return lipschitz_; }
    const std::string& label() const { return label_; }

private:
    Evaluator evaluator_;
    double bound_;
    std::optional<double> lipschitz_;
    std::string label_;
    SummaryRule requires_;
    bool scalar_only_;
    std::optional<std::size_t> table_size_;
};

/// put: min(M, (K - S)^+), call: min(M, (S - K)^+) with S = spot + B_t;
/// lookback_max: min(M, (spot + max_{s<=t} B_s - K)^+);
/// running_avg_put: min(M, (K - A_t)^+), A_t = spot + (sum_{j<=i} B_{t_j}) / (i + 1);
/// constant: the given value.
PayoffProcess make_builtin(const PayoffSpec& spec);

PayoffKind parse_payoff_kind(const std::string& name);
const char* to_string(PayoffKind kind);

} // namespace advsnell
