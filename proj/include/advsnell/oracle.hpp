#pragma once

// Brute-force ground truth for the game values. Everything here evaluates
// E^P[X_tau] by walking root-to-stop paths forward and multiplying kernel
// weights, so it shares no arithmetic path with the backward recursions.

#include "advsnell/fields.hpp"
#include "advsnell/scenario.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace advsnell {

struct EnumerationBudget {
    /// Exercisable non-leaf nodes (each one doubles the rule count).
    std::size_t max_rule_nodes = 20;
    /// Nodes with more than one kernel.
    std::size_t max_policy_nodes = 20;
    /// Product of kernel counts.
    std::uint64_t max_policies = std::uint64_t{1} << 20;
    std::uint64_t max_paths = 1'000'000;
};

/// Streams every stop/continue assignment of the decidable nodes (exercisable,
/// non-leaf). The first rule continues everywhere before the horizon; the
/// order is a binary counter over decidable nodes in id order.
class RuleEnumerator {
public:
    RuleEnumerator(const ScenarioLattice& lattice, const ExerciseMask& mask, const EnumerationBudget& budget = {});

    std::uint64_t count() const { return std::uint64_t{1} << decidable_.size(); }
    const std::vector<NodeId>& decidable() const { return decidable_; }

    /// Writes the next rule; returns false once all rules were produced.
    bool next(StoppingRule& rule);

private:
    std::vector<NodeId> decidable_;
    StoppingRule current_;
    std::uint64_t produced_ = 0;
};

/// Streams every node-wise kernel choice as a mixed-radix counter over nodes
/// with more than one kernel, in id order.
class PolicyEnumerator {
public:
    PolicyEnumerator(const Model& model, const EnumerationBudget& budget = {});
    /// Restricts enumeration to nodes flagged in `active`; others use kernel 0.
    PolicyEnumerator(const Model& model, const std::vector<char>& active, const EnumerationBudget& budget = {});

    std::uint64_t count() const { return count_; }
    bool next(ControlPolicy& policy);

private:
    const Model* model_;
    std::vector<NodeId> choice_nodes_;
    std::vector<std::uint32_t> current_;
    std::uint64_t count_ = 1;
    std::uint64_t produced_ = 0;
};

struct PathExpectation {
    double value = 0.0;
    /// Total probability of the stop events; 1 up to rounding.
    double stopped_mass = 0.0;
    std::uint64_t paths = 0;
};

/// Sum over root-to-stop paths of (product of chosen kernel weights) * f(stop node).
PathExpectation path_expectation(const Model& model, const StoppingRule& rule, const ControlPolicy& policy,
                                 const std::vector<double>& f, const EnumerationBudget& budget = {});

struct BruteValues {
    /// min over rules of max over policies.
    double upper = 0.0;
    /// max over policies of min over rules.
    double lower = 0.0;
    StoppingRule argmin_rule;
    ControlPolicy argmax_policy;
    std::uint64_t rules = 0;
    std::uint64_t policies = 0;
};

BruteValues brute_values(const Model& model, const std::vector<double>& payoff, const ExerciseMask& mask,
                         const EnumerationBudget& budget = {});

/// max over policies of E^P[f_tau] for one rule, by enumeration.
double brute_stopped_sup(const Model& model, const StoppingRule& rule, const std::vector<double>& f,
                         const EnumerationBudget& budget = {});

/// E_s(f)(node) for f on layer `target_layer`, as the max over all policies
/// on the nodes reachable from `node` of the path-enumerated expectation.
double brute_conditional(const Model& model, NodeId node, const std::vector<double>& f, int target_layer,
                         const EnumerationBudget& budget = {});

} // namespace advsnell
