#include "advsnell/oracle.hpp"

#include "advsnell/error.hpp"

#include <algorithm>
#include <limits>

namespace advsnell {

RuleEnumerator::RuleEnumerator(const ScenarioLattice& lattice, const ExerciseMask& mask,
                               const EnumerationBudget& budget)
    : current_(StoppingRule::terminal(lattice)) {
    mask.validate(lattice.steps());
    for (NodeId id = 0; id < lattice.size(); ++id) {
        if (!lattice.is_leaf(id) && mask.allows(lattice.layer(id))) decidable_.push_back(id);
    }
    if (decidable_.size() > budget.max_rule_nodes || decidable_.size() >= 63) {
        throw BudgetError("rule enumeration: " + std::to_string(decidable_.size()) + " decidable nodes exceed the cap of " +
                          std::to_string(budget.max_rule_nodes));
    }
}

bool RuleEnumerator::next(StoppingRule& rule) {
    if (produced_ == count()) return false;
    if (produced_ == 0 || rule.size() != current_.size()) {
        rule = current_;
    }
    if (produced_ > 0) {
        // Binary increment: clear trailing stops, then set the first continue.
        for (NodeId id : decidable_) {
            const bool was = current_.stops(id);
            current_.set(id, !was);
            rule.set(id, !was);
            if (!was) break;
        }
    }
    ++produced_;
    return true;
}

PolicyEnumerator::PolicyEnumerator(const Model& model, const EnumerationBudget& budget)
    : PolicyEnumerator(model, std::vector<char>(model.lattice.size(), 1), budget) {}

PolicyEnumerator::PolicyEnumerator(const Model& model, const std::vector<char>& active,
                                   const EnumerationBudget& budget)
    : model_(&model), current_(model.lattice.size(), 0) {
    for (NodeId id = 0; id < model.lattice.size(); ++id) {
        if (!active[id] || model.lattice.is_leaf(id)) continue;
        const auto k = model.kernels.count(id);
        if (k > 1) {
            choice_nodes_.push_back(id);
            if (count_ > budget.max_policies / k) {
                throw BudgetError("policy enumeration exceeds the cap of " + std::to_string(budget.max_policies));
            }
            count_ *= k;
        }
    }
    if (choice_nodes_.size() > budget.max_policy_nodes) {
        throw BudgetError("policy enumeration: " + std::to_string(choice_nodes_.size()) +
                          " choice nodes exceed the cap of " + std::to_string(budget.max_policy_nodes));
    }
}

bool PolicyEnumerator::next(ControlPolicy& policy) {
    if (produced_ == count_) return false;
    if (produced_ == 0 || policy.size() != current_.size()) {
        policy = ControlPolicy(current_, "enumerated");
    }
    if (produced_ > 0) {
        for (NodeId id : choice_nodes_) {
            const bool carry = ++current_[id] == model_->kernels.count(id);
            if (carry) current_[id] = 0;
            policy[id] = current_[id];
            if (!carry) break;
        }
    }
    ++produced_;
    return true;
}

PathExpectation path_expectation(const Model& model, const StoppingRule& rule, const ControlPolicy& policy,
                                 const std::vector<double>& f, const EnumerationBudget& budget) {
    const auto& L = model.lattice;
    rule.validate_terminal(L);
    PathExpectation out;
    struct Frame {
        NodeId id;
        double prob;
    };
    std::vector<Frame> stack{{ScenarioLattice::root(), 1.0}};
    while (!stack.empty()) {
        const Frame fr = stack.back();
        stack.pop_back();
        if (rule.stops(fr.id)) {
            out.value += fr.prob * f[fr.id];
            out.stopped_mass += fr.prob;
            if (++out.paths > budget.max_paths) throw BudgetError("path enumeration exceeds the cap");
            continue;
        }
        const auto& k = model.kernels.at(fr.id)[policy[fr.id]];
        const auto kids = L.children(fr.id);
        // Push in reverse so paths are summed in child order.
        for (std::size_t c = kids.size(); c-- > 0;) {
            if (k.probs[c] > 0.0) stack.push_back({kids[c], fr.prob * k.probs[c]});
        }
    }
    return out;
}

BruteValues brute_values(const Model& model, const std::vector<double>& payoff, const ExerciseMask& mask,
                         const EnumerationBudget& budget) {
    RuleEnumerator rules(model.lattice, mask, budget);
    const std::uint64_t policy_count = PolicyEnumerator(model, budget).count();

    BruteValues out;
    out.rules = rules.count();
    out.policies = policy_count;
    out.upper = std::numeric_limits<double>::infinity();
    std::vector<double> column_min(policy_count, std::numeric_limits<double>::infinity());

    StoppingRule rule;
    ControlPolicy policy;
    while (rules.next(rule)) {
        double row_max = -std::numeric_limits<double>::infinity();
        PolicyEnumerator policies(model, budget);
        std::uint64_t p = 0;
        while (policies.next(policy)) {
            const double v = path_expectation(model, rule, policy, payoff, budget).value;
            row_max = std::max(row_max, v);
            column_min[p] = std::min(column_min[p], v);
            ++p;
        }
        if (row_max < out.upper) {
            out.upper = row_max;
            out.argmin_rule = rule;
        }
    }
    out.lower = -std::numeric_limits<double>::infinity();
    PolicyEnumerator policies(model, budget);
    std::uint64_t p = 0;
    while (policies.next(policy)) {
        if (column_min[p] > out.lower) {
            out.lower = column_min[p];
            out.argmax_policy = policy;
        }
        ++p;
    }
    return out;
}

double brute_stopped_sup(const Model& model, const StoppingRule& rule, const std::vector<double>& f,
                         const EnumerationBudget& budget) {
    double best = -std::numeric_limits<double>::infinity();
    PolicyEnumerator policies(model, budget);
    ControlPolicy policy;
    while (policies.next(policy)) best = std::max(best, path_expectation(model, rule, policy, f, budget).value);
    return best;
}

double brute_conditional(const Model& model, NodeId node, const std::vector<double>& f, int target_layer,
                         const EnumerationBudget& budget) {
    const auto& L = model.lattice;
    if (L.layer(node) > target_layer) throw ModelError("target layer precedes the node");
    // Nodes reachable from `node` strictly before the target layer.
    std::vector<char> active(L.size(), 0);
    std::vector<char> reached(L.size(), 0);
    reached[node] = 1;
    for (NodeId id = node; id < L.size(); ++id) {
        if (!reached[id] || L.layer(id) >= target_layer) continue;
        active[id] = 1;
        for (NodeId c : L.children(id)) reached[c] = 1;
    }
    double best = -std::numeric_limits<double>::infinity();
    PolicyEnumerator policies(model, active, budget);
    ControlPolicy policy;
    while (policies.next(policy)) {
        struct Frame {
            NodeId id;
            double prob;
        };
        double value = 0.0;
        std::uint64_t paths = 0;
        std::vector<Frame> stack{{node, 1.0}};
        while (!stack.empty()) {
            const Frame fr = stack.back();
            stack.pop_back();
            if (L.layer(fr.id) == target_layer) {
                value += fr.prob * f[fr.id];
                if (++paths > budget.max_paths) throw BudgetError("path enumeration exceeds the cap");
                continue;
            }
            const auto& k = model.kernels.at(fr.id)[policy[fr.id]];
            const auto kids = L.children(fr.id);
            for (std::size_t c = kids.size(); c-- > 0;) {
                if (k.probs[c] > 0.0) stack.push_back({kids[c], fr.prob * k.probs[c]});
            }
        }
        best = std::max(best, value);
    }
    return best;
}

} // namespace advsnell
