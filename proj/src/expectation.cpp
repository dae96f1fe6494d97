#include "advsnell/expectation.hpp"

#include "advsnell/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>
#include <vector>

namespace advsnell {

double kernel_dot(const ScenarioLattice& lattice, const Kernel& kernel, const ValueField& next, NodeId node) {
    const auto kids = lattice.children(node);
    double acc = 0.0;
    for (std::size_t c = 0; c < kids.size(); ++c) acc += kernel.probs[c] * next[kids[c]];
    return acc;
}

OneStep cond_sublinear(const Model& model, const ValueField& next, NodeId node) {
    if (model.lattice.is_leaf(node)) throw ModelError("no one-step expectation at terminal layer");
    const auto family = model.kernels.at(node);
    OneStep best{-std::numeric_limits<double>::infinity(), 0};
    for (std::size_t k = 0; k < family.size(); ++k) {
        const double v = kernel_dot(model.lattice, family[k], next, node);
        if (v > best.value) best = {v, static_cast<std::uint32_t>(k)};
    }
    return best;
}

double cond_linear(const Model& model, const ValueField& next, NodeId node, const ControlPolicy& policy) {
    if (model.lattice.is_leaf(node)) throw ModelError("no one-step expectation at terminal layer");
    const auto family = model.kernels.at(node);
    const auto index = policy[node];
    if (index >= family.size()) throw ModelError("kernel index out of range at node " + std::to_string(node));
    return kernel_dot(model.lattice, family[index], next, node);
}

namespace {

template <class Step>
StoppedExpectation stopped_pass(const Model& model, const ValueField& f, const StoppingRule& rule, Parallelism par,
                                Step step) {
    const auto& L = model.lattice;
    rule.validate_terminal(L);
    if (f.size() != L.size()) throw ModelError("value field does not cover the lattice");
    StoppedExpectation out{ValueField(L.size()), 0.0};
    for (int layer = L.steps(); layer >= 0; --layer) {
        const auto nodes = L.layer_nodes(layer);
        parallel_for(nodes.size(), par, [&](std::size_t i) {
            const NodeId id = nodes[i];
            out.field[id] = rule.stops(id) ? f[id] : step(out.field, id);
        });
    }
    out.root = out.field[ScenarioLattice::root()];
    return out;
}

} // namespace

StoppedExpectation expectation_of_stopped(const Model& model, const ValueField& f, const StoppingRule& rule,
                                          Parallelism par) {
    return stopped_pass(model, f, rule, par,
                        [&](const ValueField& next, NodeId id) { return cond_sublinear(model, next, id).value; });
}

StoppedExpectation linear_expectation_of_stopped(const Model& model, const ValueField& f, const StoppingRule& rule,
                                                 const ControlPolicy& policy, Parallelism par) {
    policy.validate(model);
    return stopped_pass(model, f, rule, par,
                        [&](const ValueField& next, NodeId id) { return cond_linear(model, next, id, policy); });
}

ValueField sweep_sublinear(const Model& model, const ValueField& f, int from, int to, Parallelism par) {
    const auto& L = model.lattice;
    if (to < 0 || from > L.steps() || to > from) throw ModelError("invalid layer range for E_s");
    ValueField out(L.size());
    for (NodeId id : L.layer_nodes(from)) out[id] = f[id];
    for (int layer = from - 1; layer >= to; --layer) {
        const auto nodes = L.layer_nodes(layer);
        parallel_for(nodes.size(), par, [&](std::size_t i) {
            out[nodes[i]] = cond_sublinear(model, out, nodes[i]).value;
        });
    }
    return out;
}

double tower_check(const Model& model, const ValueField& f, int s, int t, int j) {
    const auto& L = model.lattice;
    if (s > t) throw ModelError("tower check needs s <= t");
    if (t > j || j > L.steps() || s < 0) throw ModelError("tower check needs s <= t <= j within the horizon");

    // Left: E_s(f) by depth-first recursion with memo, independent of the layer order.
    std::unordered_map<NodeId, double> memo;
    auto direct = [&](auto&& self, NodeId id) -> double {
        if (L.layer(id) == j) return f[id];
        if (auto it = memo.find(id); it != memo.end()) return it->second;
        const auto kids = L.children(id);
        std::vector<double> child_values(kids.size());
        for (std::size_t c = 0; c < kids.size(); ++c) child_values[c] = self(self, kids[c]);
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& k : model.kernels.at(id)) {
            double acc = 0.0;
            for (std::size_t c = 0; c < kids.size(); ++c) acc += k.probs[c] * child_values[c];
            best = std::max(best, acc);
        }
        memo.emplace(id, best);
        return best;
    };

    // Right: E_s(E_t(f)) by two sweeps.
    const ValueField inner = sweep_sublinear(model, f, j, t);
    const ValueField composed = sweep_sublinear(model, inner, t, s);

    double defect = 0.0;
    for (NodeId id : L.layer_nodes(s)) defect = std::max(defect, std::abs(direct(direct, id) - composed[id]));
    return defect;
}

} // namespace advsnell
