#pragma once

// Shared fixtures and independent reference computations for the unit tests.

#include "advsnell/fields.hpp"
#include "advsnell/scenario.hpp"
#include "advsnell/suite.hpp"

#include <algorithm>
#include <string>
#include <vector>

namespace advsnell::fixtures {

/// Root with children up (+1) and down (-1); kernels (p, 1 - p) for each p in
/// `ups`; X_0 = x0, X(up) = 1, X(down) = 0.
inline TreeModel one_step(double x0, std::vector<double> ups = {0.3, 0.7}) {
    TreeSpec spec;
    TreeSpec::Node root{"root", {{"up", {1.0}}, {"down", {-1.0}}}, {}, x0};
    for (double p : ups) root.kernels.push_back({p, 1.0 - p});
    spec.nodes = {root, {"up", {}, {}, 1.0}, {"down", {}, {}, 0.0}};
    return build_tree(spec);
}

/// Complete binary tree of the given depth with labels "r", "r0", "r1", "r00", ...
/// Every non-leaf node carries `kernels`; payoffs come from `payoff(label)`.
template <class PayoffFn>
TreeModel binary_tree(int depth, const std::vector<std::vector<double>>& kernels, PayoffFn payoff,
                      double up = 1.0, double down = -1.0) {
    TreeSpec spec;
    spec.horizon = depth;
    std::vector<std::string> level{"r"};
    for (int d = 0; d <= depth; ++d) {
        std::vector<std::string> next;
        for (const auto& label : level) {
            TreeSpec::Node node{label, {}, {}, payoff(label)};
            if (d < depth) {
                node.children = {{label + "0", {up}}, {label + "1", {down}}};
                node.kernels = kernels;
                next.push_back(label + "0");
                next.push_back(label + "1");
            }
            spec.nodes.push_back(node);
        }
        level = next;
    }
    return build_tree(spec);
}

inline std::vector<TreeModel> suite_models(std::uint64_t seed, std::size_t count, bool martingale = false) {
    SuiteOptions opts;
    opts.martingale = martingale;
    std::vector<TreeModel> out;
    for (const auto& spec : seed_suite(seed, count, opts)) out.push_back(build_tree(spec));
    return out;
}

/// Textbook optimal stopping under one measure: V = min(X, sum_c p_c V_c) at
/// exercisable layers, written against the raw tree without the solver code.
inline std::vector<double> classical_snell(const Model& model, const std::vector<double>& x, const ExerciseMask& mask,
                                           std::size_t kernel = 0) {
    const auto& L = model.lattice;
    std::vector<double> v(L.size());
    for (std::size_t i = L.size(); i-- > 0;) {
        const auto id = static_cast<NodeId>(i);
        if (L.is_leaf(id)) {
            v[i] = x[i];
            continue;
        }
        const auto& p = model.kernels.at(id)[kernel].probs;
        const auto kids = L.children(id);
        double cont = 0.0;
        for (std::size_t c = 0; c < kids.size(); ++c) cont += p[c] * v[kids[c]];
        v[i] = mask.allows(L.layer(id)) ? (x[i] < cont ? x[i] : cont) : cont;
    }
    return v;
}

inline std::vector<double> random_values(SuiteRng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = lo + (hi - lo) * rng.uniform();
    return v;
}

inline std::size_t decidable_nodes(const ScenarioLattice& L, const ExerciseMask& mask) {
    std::size_t n = 0;
    for (NodeId id = 0; id < L.size(); ++id) n += !L.is_leaf(id) && mask.allows(L.layer(id));
    return n;
}

} // namespace advsnell::fixtures
