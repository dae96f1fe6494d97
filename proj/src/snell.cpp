#include "advsnell/snell.hpp"

#include "advsnell/error.hpp"

#include <algorithm>
#include <cmath>

namespace advsnell {

ValueField snell_sweep(const Model& model, const ValueField& payoff, const ExerciseMask& mask, int from,
                       const ValueField& terminal, int to, Parallelism par, std::vector<std::uint32_t>* argmax) {
    const auto& L = model.lattice;
    if (to < 0 || from > L.steps() || to > from) throw ModelError("invalid layer range for the recursion");
    ValueField y(L.size());
    for (NodeId id : L.layer_nodes(from)) y[id] = terminal[id];
    for (int layer = from - 1; layer >= to; --layer) {
        const auto nodes = L.layer_nodes(layer);
        const bool exercisable = mask.allows(layer);
        parallel_for(nodes.size(), par, [&](std::size_t i) {
            const NodeId id = nodes[i];
            const OneStep step = cond_sublinear(model, y, id);
            if (argmax) (*argmax)[id] = step.argmax;
            y[id] = exercisable ? std::min(payoff[id], step.value) : step.value;
        });
    }
    return y;
}

SolveReport backward_solve(const Model& model, const ValueField& payoff, const ExerciseMask& mask, Parallelism par) {
    const auto& L = model.lattice;
    mask.validate(L.steps());
    if (payoff.size() != L.size()) throw ModelError("payoff field does not cover the lattice");
    SolveReport report;
    report.payoff = payoff;
    report.mask = mask;
    report.argmax.assign(L.size(), 0);
    report.value = snell_sweep(model, payoff, mask, L.steps(), payoff, 0, par, &report.argmax);
    report.tau_star = hitting_rule(L, report.value, payoff, 0.0, mask);
    report.y0 = report.value[ScenarioLattice::root()];
    return report;
}

SolveReport backward_solve(const Model& model, const PayoffProcess& payoff, const ExerciseMask& mask,
                           Parallelism par) {
    return backward_solve(model, payoff.tabulate(model.lattice), mask, par);
}

StoppingRule hitting_rule(const ScenarioLattice& lattice, const ValueField& value, const ValueField& payoff,
                          double eps, const ExerciseMask& mask) {
    if (!(eps >= 0.0)) throw ModelError("epsilon must be >= 0");
    StoppingRule rule(lattice.size());
    for (NodeId id = 0; id < lattice.size(); ++id) {
        if (lattice.is_leaf(id)) {
            rule.set(id, true);
        } else if (mask.allows(lattice.layer(id))) {
            rule.set(id, payoff[id] - value[id] <= eps);
        }
    }
    return rule;
}

std::vector<double> positive_gaps(const ScenarioLattice& lattice, const ValueField& value, const ValueField& payoff,
                                  const ExerciseMask& mask) {
    std::vector<double> gaps;
    for (NodeId id = 0; id < lattice.size(); ++id) {
        if (lattice.is_leaf(id) || !mask.allows(lattice.layer(id))) continue;
        const double gap = payoff[id] - value[id];
        if (gap > 0.0) gaps.push_back(gap);
    }
    std::sort(gaps.begin(), gaps.end());
    gaps.erase(std::unique(gaps.begin(), gaps.end()), gaps.end());
    return gaps;
}

MartingaleCheck martingale_check(const Model& model, const SolveReport& report) {
    const auto& L = model.lattice;
    MartingaleCheck out;
    const auto open = report.tau_star.before_stop(L);
    for (NodeId id = 0; id < L.size(); ++id) {
        if (!open[id]) continue;
        // Before tau* the stopped envelope at the next layer is Y itself.
        const double next = cond_sublinear(model, report.value, id).value;
        out.max_defect = std::max(out.max_defect, std::abs(report.value[id] - next));
        ++out.nodes_checked;
    }
    const auto stopped = expectation_of_stopped(model, report.payoff, report.tau_star);
    out.root_defect = std::abs(report.y0 - stopped.root);
    return out;
}

double supermartingale_check(const Model& model, const SolveReport& report, const ControlPolicy& policy) {
    policy.validate(model);
    const auto& L = model.lattice;
    const auto open = report.tau_star.before_stop(L);
    double slack = std::numeric_limits<double>::infinity();
    for (NodeId id = 0; id < L.size(); ++id) {
        if (!open[id]) continue;
        slack = std::min(slack, report.value[id] - cond_linear(model, report.value, id, policy));
    }
    return std::isinf(slack) ? 0.0 : slack;
}

double dpp_check(const Model& model, const SolveReport& report, int s, int t) {
    const auto& L = model.lattice;
    if (!(s < t)) throw ModelError("dpp check needs s < t");
    if (s < 0 || t > L.steps()) throw ModelError("dpp layers outside the horizon");
    const ValueField partial = snell_sweep(model, report.payoff, report.mask, t, report.value, s);
    double defect = 0.0;
    for (NodeId id : L.layer_nodes(s)) defect = std::max(defect, std::abs(partial[id] - report.value[id]));
    return defect;
}

void attach_diagnostics(const Model& model, SolveReport& report, int max_dpp_steps) {
    SolveDiagnostics d;
    const auto mart = martingale_check(model, report);
    d.martingale_defect = mart.max_defect;
    d.root_defect = mart.root_defect;
    const int n = model.lattice.steps();
    if (n <= max_dpp_steps) {
        for (int s = 0; s < n; ++s) {
            for (int t = s + 1; t <= n; ++t) d.dpp_defect = std::max(d.dpp_defect, dpp_check(model, report, s, t));
        }
    } else {
        // Each check allocates a full field; sample the pairs on large lattices.
        const int mid = n / 2;
        for (auto [s, t] : {std::pair{0, n}, std::pair{0, mid}, std::pair{mid, n}, std::pair{n - 1, n}}) {
            d.dpp_defect = std::max(d.dpp_defect, dpp_check(model, report, s, t));
        }
    }
    report.diagnostics = d;
}

} // namespace advsnell
