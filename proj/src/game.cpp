#include "advsnell/game.hpp"

#include "advsnell/error.hpp"
#include "advsnell/expectation.hpp"

#include <algorithm>
#include <cmath>

namespace advsnell {

ValueField lower_value(const Model& model, const ValueField& payoff, const ExerciseMask& mask, Parallelism par) {
    mask.validate(model.lattice.steps());
    return snell_sweep(model, payoff, mask, model.lattice.steps(), payoff, 0, par);
}

ClassicalEnvelope classical_lower_envelope(const Model& model, const ControlPolicy& policy, const ValueField& payoff,
                                           const ExerciseMask& mask, Parallelism par) {
    const auto& L = model.lattice;
    mask.validate(L.steps());
    policy.validate(model);
    ClassicalEnvelope out{ValueField(L.size()), StoppingRule(L.size()), 0.0};
    for (NodeId id : L.layer_nodes(L.steps())) out.value[id] = payoff[id];
    for (int layer = L.steps() - 1; layer >= 0; --layer) {
        const auto nodes = L.layer_nodes(layer);
        const bool exercisable = mask.allows(layer);
        parallel_for(nodes.size(), par, [&](std::size_t i) {
            const NodeId id = nodes[i];
            const double cont = cond_linear(model, out.value, id, policy);
            out.value[id] = exercisable ? std::min(payoff[id], cont) : cont;
        });
    }
    for (NodeId id = 0; id < L.size(); ++id) {
        out.rule.set(id, L.is_leaf(id) || (mask.allows(L.layer(id)) && out.value[id] == payoff[id]));
    }
    out.root = out.value[ScenarioLattice::root()];
    return out;
}

ControlPolicy saddle_policy(const SolveReport& report) {
    return ControlPolicy(report.argmax, "P*");
}

ControlPolicy sharp_policy(const Model& model, const SolveReport& report) {
    const auto open = report.tau_star.before_stop(model.lattice);
    std::vector<std::uint32_t> choice(model.lattice.size(), 0);
    for (NodeId id = 0; id < model.lattice.size(); ++id) {
        if (open[id]) choice[id] = report.argmax[id];
    }
    return ControlPolicy(std::move(choice), "P#");
}

SaddleCheck verify_saddle(const Model& model, const ControlPolicy& p_star, const StoppingRule& tau_star,
                          const ValueField& payoff, const ExerciseMask& mask, Parallelism par) {
    tau_star.validate(model.lattice, mask);
    SaddleCheck out;
    out.saddle_value = linear_expectation_of_stopped(model, payoff, tau_star, p_star, par).root;
    out.lower = classical_lower_envelope(model, p_star, payoff, mask, par).root;
    out.upper = expectation_of_stopped(model, payoff, tau_star, par).root;
    out.left_defect = std::abs(out.lower - out.saddle_value);
    out.right_defect = std::abs(out.upper - out.saddle_value);
    return out;
}

} // namespace advsnell
