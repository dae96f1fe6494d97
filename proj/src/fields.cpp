#include "advsnell/fields.hpp"

#include "advsnell/error.hpp"

#include <algorithm>

namespace advsnell {

std::size_t StoppingRule::stop_count() const {
    return static_cast<std::size_t>(std::count(stop_.begin(), stop_.end(), 1));
}

StoppingRule StoppingRule::terminal(const ScenarioLattice& lattice) {
    StoppingRule rule(lattice.size());
    for (NodeId id : lattice.layer_nodes(lattice.steps())) rule.set(id, true);
    return rule;
}

StoppingRule StoppingRule::at_root(const ScenarioLattice& lattice) {
    StoppingRule rule = terminal(lattice);
    rule.set(ScenarioLattice::root(), true);
    return rule;
}

void StoppingRule::validate_terminal(const ScenarioLattice& lattice) const {
    if (stop_.size() != lattice.size()) throw ModelError("stopping rule does not cover the lattice");
    for (NodeId id : lattice.layer_nodes(lattice.steps())) {
        if (!stops(id)) throw ModelError("stopping rule must stop at every terminal node");
    }
}

void StoppingRule::validate(const ScenarioLattice& lattice, const ExerciseMask& mask) const {
    validate_terminal(lattice);
    for (NodeId id = 0; id < lattice.size(); ++id) {
        if (stops(id) && !mask.allows(lattice.layer(id))) {
            throw ModelError("stopping rule stops on a non-exercisable layer at node " + std::to_string(id));
        }
    }
}

std::vector<char> StoppingRule::before_stop(const ScenarioLattice& lattice) const {
    std::vector<char> reached(lattice.size(), 0);
    reached[ScenarioLattice::root()] = 1;
    std::vector<char> out(lattice.size(), 0);
    for (NodeId id = 0; id < lattice.size(); ++id) {
        if (!reached[id] || stops(id)) continue;
        out[id] = 1;
        for (NodeId c : lattice.children(id)) reached[c] = 1;
    }
    return out;
}

std::vector<char> StoppingRule::effective_stops(const ScenarioLattice& lattice) const {
    const auto open = before_stop(lattice);
    std::vector<char> out(lattice.size(), 0);
    if (stops(ScenarioLattice::root())) out[ScenarioLattice::root()] = 1;
    for (NodeId id = 0; id < lattice.size(); ++id) {
        if (!open[id]) continue;
        for (NodeId c : lattice.children(id)) {
            if (stops(c)) out[c] = 1;
        }
    }
    return out;
}

ControlPolicy ControlPolicy::constant(const Model& model, std::uint32_t index, std::string label) {
    std::vector<std::uint32_t> choice(model.lattice.size(), 0);
    for (NodeId id = 0; id < model.lattice.size(); ++id) {
        const auto count = model.kernels.count(id);
        if (count > 0) choice[id] = std::min<std::uint32_t>(index, static_cast<std::uint32_t>(count - 1));
    }
    return ControlPolicy(std::move(choice), std::move(label));
}

void ControlPolicy::validate(const Model& model) const {
    if (choice_.size() != model.lattice.size()) throw ModelError("policy does not cover the lattice");
    for (NodeId id = 0; id < model.lattice.size(); ++id) {
        if (model.lattice.is_leaf(id)) continue;
        if (choice_[id] >= model.kernels.count(id)) {
            throw ModelError("kernel index out of range at node " + std::to_string(id));
        }
    }
}

} // namespace advsnell
