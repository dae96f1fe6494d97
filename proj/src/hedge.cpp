#include "advsnell/hedge.hpp"

#include "advsnell/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace advsnell {

namespace {

constexpr double kSlackTolerance = 1e-12;

double worst_case(std::span<const double> increments, std::span<const double> targets, double holding) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < targets.size(); ++c) m = std::max(m, targets[c] - holding * increments[c]);
    return m;
}

} // namespace

OneStepHedge one_step_superhedge(std::span<const double> increments, std::span<const double> targets) {
    if (increments.size() != targets.size() || targets.empty()) {
        throw ModelError("one-step hedge needs one target per increment");
    }
    if (targets.size() == 1) return {targets[0], 0.0};
    const bool any_up = std::any_of(increments.begin(), increments.end(), [](double x) { return x >= 0.0; });
    const bool any_down = std::any_of(increments.begin(), increments.end(), [](double x) { return x <= 0.0; });
    if (!any_up || !any_down) throw ModelError("increments admit arbitrage: superhedging price is unbounded");

    OneStepHedge best{worst_case(increments, targets, 0.0), 0.0};
    for (std::size_t i = 0; i < targets.size(); ++i) {
        for (std::size_t j = i + 1; j < targets.size(); ++j) {
            if (increments[i] == increments[j]) continue;
            const double h = (targets[i] - targets[j]) / (increments[i] - increments[j]);
            const double m = worst_case(increments, targets, h);
            if (m < best.capital) best = {m, h};
        }
    }
    return best;
}

bool martingale_kernels(const Model& model) {
    const auto& L = model.lattice;
    for (NodeId id = 0; id < L.size(); ++id) {
        if (L.is_leaf(id)) continue;
        for (int j = 0; j < L.dimension(); ++j) {
            double scale = 0.0;
            for (std::size_t c = 0; c < L.child_count(id); ++c) scale = std::max(scale, std::abs(L.increment(id, c)[j]));
            for (const auto& k : model.kernels.at(id)) {
                double mean = 0.0;
                for (std::size_t c = 0; c < L.child_count(id); ++c) mean += k.probs[c] * L.increment(id, c)[j];
                if (std::abs(mean) > 1e-12 * std::max(1.0, scale)) return false;
            }
        }
    }
    return true;
}

HedgeStrategy superhedge_solve(const Model& model, const ValueField& payoff, const StoppingRule& tau_star, double y0,
                               Parallelism par) {
    const auto& L = model.lattice;
    if (L.dimension() != 1) throw ModelError("superhedging is implemented for d = 1 only");
    tau_star.validate_terminal(L);
    HedgeStrategy out;
    out.capital = ValueField(L.size());
    out.holding = ValueField(L.size());
    out.active = tau_star.before_stop(L);
    out.exercise = tau_star;

    for (int layer = L.steps(); layer >= 0; --layer) {
        const auto nodes = L.layer_nodes(layer);
        parallel_for(nodes.size(), par, [&](std::size_t i) {
            const NodeId id = nodes[i];
            if (tau_star.stops(id)) {
                out.capital[id] = payoff[id];
                return;
            }
            const auto support = model.kernels.support_union(id);
            const auto kids = L.children(id);
            std::vector<double> inc;
            std::vector<double> target;
            inc.reserve(support.size());
            target.reserve(support.size());
            for (std::size_t c : support) {
                inc.push_back(L.increment(id, c)[0]);
                target.push_back(out.capital[kids[c]]);
            }
            const auto step = one_step_superhedge(inc, target);
            out.capital[id] = step.capital + 0.0;  // no negative zero in reports
            out.holding[id] = out.active[id] ? step.holding : 0.0;
        });
    }
    out.x0 = out.capital[ScenarioLattice::root()];
    out.y0 = y0;
    out.gap = out.x0 - y0;
    return out;
}

PathwiseCheck verify_pathwise(const Model& model, const HedgeStrategy& strategy, const ValueField& payoff,
                              std::uint64_t max_paths) {
    const auto& L = model.lattice;
    const auto& rule = strategy.exercise;

    // Number of root-to-stop paths through support edges.
    std::vector<double> paths_from(L.size(), 0.0);
    std::vector<std::vector<std::size_t>> support(L.size());
    for (NodeId id = static_cast<NodeId>(L.size()); id-- > 0;) {
        if (rule.stops(id)) {
            paths_from[id] = 1.0;
            continue;
        }
        support[id] = model.kernels.support_union(id);
        for (std::size_t c : support[id]) paths_from[id] += paths_from[L.children(id)[c]];
    }
    PathwiseCheck out;
    out.paths = paths_from[ScenarioLattice::root()];
    out.worst_slack = std::numeric_limits<double>::infinity();

    if (out.paths <= static_cast<double>(max_paths)) {
        // Walk every path, accumulating wealth in path order.
        std::uint64_t ok = 0;
        struct Frame {
            NodeId id;
            double wealth;
        };
        std::vector<Frame> stack{{ScenarioLattice::root(), strategy.x0}};
        while (!stack.empty()) {
            const Frame fr = stack.back();
            stack.pop_back();
            if (rule.stops(fr.id)) {
                const double slack = fr.wealth - payoff[fr.id];
                out.worst_slack = std::min(out.worst_slack, slack);
                if (slack >= -kSlackTolerance) ++ok;
                continue;
            }
            const auto kids = L.children(fr.id);
            for (auto it = support[fr.id].rbegin(); it != support[fr.id].rend(); ++it) {
                const double gain = strategy.holding[fr.id] * L.increment(fr.id, *it)[0];
                stack.push_back({kids[*it], fr.wealth + gain});
            }
        }
        out.fraction = static_cast<double>(ok) / out.paths;
        return out;
    }

    // Too many paths: slack decomposes into per-edge slacks
    // m(v) + H(v) dB - m(child), so the worst path follows a min-plus recursion.
    out.exhaustive = false;
    std::vector<double> worst(L.size(), 0.0);
    std::vector<double> passing(L.size(), 0.0);  // paths avoiding violating edges
    for (NodeId id = static_cast<NodeId>(L.size()); id-- > 0;) {
        if (rule.stops(id)) {
            worst[id] = strategy.capital[id] - payoff[id];
            passing[id] = worst[id] >= -kSlackTolerance ? 1.0 : 0.0;
            continue;
        }
        worst[id] = std::numeric_limits<double>::infinity();
        const auto kids = L.children(id);
        for (std::size_t c : support[id]) {
            const double edge = strategy.capital[id] + strategy.holding[id] * L.increment(id, c)[0] -
                                strategy.capital[kids[c]];
            worst[id] = std::min(worst[id], edge + worst[kids[c]]);
            if (edge >= -kSlackTolerance) passing[id] += passing[kids[c]];
        }
    }
    out.worst_slack = worst[ScenarioLattice::root()];
    out.fraction = out.worst_slack >= -kSlackTolerance ? 1.0 : passing[ScenarioLattice::root()] / out.paths;
    return out;
}

BuyerPrice buyer_price(const Model& model, const ValueField& payoff, const ExerciseMask& mask, Parallelism par) {
    std::vector<double> negated(payoff.values());
    for (double& v : negated) v = -v;
    const ValueField minus(std::move(negated));

    const auto seller = backward_solve(model, payoff, mask, par);
    const auto seller_hedge = superhedge_solve(model, payoff, seller.tau_star, seller.y0, par);
    const auto dual = backward_solve(model, minus, mask, par);
    const auto dual_hedge = superhedge_solve(model, minus, dual.tau_star, dual.y0, par);
    return BuyerPrice{-dual.y0, -dual_hedge.x0, seller.y0, seller_hedge.x0};
}

PipelineResult bermudan_price(const Model& model, const ValueField& payoff, const ExerciseMask& mask,
                              Parallelism par) {
    PipelineResult out;
    out.report = backward_solve(model, payoff, mask, par);
    out.saddle = saddle_policy(out.report);
    out.saddle_check = verify_saddle(model, out.saddle, out.report.tau_star, payoff, mask, par);
    out.hedge = superhedge_solve(model, payoff, out.report.tau_star, out.report.y0, par);
    out.pathwise = verify_pathwise(model, out.hedge, payoff);
    return out;
}

} // namespace advsnell
