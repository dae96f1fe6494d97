#include "advsnell/refine.hpp"

#include "advsnell/error.hpp"
#include "advsnell/expectation.hpp"
#include "advsnell/hedge.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace advsnell {

namespace {

ExerciseMask mask_for(int steps, int stride) {
    if (stride < 0) throw ConfigError("exercise stride must be >= 0");
    return stride == 0 ? ExerciseMask::european(steps) : ExerciseMask::every(steps, stride);
}

ValueField negate(const ValueField& f) {
    std::vector<double> v(f.values());
    for (double& x : v) x = -x;
    return ValueField(std::move(v));
}

} // namespace

double early_stop_probability(const Model& model, const SolveReport& report) {
    const auto& L = model.lattice;
    std::vector<double> mass(L.size(), 0.0);
    mass[ScenarioLattice::root()] = 1.0;
    double early = 0.0;
    for (int layer = 0; layer < L.steps(); ++layer) {
        for (NodeId id : L.layer_nodes(layer)) {
            if (mass[id] == 0.0) continue;
            if (report.tau_star.stops(id)) {
                early += mass[id];
                continue;
            }
            const auto& k = model.kernels.at(id)[report.argmax[id]];
            const auto kids = L.children(id);
            for (std::size_t c = 0; c < kids.size(); ++c) mass[kids[c]] += mass[id] * k.probs[c];
        }
    }
    return early;
}

bool DyadicStudy::strictly_decreasing_tail(std::size_t count) const {
    std::vector<double> diffs;
    for (const auto& row : rows) {
        if (row.diff) diffs.push_back(*row.diff);
    }
    if (count == 0 || count > diffs.size()) return false;
    for (std::size_t i = diffs.size() - count + 1; i < diffs.size(); ++i) {
        if (!(diffs[i] < diffs[i - 1])) return false;
    }
    return true;
}

DyadicStudy dyadic_study(const DyadicConfig& config, const PayoffProcess& payoff) {
    if (config.steps.empty()) throw ConfigError("dyadic study needs at least one step count");
    DyadicStudy out;
    for (std::size_t i = 0; i < config.steps.size(); ++i) {
        if (config.steps[i] <= 0) throw ConfigError("step counts must be positive");
        if (i > 0 && config.steps[i] != 2 * config.steps[i - 1]) {
            out.flags.push_back("non-dyadic step sequence at n=" + std::to_string(config.steps[i]));
        }
    }

    for (int n : config.steps) {
        GLatticeSpec spec;
        spec.steps = n;
        spec.horizon = config.horizon;
        spec.sigmas = config.sigmas;
        const Model model = build_g_lattice(spec);
        ValueField x = payoff.tabulate(model.lattice);
        if (config.side == Side::buyer) x = negate(x);
        const auto mask = mask_for(n, config.exercise_stride);
        const auto report = backward_solve(model, x, mask, config.par);

        DyadicRow row;
        row.steps = n;
        row.y0 = config.side == Side::seller ? report.y0 : -report.y0;
        const auto effective = report.tau_star.effective_stops(model.lattice);
        row.first_stop_layer = n;
        for (NodeId id = 0; id < model.lattice.size(); ++id) {
            if (!effective[id] || model.lattice.is_leaf(id)) continue;
            ++row.stop_nodes;
            row.first_stop_layer = std::min(row.first_stop_layer, model.lattice.layer(id));
        }
        row.early_stop_probability = early_stop_probability(model, report);
        if (config.with_hedge) {
            const auto hedge = superhedge_solve(model, x, report.tau_star, report.y0, config.par);
            row.hedge_x0 = hedge.x0;
            row.hedge_gap = hedge.gap;
        }
        out.rows.push_back(row);
    }

    for (std::size_t i = 0; i + 1 < out.rows.size(); ++i) {
        out.rows[i].diff = std::abs(out.rows[i + 1].y0 - out.rows[i].y0);
    }
    for (std::size_t i = 0; i + 2 < out.rows.size(); ++i) {
        const double a = *out.rows[i].diff;
        const double b = *out.rows[i + 1].diff;
        if (a > 0.0 && b > 0.0) out.rows[i].rate = std::log2(a / b);
        if (b > 2.0 * a) out.flags.push_back("difference blow-up after n=" + std::to_string(out.rows[i].steps));
    }

    // Least squares over the last (up to) three positive differences.
    std::vector<std::array<double, 2>> pts;
    for (const auto& row : out.rows) {
        if (row.diff && *row.diff > 0.0) pts.push_back({std::log2(row.steps), -std::log2(*row.diff)});
    }
    if (pts.size() > 3) pts.erase(pts.begin(), pts.end() - 3);
    if (pts.size() >= 2) {
        double mx = 0.0;
        double my = 0.0;
        for (const auto& p : pts) {
            mx += p[0];
            my += p[1];
        }
        mx /= static_cast<double>(pts.size());
        my /= static_cast<double>(pts.size());
        double sxy = 0.0;
        double sxx = 0.0;
        for (const auto& p : pts) {
            sxy += (p[0] - mx) * (p[1] - my);
            sxx += (p[0] - mx) * (p[0] - mx);
        }
        if (sxx > 0.0) out.rate_estimate = sxy / sxx;
    }
    return out;
}

NestedMaskStudy nested_mask_study(const Model& model, const ValueField& payoff, const std::vector<int>& strides,
                                  Parallelism par) {
    NestedMaskStudy out;
    out.strides = strides;
    std::vector<ExerciseMask> masks;
    for (int stride : strides) {
        masks.push_back(mask_for(model.lattice.steps(), stride));
        out.y0.push_back(backward_solve(model, payoff, masks.back(), par).y0);
    }
    for (std::size_t a = 0; a < masks.size(); ++a) {
        for (std::size_t b = 0; b < masks.size(); ++b) {
            // Rounding is monotone, so the ordering holds without tolerance.
            if (masks[a].subset_of(masks[b]) && out.y0[a] < out.y0[b]) out.monotone = false;
        }
    }
    return out;
}

CoarsenedRule coarsen_rule(const ScenarioLattice& lattice, const StoppingRule& fine, const ExerciseMask& coarse) {
    coarse.validate(lattice.steps());
    fine.validate_terminal(lattice);
    CoarsenedRule out{fine, coarse, std::nullopt};
    if (lattice.mode() == LatticeMode::tree) {
        std::vector<char> fired(lattice.size(), 0);
        StoppingRule node_rule(lattice.size());
        for (NodeId id = 0; id < lattice.size(); ++id) {
            const auto parent = lattice.parent(id);
            fired[id] = (parent && fired[*parent]) || fine.stops(id);
            if (lattice.is_leaf(id) || (fired[id] && coarse.allows(lattice.layer(id)))) node_rule.set(id, true);
        }
        out.node_rule = std::move(node_rule);
    }
    return out;
}

CoarsenedRule coarsen_rule(const ScenarioLattice& lattice, const StoppingRule& fine,
                           const std::vector<double>& coarse_times) {
    const auto& times = lattice.grid().times;
    const double tol = 1e-12 * std::max(1.0, lattice.grid().horizon());
    std::vector<int> layers;
    for (double t : coarse_times) {
        const auto it = std::find_if(times.begin(), times.end(), [&](double s) { return std::abs(s - t) <= tol; });
        if (it == times.end()) {
            throw ConfigError("coarse time " + std::to_string(t) + " is not a lattice time: grids are not nested");
        }
        layers.push_back(static_cast<int>(it - times.begin()));
    }
    layers.push_back(lattice.steps());
    return coarsen_rule(lattice, fine, ExerciseMask::from_layers(lattice.steps(), layers));
}

double coarsened_expectation(const Model& model, const ValueField& f, const CoarsenedRule& rule) {
    const auto& L = model.lattice;
    // v[2 * id + fired]: value at `id` given whether the fine rule fired strictly before it.
    std::vector<double> v(2 * L.size(), 0.0);
    for (NodeId id = static_cast<NodeId>(L.size()); id-- > 0;) {
        for (int before = 0; before < 2; ++before) {
            const int fired = (before || rule.fine.stops(id)) ? 1 : 0;
            if (L.is_leaf(id) || (fired && rule.coarse.allows(L.layer(id)))) {
                v[2 * id + before] = f[id];
                continue;
            }
            const auto kids = L.children(id);
            double best = -std::numeric_limits<double>::infinity();
            for (const auto& k : model.kernels.at(id)) {
                double s = 0.0;
                for (std::size_t c = 0; c < kids.size(); ++c) s += k.probs[c] * v[2 * kids[c] + fired];
                best = std::max(best, s);
            }
            v[2 * id + before] = best;
        }
    }
    return v[2 * ScenarioLattice::root()];
}

CoarsenComparison compare_coarsened(const Model& model, const ValueField& payoff, const CoarsenedRule& rule) {
    CoarsenComparison out;
    out.fine_value = expectation_of_stopped(model, payoff, rule.fine).root;
    out.coarse_value = coarsened_expectation(model, payoff, rule);
    out.degradation = out.coarse_value - out.fine_value;
    return out;
}

EpsilonStudy epsilon_study(const Model& model, const SolveReport& report, std::vector<double> eps_grid) {
    const auto& L = model.lattice;
    std::sort(eps_grid.begin(), eps_grid.end());
    eps_grid.erase(std::unique(eps_grid.begin(), eps_grid.end()), eps_grid.end());

    EpsilonStudy out;
    const auto gaps = positive_gaps(L, report.value, report.payoff, report.mask);
    if (!gaps.empty()) out.min_positive_gap = gaps.front();
    const double tol = 1e-12 * std::max(1.0, std::abs(report.y0));

    StoppingRule previous;
    for (double eps : eps_grid) {
        const auto rule = hitting_rule(L, report.value, report.payoff, eps, report.mask);
        EpsilonRow row;
        row.eps = eps;
        row.stop_nodes = rule.stop_count();
        const auto eff = rule.effective_stops(L);
        row.effective_stops = static_cast<std::size_t>(std::count(eff.begin(), eff.end(), 1));
        row.value = expectation_of_stopped(model, report.value, rule).root;
        row.value_ok = row.value <= report.y0 + tol;
        row.equals_tau_star = rule == report.tau_star;
        if (previous.size() == rule.size()) {
            for (NodeId id = 0; id < L.size(); ++id) {
                if (previous.stops(id) && !rule.stops(id)) out.monotone = false;
            }
        }
        const bool below_gap = !out.min_positive_gap || eps < *out.min_positive_gap;
        if (below_gap && !row.equals_tau_star) out.stabilizes = false;
        out.rows.push_back(row);
        previous = rule;
    }
    return out;
}

} // namespace advsnell
