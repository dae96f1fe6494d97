#pragma once

// Grid-refinement studies: Cauchy differences of Y_0 along dyadic step
// counts, nested exercise masks on one lattice, transport of fine stopping
// rules to coarser exercise grids, and epsilon-hitting-time sweeps.

#include "advsnell/fields.hpp"
#include "advsnell/parallel.hpp"
#include "advsnell/payoff.hpp"
#include "advsnell/snell.hpp"

#include <optional>
#include <string>
#include <vector>

namespace advsnell {

/// Which side of the contract is priced. The buyer's price of X is minus the
/// seller's price of -X, so the buyer side runs every solve on -X.
enum class Side { seller, buyer };

/// Probability under P* (the report's argmax policy) that tau* stops before the last layer.
double early_stop_probability(const Model& model, const SolveReport& report);

struct DyadicConfig {
    std::vector<double> sigmas;
    double horizon = 1.0;
    std::vector<int> steps;
    Side side = Side::seller;
    /// Exercise every `stride` layers (1 = American). 0 means European.
    int exercise_stride = 1;
    bool with_hedge = false;
    Parallelism par;
};

struct DyadicRow {
    int steps = 0;
    /// Price on the configured side (buyer rows report -Y_0(-X)).
    double y0 = 0.0;
    /// |Y_0 at the next n - Y_0 here|; empty on the last row.
    std::optional<double> diff;
    /// log2(diff here / diff at the next n); empty when undefined.
    std::optional<double> rate;
    std::size_t stop_nodes = 0;
    int first_stop_layer = 0;
    /// Probability under P* that tau* stops before the horizon.
    double early_stop_probability = 0.0;
    /// Hedge of the solved contract (on -X for the buyer side).
    std::optional<double> hedge_x0;
    std::optional<double> hedge_gap;
};

struct DyadicStudy {
    std::vector<DyadicRow> rows;
    /// Least-squares slope of -log2(diff) against log2(n) over the last three differences.
    std::optional<double> rate_estimate;
    std::vector<std::string> flags;

    /// True if the last `count` differences are strictly decreasing.
    bool strictly_decreasing_tail(std::size_t count) const;
};

DyadicStudy dyadic_study(const DyadicConfig& config, const PayoffProcess& payoff);

struct NestedMaskStudy {
    std::vector<int> strides;
    std::vector<double> y0;
    /// y0 never decreases when moving to a mask whose exercise layers are a subset.
    bool monotone = true;
};

/// Solves one lattice under ExerciseMask::every(n, stride) for each stride.
NestedMaskStudy nested_mask_study(const Model& model, const ValueField& payoff, const std::vector<int>& strides,
                                  Parallelism par = {});

/// theta = first coarse layer at or after the fine rule's stop.
struct CoarsenedRule {
    StoppingRule fine;
    ExerciseMask coarse;
    /// The same rule as a node-attached decision set; available in tree mode,
    /// where "already stopped" is a property of the node.
    std::optional<StoppingRule> node_rule;
};

CoarsenedRule coarsen_rule(const ScenarioLattice& lattice, const StoppingRule& fine, const ExerciseMask& coarse);
/// Coarse grid given as times; throws ConfigError if they are not lattice times.
CoarsenedRule coarsen_rule(const ScenarioLattice& lattice, const StoppingRule& fine,
                           const std::vector<double>& coarse_times);

/// E(f_theta) by a backward pass over (node, fine-rule-has-fired) states.
double coarsened_expectation(const Model& model, const ValueField& f, const CoarsenedRule& rule);

struct CoarsenComparison {
    double fine_value = 0.0;    // E(X_tau)
    double coarse_value = 0.0;  // E(X_theta)
    double degradation = 0.0;   // coarse - fine
};

CoarsenComparison compare_coarsened(const Model& model, const ValueField& payoff, const CoarsenedRule& rule);

struct EpsilonRow {
    double eps = 0.0;
    std::size_t stop_nodes = 0;
    std::size_t effective_stops = 0;
    /// E(Y_{tau^eps}); value_ok when it does not exceed Y_0 (1e-12 relative).
    double value = 0.0;
    bool value_ok = true;
    bool equals_tau_star = false;
};

struct EpsilonStudy {
    std::vector<EpsilonRow> rows;  // sorted by eps ascending
    std::optional<double> min_positive_gap;
    bool monotone = true;
    bool stabilizes = true;
};

EpsilonStudy epsilon_study(const Model& model, const SolveReport& report, std::vector<double> eps_grid);

} // namespace advsnell
