#pragma once

// Seller's superhedge of an American/Bermudan claim exercised at tau*: on each
// node before tau* the capital m and holding H solve
//     m = min_H max_c ( target(c) - H * dB(c) )
// over the children c in the union of the kernel supports. The seller's
// capital x0 = m(root) dominates Y_0 by weak duality; the difference is
// reported as the discrete gap.

#include "advsnell/fields.hpp"
#include "advsnell/game.hpp"
#include "advsnell/parallel.hpp"
#include "advsnell/snell.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace advsnell {

struct OneStepHedge {
    double capital = 0.0;
    double holding = 0.0;
};

/// Exact solution of min_H max_c (targets[c] - H * increments[c]) for scalar
/// increments: the optimum sits at H = 0 or where two constraints bind, so
/// those candidates are scanned and the first minimizer kept. Throws
/// ModelError if the increments admit arbitrage (all of one strict sign).
OneStepHedge one_step_superhedge(std::span<const double> increments, std::span<const double> targets);

/// True if every kernel gives the increments mean zero, within 1e-12 of the
/// node's largest increment. Dominance x0 >= Y_0 is only guaranteed then.
bool martingale_kernels(const Model& model);

struct HedgeStrategy {
    double x0 = 0.0;
    double y0 = 0.0;
    double gap = 0.0;  // x0 - y0
    /// Required capital m per node (equals X at stop nodes).
    ValueField capital;
    /// Holding H per node; 0 at stop nodes and nodes never reached before tau*.
    ValueField holding;
    /// Nodes reached before tau* has stopped.
    std::vector<char> active;
    StoppingRule exercise;
};

/// Requires d = 1. `y0` is the sublinear value the gap is measured against.
HedgeStrategy superhedge_solve(const Model& model, const ValueField& payoff, const StoppingRule& tau_star, double y0,
                               Parallelism par = {});

struct PathwiseCheck {
    /// Fraction of root-to-stop paths with x0 + sum H dB >= X(stop) - 1e-12.
    double fraction = 1.0;
    /// Smallest x0 + sum H dB - X(stop) found.
    double worst_slack = 0.0;
    double paths = 0.0;
    /// False when the path count exceeded `max_paths` and a per-edge dynamic
    /// program was used instead (then `fraction` is a lower bound).
    bool exhaustive = true;
};

PathwiseCheck verify_pathwise(const Model& model, const HedgeStrategy& strategy, const ValueField& payoff,
                              std::uint64_t max_paths = 1'000'000);

struct BuyerPrice {
    /// -Y_0(-X).
    double buyer_value = 0.0;
    /// -x0(-X).
    double buyer_hedge = 0.0;
    double seller_value = 0.0;
    double seller_hedge = 0.0;
};

/// Runs the seller pipeline on X and on -X.
BuyerPrice buyer_price(const Model& model, const ValueField& payoff, const ExerciseMask& mask, Parallelism par = {});

struct PipelineResult {
    SolveReport report;
    ControlPolicy saddle;
    SaddleCheck saddle_check;
    HedgeStrategy hedge;
    PathwiseCheck pathwise;
};

/// Solve, saddle and hedge under the given exercise mask.
PipelineResult bermudan_price(const Model& model, const ValueField& payoff, const ExerciseMask& mask,
                              Parallelism par = {});

} // namespace advsnell
