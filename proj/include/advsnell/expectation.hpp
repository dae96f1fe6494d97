#pragma once

// Conditional sublinear expectation E_t on a lattice: at a node it is the
// maximum over the node's kernels of the one-step linear expectation. Also the
// linear counterpart under a fixed policy, and expectations of stopped payoffs.

#include "advsnell/fields.hpp"
#include "advsnell/parallel.hpp"
#include "advsnell/scenario.hpp"

#include <cstdint>

namespace advsnell {

struct OneStep {
    double value = 0.0;
    /// First maximizing kernel index (lowest index wins ties).
    std::uint32_t argmax = 0;
};

/// sum_c k(c) * next(child c), summed in the node's child order.
double kernel_dot(const ScenarioLattice& lattice, const Kernel& kernel, const ValueField& next, NodeId node);

/// max_k sum_c k(c) next(c). Throws ModelError at a leaf.
OneStep cond_sublinear(const Model& model, const ValueField& next, NodeId node);

/// sum_c k_policy(c) next(c). Throws ModelError for an out-of-range index or a leaf.
double cond_linear(const Model& model, const ValueField& next, NodeId node, const ControlPolicy& policy);

struct StoppedExpectation {
    ValueField field;
    double root = 0.0;
};

/// E(f_tau) by backward pass: f at stop nodes, one-step sup at continuation
/// nodes. Requires a terminal-forced rule.
StoppedExpectation expectation_of_stopped(const Model& model, const ValueField& f, const StoppingRule& rule,
                                          Parallelism par = {});

/// E^P[f_tau] for the measure induced by `policy`, same backward structure.
StoppedExpectation linear_expectation_of_stopped(const Model& model, const ValueField& f, const StoppingRule& rule,
                                                 const ControlPolicy& policy, Parallelism par = {});

/// E_s(f) for f given on layer `from`, computed by layer-synchronous sweeps
/// down to layer `to`. Entries outside layers [to, from] are left at 0.
ValueField sweep_sublinear(const Model& model, const ValueField& f, int from, int to, Parallelism par = {});

/// Max over layer-s nodes of |E_s(f) - E_s(E_t(f))| for f on layer j. The
/// left side is evaluated by memoized depth-first recursion from each layer-s
/// node, the right side by two layer sweeps (j -> t, then t -> s).
double tower_check(const Model& model, const ValueField& f, int s, int t, int j);

} // namespace advsnell
