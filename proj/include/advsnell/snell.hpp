#pragma once

// Nonlinear Snell envelope Y_i = X_i /\ E_i(Y_{i+1}) with Y_n = X_n, its
// first-hitting stopping rules, and structural checks on the stopped envelope.

#include "advsnell/expectation.hpp"
#include "advsnell/fields.hpp"
#include "advsnell/parallel.hpp"
#include "advsnell/payoff.hpp"
#include "advsnell/scenario.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace advsnell {

struct SolveDiagnostics {
    /// Max |Y - E(Y_next)| over nodes strictly before tau*.
    double martingale_defect = 0.0;
    /// |Y_0 - E(X_tau*)|.
    double root_defect = 0.0;
    /// Max defect of the two-phase recomputation over all layer pairs checked.
    double dpp_defect = 0.0;
};

struct SolveReport {
    ValueField payoff;
    ValueField value;
    /// First maximizing kernel of the one-step sup at every non-leaf node.
    std::vector<std::uint32_t> argmax;
    StoppingRule tau_star;
    ExerciseMask mask;
    double y0 = 0.0;
    std::optional<SolveDiagnostics> diagnostics;
};

SolveReport backward_solve(const Model& model, const PayoffProcess& payoff, const ExerciseMask& mask,
                           Parallelism par = {});
SolveReport backward_solve(const Model& model, const ValueField& payoff, const ExerciseMask& mask,
                           Parallelism par = {});

/// Runs the recursion from layer `from` (terminal data `terminal` there) down
/// to layer `to`. At exercisable layers the min with X is taken, elsewhere the
/// value is the plain one-step sup. Writes argmax indices when given.
ValueField snell_sweep(const Model& model, const ValueField& payoff, const ExerciseMask& mask, int from,
                       const ValueField& terminal, int to, Parallelism par = {},
                       std::vector<std::uint32_t>* argmax = nullptr);

/// Stop at exercisable nodes with X - Y <= eps (and at every leaf).
/// eps = 0 reproduces tau*. Throws ModelError for eps < 0.
StoppingRule hitting_rule(const ScenarioLattice& lattice, const ValueField& value, const ValueField& payoff,
                          double eps, const ExerciseMask& mask);

/// Sorted distinct positive gaps X - Y over exercisable non-leaf nodes.
std::vector<double> positive_gaps(const ScenarioLattice& lattice, const ValueField& value, const ValueField& payoff,
                                  const ExerciseMask& mask);

struct MartingaleCheck {
    double max_defect = 0.0;
    double root_defect = 0.0;
    std::size_t nodes_checked = 0;
};

/// E-martingale property of Y stopped at tau*, plus Y_0 = E(X_tau*).
MartingaleCheck martingale_check(const Model& model, const SolveReport& report);

/// Min over nodes before tau* of Y - E^P(Y_next). The supermartingale
/// property under P holds when this is >= -1e-12.
double supermartingale_check(const Model& model, const SolveReport& report, const ControlPolicy& policy);

/// Recomputes layer s from terminal data Y_t and returns the max deviation
/// from the stored Y_s. Throws ModelError unless s < t.
double dpp_check(const Model& model, const SolveReport& report, int s, int t);

/// Fills report.diagnostics: martingale/root defects and dpp_check over all
/// (s, t) pairs when the lattice has at most `max_dpp_steps` steps, otherwise
/// over (0, n), (0, n/2), (n/2, n) and (n-1, n).
void attach_diagnostics(const Model& model, SolveReport& report, int max_dpp_steps = 16);

} // namespace advsnell
