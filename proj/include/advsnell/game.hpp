#pragma once

// Controller-and-stopper game: lower value, per-measure classical envelopes
// and the saddle point (tau*, P*).
//
// On a finite lattice the worst-case measure is the greedy policy that picks
// the argmax kernel of the one-step sup at every node, both before and after
// tau*. Before tau* it is the measure under which Y stopped at tau* is a
// martingale; after tau* it makes immediate stopping optimal.

#include "advsnell/fields.hpp"
#include "advsnell/parallel.hpp"
#include "advsnell/snell.hpp"

namespace advsnell {

/// Z_i = X_i /\ E_i(Z_{i+1}), the lower value (sup over P of inf over tau).
ValueField lower_value(const Model& model, const ValueField& payoff, const ExerciseMask& mask, Parallelism par = {});

struct ClassicalEnvelope {
    ValueField value;
    /// Greedy stopper rule: stop where V^P = X on exercisable layers.
    StoppingRule rule;
    double root = 0.0;
};

/// Classical Snell envelope under the single measure induced by `policy`.
ClassicalEnvelope classical_lower_envelope(const Model& model, const ControlPolicy& policy, const ValueField& payoff,
                                           const ExerciseMask& mask, Parallelism par = {});

/// P*: the argmax kernel of the report's recursion at every node.
ControlPolicy saddle_policy(const SolveReport& report);

/// P-sharp: P* at nodes before tau*, kernel 0 elsewhere.
ControlPolicy sharp_policy(const Model& model, const SolveReport& report);

struct SaddleCheck {
    /// E^{P*}[X_tau*].
    double saddle_value = 0.0;
    /// inf_tau E^{P*}[X_tau] via the classical envelope.
    double lower = 0.0;
    /// sup_P E^P[X_tau*] via the sublinear stopped expectation.
    double upper = 0.0;
    double left_defect = 0.0;
    double right_defect = 0.0;
};

SaddleCheck verify_saddle(const Model& model, const ControlPolicy& p_star, const StoppingRule& tau_star,
                          const ValueField& payoff, const ExerciseMask& mask, Parallelism par = {});

} // namespace advsnell
