#include "advsnell/game.hpp"
#include "advsnell/oracle.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace advsnell;

namespace {

double scale(double y) { return std::max(1.0, std::abs(y)); }

} // namespace

TEST(LowerValue, EqualsUpperBitwise) {
    for (const auto& t : fixtures::suite_models(41, 300)) {
        const auto mask = ExerciseMask::american(t.model.lattice.steps());
        const ValueField x(t.payoff);
        EXPECT_EQ(lower_value(t.model, x, mask), backward_solve(t.model, x, mask).value);
    }
}

TEST(LowerValue, Examples) {
    const auto t = fixtures::one_step(0.8);
    EXPECT_DOUBLE_EQ(lower_value(t.model, ValueField(t.payoff), ExerciseMask::american(1))[0], 0.7);
    const auto c = fixtures::binary_tree(2, {{0.5, 0.5}, {0.1, 0.9}}, [](const std::string&) { return -2.0; });
    const auto z = lower_value(c.model, ValueField(c.payoff), ExerciseMask::american(2));
    for (double v : z.values()) EXPECT_EQ(v, -2.0);
}

TEST(ClassicalEnvelope, Examples) {
    const auto t = fixtures::one_step(0.8);
    const auto mask = ExerciseMask::american(1);
    const auto env = classical_lower_envelope(t.model, ControlPolicy({1, 0, 0}, "high"), ValueField(t.payoff), mask);
    EXPECT_DOUBLE_EQ(env.root, 0.7);
    EXPECT_FALSE(env.rule.stops(0));

    const auto c = fixtures::binary_tree(2, {{0.5, 0.5}, {0.1, 0.9}}, [](const std::string&) { return 3.0; });
    const auto cenv = classical_lower_envelope(c.model, ControlPolicy::constant(c.model, 1, "k1"),
                                               ValueField(c.payoff), ExerciseMask::american(2));
    for (double v : cenv.value.values()) EXPECT_EQ(v, 3.0);
}

TEST(ClassicalEnvelope, SingleKernelMatchesSolve) {
    SuiteOptions opts;
    opts.max_kernels = 1;
    SuiteRng rng(43);
    for (int i = 0; i < 200; ++i) {
        const auto t = build_tree(random_tree(rng, opts));
        const auto mask = ExerciseMask::american(t.model.lattice.steps());
        const ValueField x(t.payoff);
        const auto env = classical_lower_envelope(t.model, ControlPolicy::constant(t.model, 0, "k0"), x, mask);
        EXPECT_EQ(env.value, backward_solve(t.model, x, mask).value);
    }
}

TEST(ClassicalEnvelope, MatchesEnumerationPerPolicy) {
    for (const auto& t : fixtures::suite_models(47, 100)) {
        const auto mask = ExerciseMask::american(t.model.lattice.steps());
        const ValueField x(t.payoff);
        PolicyEnumerator policies(t.model);
        ControlPolicy p;
        while (policies.next(p)) {
            RuleEnumerator rules(t.model.lattice, mask);
            StoppingRule rule;
            double best = INFINITY;
            while (rules.next(rule)) best = std::min(best, path_expectation(t.model, rule, p, t.payoff).value);
            const auto env = classical_lower_envelope(t.model, p, x, mask);
            EXPECT_NEAR(env.root, best, 1e-12 * scale(best));
            EXPECT_NEAR(path_expectation(t.model, env.rule, p, t.payoff).value, best, 1e-12 * scale(best));
        }
    }
}

TEST(SaddlePolicy, OneStepExample) {
    const auto t = fixtures::one_step(0.6);
    const auto mask = ExerciseMask::american(1);
    const auto r = backward_solve(t.model, ValueField(t.payoff), mask);
    const auto p_star = saddle_policy(r);
    EXPECT_EQ(p_star[0], 1u);
    const auto check = verify_saddle(t.model, p_star, r.tau_star, r.payoff, mask);
    EXPECT_DOUBLE_EQ(check.saddle_value, 0.6);
    EXPECT_DOUBLE_EQ(check.lower, 0.6);
    EXPECT_DOUBLE_EQ(check.upper, 0.6);
    EXPECT_EQ(check.left_defect, 0.0);
    EXPECT_EQ(check.right_defect, 0.0);
    // Waiting under P* yields 0.7 >= 0.6.
    EXPECT_DOUBLE_EQ(path_expectation(t.model, StoppingRule::terminal(t.model.lattice), p_star, t.payoff).value, 0.7);
}

TEST(SaddlePolicy, SingleKernelAndConstantPayoff) {
    const auto single = fixtures::binary_tree(2, {{0.4, 0.6}}, [](const std::string& s) { return 0.1 * s.size(); });
    const auto r = backward_solve(single.model, ValueField(single.payoff), ExerciseMask::american(2));
    EXPECT_EQ(saddle_policy(r), ControlPolicy::constant(single.model, 0, "k0"));

    const auto c = fixtures::binary_tree(2, {{0.4, 0.6}, {0.9, 0.1}}, [](const std::string&) { return 1.0; });
    const auto mask = ExerciseMask::american(2);
    const auto rc = backward_solve(c.model, ValueField(c.payoff), mask);
    EXPECT_EQ(saddle_policy(rc), ControlPolicy::constant(c.model, 0, "k0"));
    const auto check = verify_saddle(c.model, saddle_policy(rc), rc.tau_star, rc.payoff, mask);
    EXPECT_EQ(check.left_defect, 0.0);
    EXPECT_EQ(check.right_defect, 0.0);
}

TEST(SaddlePolicy, SharpAgreesBeforeTauStar) {
    for (const auto& t : fixtures::suite_models(53, 200)) {
        const auto r = backward_solve(t.model, ValueField(t.payoff), ExerciseMask::american(t.model.lattice.steps()));
        const auto sharp = sharp_policy(t.model, r);
        const auto star = saddle_policy(r);
        const auto before = r.tau_star.before_stop(t.model.lattice);
        for (NodeId id = 0; id < t.model.lattice.size(); ++id) {
            if (t.model.lattice.is_leaf(id)) continue;
            if (before[id]) EXPECT_EQ(sharp[id], star[id]);
            else EXPECT_EQ(sharp[id], 0u);
        }
        EXPECT_NEAR(path_expectation(t.model, r.tau_star, sharp, t.payoff).value, r.y0, 1e-12 * scale(r.y0));
    }
}

TEST(SaddlePolicy, SuiteDefects) {
    for (const auto& t : fixtures::suite_models(59, 500)) {
        const auto mask = ExerciseMask::american(t.model.lattice.steps());
        const auto r = backward_solve(t.model, ValueField(t.payoff), mask);
        const auto check = verify_saddle(t.model, saddle_policy(r), r.tau_star, r.payoff, mask);
        const double tol = 1e-12 * scale(r.y0);
        EXPECT_LE(check.left_defect, tol);
        EXPECT_LE(check.right_defect, tol);
        EXPECT_NEAR(check.saddle_value, r.y0, tol);
        // P* is a best response among all policies for tau*.
        EXPECT_NEAR(brute_stopped_sup(t.model, r.tau_star, t.payoff), check.saddle_value, tol);
    }
}
