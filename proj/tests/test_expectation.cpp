#include "advsnell/error.hpp"
#include "advsnell/expectation.hpp"
#include "advsnell/oracle.hpp"
#include "advsnell/snell.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace advsnell;

namespace {

TreeModel three_children(std::vector<std::vector<double>> kernels) {
    TreeSpec spec;
    spec.nodes = {{"r", {{"a", {1.0}}, {"b", {0.0}}, {"c", {-1.0}}}, std::move(kernels), std::nullopt},
                  {"a", {}, {}, std::nullopt},
                  {"b", {}, {}, std::nullopt},
                  {"c", {}, {}, std::nullopt}};
    return build_tree(spec);
}

ValueField leaf_values(std::size_t n, std::vector<double> children) {
    ValueField f(n);
    for (std::size_t c = 0; c < children.size(); ++c) f[static_cast<NodeId>(c + 1)] = children[c];
    return f;
}

} // namespace

TEST(CondSublinear, PicksLargerKernel) {
    const auto t = fixtures::one_step(0.0, {0.5, 0.9});
    const auto r = cond_sublinear(t.model, leaf_values(3, {1.0, 0.0}), 0);
    EXPECT_DOUBLE_EQ(r.value, 0.9);
    EXPECT_EQ(r.argmax, 1u);
}

TEST(CondSublinear, ConstantAndSingleKernel) {
    const auto t = fixtures::one_step(0.0, {0.1, 0.5, 0.9});
    EXPECT_DOUBLE_EQ(cond_sublinear(t.model, leaf_values(3, {2.5, 2.5}), 0).value, 2.5);
    const auto single = fixtures::one_step(0.0, {0.3});
    EXPECT_DOUBLE_EQ(cond_sublinear(single.model, leaf_values(3, {1.0, 0.0}), 0).value, 0.3);
}

TEST(CondSublinear, TiesGoToLowestIndex) {
    const auto t = fixtures::one_step(0.0, {0.3, 0.7, 0.7});
    EXPECT_EQ(cond_sublinear(t.model, leaf_values(3, {1.0, 0.0}), 0).argmax, 1u);
    EXPECT_EQ(cond_sublinear(t.model, leaf_values(3, {1.0, 1.0}), 0).argmax, 0u);
}

TEST(CondSublinear, LeafIsAnError) {
    const auto t = fixtures::one_step(0.0);
    EXPECT_THROW(cond_sublinear(t.model, ValueField(3), 1), ModelError);
}

TEST(CondLinear, Examples) {
    const auto t = fixtures::one_step(0.0, {0.5, 0.9});
    const ControlPolicy p0({0, 0, 0}, "p0");
    EXPECT_DOUBLE_EQ(cond_linear(t.model, leaf_values(3, {1.0, 0.0}), 0, p0), 0.5);
    const ControlPolicy p1({1, 0, 0}, "p1");
    EXPECT_DOUBLE_EQ(cond_linear(t.model, leaf_values(3, {2.0, 2.0}), 0, p1), 2.0);
    const auto tri = three_children({{0.2, 0.3, 0.5}});
    EXPECT_NEAR(cond_linear(tri.model, leaf_values(4, {1.0, 2.0, 3.0}), 0, ControlPolicy({0, 0, 0, 0}, "p")), 2.3,
                1e-15);
    const ControlPolicy bad({5, 0, 0}, "bad");
    EXPECT_THROW(cond_linear(t.model, leaf_values(3, {1.0, 0.0}), 0, bad), ModelError);
}

TEST(StoppedExpectation, Examples) {
    const auto t = fixtures::one_step(0.6);
    const ValueField x(t.payoff);
    EXPECT_EQ(expectation_of_stopped(t.model, x, StoppingRule::at_root(t.model.lattice)).root, 0.6);
    EXPECT_DOUBLE_EQ(expectation_of_stopped(t.model, x, StoppingRule::terminal(t.model.lattice)).root, 0.7);
    const ControlPolicy low({0, 0, 0}, "low");
    EXPECT_DOUBLE_EQ(
        linear_expectation_of_stopped(t.model, x, StoppingRule::terminal(t.model.lattice), low).root, 0.3);
}

TEST(StoppedExpectation, TauStarReproducesY0) {
    for (const auto& t : fixtures::suite_models(11, 200)) {
        const auto mask = ExerciseMask::american(t.model.lattice.steps());
        const auto report = backward_solve(t.model, ValueField(t.payoff), mask);
        const auto e = expectation_of_stopped(t.model, report.payoff, report.tau_star);
        EXPECT_NEAR(e.root, report.y0, 1e-12 * std::max(1.0, std::abs(report.y0)));
    }
}

TEST(StoppedExpectation, RejectsNonTerminalRule) {
    const auto t = fixtures::one_step(0.6);
    EXPECT_THROW(expectation_of_stopped(t.model, ValueField(t.payoff), StoppingRule(3, false)), ModelError);
}

// Algebraic properties of the one-step sup over random instances and fields.
TEST(CondSublinear, Properties) {
    SuiteRng rng(2024);
    for (const auto& t : fixtures::suite_models(7, 300)) {
        const auto& L = t.model.lattice;
        const auto f = ValueField(fixtures::random_values(rng, L.size()));
        const auto g = ValueField(fixtures::random_values(rng, L.size()));
        ValueField sum(L.size());
        ValueField scaled(L.size());
        ValueField shifted(L.size());
        ValueField above(L.size());
        const double lambda = 3.0 * rng.uniform();
        const double c = 2.0 * rng.uniform() - 1.0;
        for (NodeId id = 0; id < L.size(); ++id) {
            sum[id] = f[id] + g[id];
            scaled[id] = lambda * f[id];
            shifted[id] = f[id] + c;
            above[id] = std::max(f[id], g[id]);
        }
        for (NodeId id = 0; id < L.size(); ++id) {
            if (L.is_leaf(id)) continue;
            const double ef = cond_sublinear(t.model, f, id).value;
            const double eg = cond_sublinear(t.model, g, id).value;
            const double tol = 1e-12;
            EXPECT_LE(cond_sublinear(t.model, sum, id).value, ef + eg + tol);
            EXPECT_NEAR(cond_sublinear(t.model, scaled, id).value, lambda * ef, tol);
            EXPECT_NEAR(cond_sublinear(t.model, shifted, id).value, ef + c, tol);
            EXPECT_GE(cond_sublinear(t.model, above, id).value, std::max(ef, eg) - tol);
            for (std::uint32_t k = 0; k < t.model.kernels.count(id); ++k) {
                std::vector<std::uint32_t> choice(L.size(), 0);
                choice[id] = k;
                EXPECT_LE(cond_linear(t.model, f, id, ControlPolicy(choice, "k")), ef);
            }
        }
    }
}

TEST(Tower, ExamplesAndDefects) {
    const auto t = fixtures::binary_tree(2, {{0.5, 0.5}, {0.8, 0.2}}, [](const std::string& s) {
        return static_cast<double>(s.size() * s.size()) - static_cast<double>(std::count(s.begin(), s.end(), '1'));
    });
    const ValueField f(t.payoff);
    EXPECT_EQ(tower_check(t.model, f, 1, 1, 2), 0.0);
    EXPECT_LE(tower_check(t.model, f, 0, 1, 2), 1e-12);
    EXPECT_EQ(tower_check(t.model, ValueField(t.model.lattice.size(), 4.0), 0, 1, 2), 0.0);
}

TEST(Tower, SweepMatchesBruteConditional) {
    for (const auto& t : fixtures::suite_models(5, 150)) {
        const auto& L = t.model.lattice;
        const int n = L.steps();
        const auto swept = sweep_sublinear(t.model, ValueField(t.payoff), n, 0);
        for (int s = 0; s < n; ++s) {
            for (NodeId id : L.layer_nodes(s)) {
                EXPECT_NEAR(swept[id], brute_conditional(t.model, id, t.payoff, n), 1e-12) << s;
            }
        }
        for (int s = 0; s <= n; ++s) {
            for (int u = s; u <= n; ++u) EXPECT_LE(tower_check(t.model, ValueField(t.payoff), s, u, n), 1e-12);
        }
    }
}
