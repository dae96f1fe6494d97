#include "advsnell/error.hpp"
#include "advsnell/oracle.hpp"
#include "advsnell/snell.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

using namespace advsnell;

namespace {

std::uint64_t count_rules(RuleEnumerator& e) {
    StoppingRule r;
    std::uint64_t n = 0;
    while (e.next(r)) ++n;
    return n;
}

std::uint64_t count_policies(PolicyEnumerator& e) {
    ControlPolicy p;
    std::uint64_t n = 0;
    while (e.next(p)) ++n;
    return n;
}

double leaf_depth(const std::string& s) { return static_cast<double>(s.size()) * 0.25; }

} // namespace

TEST(RuleEnumerator, Counts) {
    const auto one = fixtures::one_step(0.5);
    RuleEnumerator a(one.model.lattice, ExerciseMask::american(1));
    EXPECT_EQ(a.count(), 2u);
    EXPECT_EQ(count_rules(a), 2u);

    const auto two = fixtures::binary_tree(2, {{0.5, 0.5}}, leaf_depth);
    RuleEnumerator b(two.model.lattice, ExerciseMask::american(2));
    EXPECT_EQ(count_rules(b), 8u);
    RuleEnumerator c(two.model.lattice, ExerciseMask::from_layers(2, std::vector<int>{0, 2}));
    EXPECT_EQ(count_rules(c), 2u);
}

TEST(RuleEnumerator, FirstRuleContinuesAndAllDistinct) {
    const auto t = fixtures::binary_tree(2, {{0.5, 0.5}}, leaf_depth);
    const auto mask = ExerciseMask::american(2);
    RuleEnumerator e(t.model.lattice, mask);
    StoppingRule r;
    ASSERT_TRUE(e.next(r));
    EXPECT_EQ(r, StoppingRule::terminal(t.model.lattice));
    std::set<std::vector<bool>> seen;
    do {
        EXPECT_NO_THROW(r.validate(t.model.lattice, mask));
        std::vector<bool> bits;
        for (NodeId id = 0; id < r.size(); ++id) bits.push_back(r.stops(id));
        seen.insert(bits);
    } while (e.next(r));
    EXPECT_EQ(seen.size(), 8u);
}

TEST(RuleEnumerator, BudgetError) {
    const auto t = fixtures::binary_tree(3, {{0.5, 0.5}}, leaf_depth);
    EnumerationBudget budget;
    budget.max_rule_nodes = 6;
    EXPECT_THROW(RuleEnumerator(t.model.lattice, ExerciseMask::american(3), budget), BudgetError);
}

TEST(PolicyEnumerator, Counts) {
    const auto single = fixtures::binary_tree(2, {{0.5, 0.5}}, leaf_depth);
    PolicyEnumerator a(single.model);
    EXPECT_EQ(count_policies(a), 1u);
    const auto one = fixtures::one_step(0.5);
    PolicyEnumerator b(one.model);
    EXPECT_EQ(count_policies(b), 2u);
    const auto two = fixtures::binary_tree(2, {{0.5, 0.5}, {0.2, 0.8}}, leaf_depth);
    PolicyEnumerator c(two.model);
    EXPECT_EQ(c.count(), 8u);
    EXPECT_EQ(count_policies(c), 8u);
    std::vector<char> root_only(two.model.lattice.size(), 0);
    root_only[0] = 1;
    PolicyEnumerator d(two.model, root_only);
    EXPECT_EQ(count_policies(d), 2u);
}

TEST(PolicyEnumerator, BudgetError) {
    const auto t = fixtures::binary_tree(3, {{0.5, 0.5}, {0.2, 0.8}}, leaf_depth);
    EnumerationBudget budget;
    budget.max_policies = 64;
    EXPECT_THROW(PolicyEnumerator(t.model, budget), BudgetError);
    budget = {};
    budget.max_policy_nodes = 3;
    EXPECT_THROW(PolicyEnumerator(t.model, budget), BudgetError);
}

TEST(PathExpectation, Examples) {
    const auto t = fixtures::one_step(0.6);
    const ControlPolicy high({1, 0, 0}, "high");
    const auto root = path_expectation(t.model, StoppingRule::at_root(t.model.lattice), high, t.payoff);
    EXPECT_EQ(root.value, 0.6);
    EXPECT_EQ(root.paths, 1u);
    const auto leaves = path_expectation(t.model, StoppingRule::terminal(t.model.lattice), high, t.payoff);
    EXPECT_DOUBLE_EQ(leaves.value, 0.7);
    EXPECT_DOUBLE_EQ(leaves.stopped_mass, 1.0);

    EnumerationBudget budget;
    budget.max_paths = 1;
    EXPECT_THROW(path_expectation(t.model, StoppingRule::terminal(t.model.lattice), high, t.payoff, budget),
                 BudgetError);
}

TEST(PathExpectation, MassIsConserved) {
    for (const auto& t : fixtures::suite_models(61, 100)) {
        const auto mask = ExerciseMask::american(t.model.lattice.steps());
        RuleEnumerator rules(t.model.lattice, mask);
        StoppingRule r;
        while (rules.next(r)) {
            PolicyEnumerator policies(t.model);
            ControlPolicy p;
            while (policies.next(p)) EXPECT_NEAR(path_expectation(t.model, r, p, t.payoff).stopped_mass, 1.0, 1e-12);
        }
    }
}

TEST(BruteValues, Examples) {
    const auto a = fixtures::one_step(0.6);
    auto v = brute_values(a.model, a.payoff, ExerciseMask::american(1));
    EXPECT_DOUBLE_EQ(v.upper, 0.6);
    EXPECT_DOUBLE_EQ(v.lower, 0.6);
    EXPECT_EQ(v.rules, 2u);
    EXPECT_EQ(v.policies, 2u);

    const auto b = fixtures::one_step(0.8);
    v = brute_values(b.model, b.payoff, ExerciseMask::american(1));
    EXPECT_DOUBLE_EQ(v.upper, 0.7);
    EXPECT_DOUBLE_EQ(v.lower, 0.7);

    const auto c = fixtures::binary_tree(2, {{0.5, 0.5}, {0.3, 0.7}}, [](const std::string&) { return -1.5; });
    v = brute_values(c.model, c.payoff, ExerciseMask::american(2));
    EXPECT_EQ(v.upper, -1.5);
    EXPECT_EQ(v.lower, -1.5);
}

TEST(BruteValues, SuiteAgreesWithRecursion) {
    for (const auto& t : fixtures::suite_models(67, 300)) {
        const auto mask = ExerciseMask::american(t.model.lattice.steps());
        const auto v = brute_values(t.model, t.payoff, mask);
        const auto r = backward_solve(t.model, ValueField(t.payoff), mask);
        EXPECT_GE(v.upper, v.lower - 1e-12);
        EXPECT_NEAR(v.upper, r.y0, 1e-10);
        EXPECT_NEAR(v.lower, r.y0, 1e-10);
        EXPECT_NEAR(expectation_of_stopped(t.model, ValueField(t.payoff), v.argmin_rule).root, r.y0, 1e-10);
    }
}

TEST(BruteConditional, MatchesOneStepSup) {
    const auto t = fixtures::one_step(0.0, {0.2, 0.6, 0.4});
    EXPECT_DOUBLE_EQ(brute_conditional(t.model, 0, t.payoff, 1), 0.6);
    EXPECT_EQ(brute_conditional(t.model, 1, t.payoff, 1), 1.0);
}
