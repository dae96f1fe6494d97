#pragma once

// Seeded random tree instances for property tests and oracle runs.

#include "advsnell/scenario.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace advsnell {

struct SuiteOptions {
    int max_depth = 4;
    int max_branching = 3;
    int max_kernels = 3;
    /// Every kernel has mean-zero increments, so B is a martingale under each.
    bool martingale = false;
    std::size_t max_decidable = 12;
    std::uint64_t max_policies = 4096;
    std::uint64_t max_rules_times_policies = std::uint64_t{1} << 18;
};

/// mt19937_64 with explicit conversions, so instances do not depend on the
/// standard library's distribution implementations.
class SuiteRng {
public:
    explicit SuiteRng(std::uint64_t seed) : engine_(seed) {}
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }  // [0, 1)
    std::uint64_t below(std::uint64_t bound) { return engine_() % bound; }          // [0, bound)

private:
    std::mt19937_64 engine_;
};

/// One random explicit tree with per-node payoffs in [-1, 1]: all leaves at a
/// common depth <= max_depth, increments of both signs at every branching node.
/// Draws are retried until the instance fits the enumeration budgets.
TreeSpec random_tree(SuiteRng& rng, const SuiteOptions& options = {});

/// `count` instances from one seed; the same seed always yields the same suite.
std::vector<TreeSpec> seed_suite(std::uint64_t seed, std::size_t count, const SuiteOptions& options = {});

} // namespace advsnell
