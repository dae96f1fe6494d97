#include "advsnell/suite.hpp"

#include "advsnell/error.hpp"

#include <cmath>
#include <string>

namespace advsnell {

namespace {

// Eighths keep increments exact in binary.
double eighths(SuiteRng& rng, int lo, int hi) {
    return static_cast<double>(lo + static_cast<int>(rng.below(hi - lo + 1))) / 8.0;
}

std::vector<double> increments_for(SuiteRng& rng, int branching) {
    if (branching == 1) return {0.0};
    const double up = eighths(rng, 1, 8);
    const double down = -eighths(rng, 1, 8);
    if (branching == 2) return {up, down};
    double mid = 0.0;
    if (rng.below(2) == 1) {
        // Strictly between down and up, on the eighths grid.
        const int lo = static_cast<int>(std::lround(down * 8.0)) + 1;
        const int hi = static_cast<int>(std::lround(up * 8.0)) - 1;
        mid = eighths(rng, lo, hi);
    }
    return {up, mid, down};
}

std::vector<double> general_kernel(SuiteRng& rng, std::size_t size) {
    std::vector<double> p(size, 0.0);
    double total = 0.0;
    for (double& x : p) {
        x = rng.below(5) == 0 ? 0.0 : 0.05 + rng.uniform();
        total += x;
    }
    if (total == 0.0) {
        p[rng.below(size)] = 1.0;
        return p;
    }
    for (double& x : p) x /= total;
    return p;
}

std::vector<double> martingale_kernel(SuiteRng& rng, const std::vector<double>& inc) {
    if (inc.size() == 1) return {1.0};
    const double up = inc.front();
    const double down = inc.back();
    // Two-point law on {up, down} with mean zero.
    const std::vector<double> outer{-down / (up - down), 0.0, up / (up - down)};
    if (inc.size() == 2) return {outer[0], outer[2]};
    const double mid = inc[1];
    std::vector<double> inner(3, 0.0);
    if (mid == 0.0) {
        inner[1] = 1.0;
    } else if (mid > 0.0) {
        inner[1] = -down / (mid - down);
        inner[2] = mid / (mid - down);
    } else {
        inner[0] = -mid / (up - mid);
        inner[1] = up / (up - mid);
    }
    // Quantized mixing weights produce repeated kernels now and then.
    const double lambda = rng.below(3) == 0 ? static_cast<double>(rng.below(5)) / 4.0 : rng.uniform();
    std::vector<double> p(3);
    for (int c = 0; c < 3; ++c) p[c] = lambda * outer[c] + (1.0 - lambda) * inner[c];
    return p;
}

double random_payoff(SuiteRng& rng) {
    const double x = 2.0 * rng.uniform() - 1.0;
    // Quarter steps create ties between X and the continuation value.
    return rng.below(10) < 3 ? std::round(x * 4.0) / 4.0 : x;
}

struct Budget {
    std::size_t decidable = 0;
    double policies = 1.0;
};

} // namespace

TreeSpec random_tree(SuiteRng& rng, const SuiteOptions& options) {
    if (options.max_depth < 1 || options.max_branching < 1 || options.max_kernels < 1) {
        throw ConfigError("suite options must be positive");
    }
    for (int attempt = 0; attempt < 100000; ++attempt) {
        const int depth = 1 + static_cast<int>(rng.below(options.max_depth));
        TreeSpec spec;
        spec.horizon = 1.0;
        spec.dimension = 1;
        Budget budget;
        bool over = false;

        // Breadth-first growth; labels follow creation order.
        std::vector<std::pair<std::size_t, int>> frontier{{0, 0}};
        spec.nodes.push_back({"n0", {}, {}, std::nullopt});
        for (std::size_t head = 0; head < frontier.size() && !over; ++head) {
            const auto [index, level] = frontier[head];
            spec.nodes[index].payoff = random_payoff(rng);
            if (level == depth) continue;
            const int branching = 1 + static_cast<int>(rng.below(options.max_branching));
            const auto inc = increments_for(rng, branching);
            for (int c = 0; c < branching; ++c) {
                const std::string label = "n" + std::to_string(spec.nodes.size());
                spec.nodes[index].children.push_back({label, {inc[c]}});
                frontier.push_back({spec.nodes.size(), level + 1});
                spec.nodes.push_back({label, {}, {}, std::nullopt});
            }
            const int kernels = 1 + static_cast<int>(rng.below(options.max_kernels));
            for (int k = 0; k < kernels; ++k) {
                if (k > 0 && rng.below(10) == 0) {
                    spec.nodes[index].kernels.push_back(spec.nodes[index].kernels.back());
                    continue;
                }
                spec.nodes[index].kernels.push_back(options.martingale ? martingale_kernel(rng, inc)
                                                                       : general_kernel(rng, inc.size()));
            }
            ++budget.decidable;
            budget.policies *= kernels;
            over = budget.decidable > options.max_decidable ||
                   budget.policies > static_cast<double>(options.max_policies) ||
                   std::ldexp(budget.policies, static_cast<int>(budget.decidable)) >
                       static_cast<double>(options.max_rules_times_policies);
        }
        if (!over) return spec;
    }
    throw BudgetError("could not draw a suite instance within the enumeration budgets");
}

std::vector<TreeSpec> seed_suite(std::uint64_t seed, std::size_t count, const SuiteOptions& options) {
    SuiteRng rng(seed);
    std::vector<TreeSpec> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(random_tree(rng, options));
    return out;
}

} // namespace advsnell
