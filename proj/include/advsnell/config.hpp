#pragma once

// Run configuration: the JSON schema accepted by the CLI and its translation
// into models, payoffs and exercise masks. Unknown keys are rejected.

#include "advsnell/oracle.hpp"
#include "advsnell/payoff.hpp"
#include "advsnell/refine.hpp"
#include "advsnell/scenario.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace advsnell {

struct AmbiguityConfig {
    enum class Type { g, rectangle, explicit_tree };
    Type type = Type::g;
    std::vector<double> sigmas;
    std::vector<double> drifts;
    std::vector<double> vols;
    std::optional<double> step;
    TreeSpec tree;
};

struct ExerciseConfig {
    enum class Type { american, european, every, layers };
    Type type = Type::american;
    int stride = 1;
    std::vector<int> layers;
};

struct SuiteConfig {
    std::uint64_t seed = 42;
    std::size_t count = 1000;
    bool martingale = false;
};

struct RunConfig {
    std::optional<LatticeMode> mode;
    int n = 0;
    double horizon = 1.0;
    int dimension = 1;
    std::optional<AmbiguityConfig> ambiguity;
    SummaryRule summaries;
    std::optional<PayoffSpec> payoff;
    Side side = Side::seller;
    ExerciseConfig exercise;
    EnumerationBudget budget;
    std::vector<double> eps_grid;
    std::vector<int> n_grid;
    std::vector<int> strides{1, 2, 4, 8};
    bool hedge = false;
    std::optional<SuiteConfig> suite;
    MomentOptions moment;
    bool moment_requested = false;
};

/// Parses and validates a config document. Throws ConfigError with the
/// offending key on schema violations and malformed JSON.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

/// Parses an explicit tree ({T, d, nodes: [...]}) as used by the "explicit"
/// ambiguity type and by generated suites.
TreeSpec parse_tree_spec(std::string_view json_text);
std::string tree_spec_to_json(const TreeSpec& spec);

struct Instance {
    Model model;
    /// X on every node, before any side adjustment.
    ValueField payoff;
    std::string payoff_label;
    /// User labels for explicit trees, else empty.
    std::vector<std::string> labels;
};

/// Builds the lattice, kernels and tabulated payoff described by `config`.
Instance build_instance(const RunConfig& config);

ExerciseMask build_mask(const ExerciseConfig& exercise, int steps);

/// Stride for the dyadic study: 1 for american, 0 for european, the stride
/// for `every`. Throws ConfigError for explicit layer lists.
int exercise_stride(const ExerciseConfig& exercise);

} // namespace advsnell
