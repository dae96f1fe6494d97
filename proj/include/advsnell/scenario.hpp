#pragma once

// Finite scenario lattices (recombining) and trees together with the per-node
// kernel ambiguity sets that play the role of the family {P(t, omega)}.
//
// A node stands for a path class: everything that is known at its time layer.
// Kernels attached to a node are probability vectors over its children, listed
// in the node's fixed child order.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace advsnell {

using NodeId = std::uint32_t;

/// Layers t_0 = 0 < t_1 < ... < t_n = T.
struct TimeGrid {
    std::vector<double> times;

    static TimeGrid uniform(int steps, double horizon);

    int steps() const { return static_cast<int>(times.size()) - 1; }
    double horizon() const { return times.back(); }
    double dt(int layer) const { return times[layer + 1] - times[layer]; }

    /// Throws ModelError unless times start at 0 and are strictly increasing.
    void validate() const;
};

/// Per-layer exercise permission. The terminal layer is always exercisable.
class ExerciseMask {
public:
    ExerciseMask() = default;

    static ExerciseMask american(int steps);
    static ExerciseMask european(int steps);
    /// Exercise at layers 0, k, 2k, ... and at the terminal layer.
    static ExerciseMask every(int steps, int stride);
    static ExerciseMask from_layers(int steps, std::span<const int> layers);

    int steps() const { return static_cast<int>(allowed_.size()) - 1; }
    bool allows(int layer) const { return allowed_[layer] != 0; }
    int exercisable_count() const;
    /// True if every layer exercisable here is exercisable in `other`.
    bool subset_of(const ExerciseMask& other) const;
    std::vector<int> layers() const;

    void validate(int steps) const;

    friend bool operator==(const ExerciseMask&, const ExerciseMask&) = default;

private:
    explicit ExerciseMask(std::vector<char> allowed) : allowed_(std::move(allowed)) {}
    std::vector<char> allowed_;
};

enum class LatticeMode { tree, recombining };

const char* to_string(LatticeMode mode);

/// Path summaries carried by nodes so that path-dependent payoffs stay node
/// functionals. Running max is max_{s<=t} B_s and running sum is
/// sum_{j<=i} B_{t_j}, both of the first coordinate and including the root.
struct SummaryRule {
    bool running_max = false;
    bool running_sum = false;

    friend bool operator==(const SummaryRule&, const SummaryRule&) = default;
};

class LatticeBuilder;

/// Immutable layered DAG. Node ids are either deterministic preorder (tree
/// mode) or layer-major with lexicographic state order inside a layer
/// (recombining mode); in both cases a child's id exceeds its parent's.
class ScenarioLattice {
public:
    const TimeGrid& grid() const { return grid_; }
    LatticeMode mode() const { return mode_; }
    int dimension() const { return dim_; }
    const SummaryRule& summaries() const { return summaries_; }

    std::size_t size() const { return layer_.size(); }
    int steps() const { return grid_.steps(); }
    static constexpr NodeId root() { return 0; }

    int layer(NodeId id) const { return layer_[id]; }
    double time(NodeId id) const { return grid_.times[layer_[id]]; }
    std::span<const double> state(NodeId id) const {
        return {state_.data() + static_cast<std::size_t>(id) * dim_, static_cast<std::size_t>(dim_)};
    }
    /// First coordinate of the state.
    double level(NodeId id) const { return state_[static_cast<std::size_t>(id) * dim_]; }

    std::span<const NodeId> children(NodeId id) const {
        return {child_.data() + child_begin_[id], child_begin_[id + 1] - child_begin_[id]};
    }
    std::size_t child_count(NodeId id) const { return child_begin_[id + 1] - child_begin_[id]; }
    /// Increment of the canonical process along the k-th edge of `id`.
    std::span<const double> increment(NodeId id, std::size_t k) const {
        return {increment_.data() + (child_begin_[id] + k) * dim_, static_cast<std::size_t>(dim_)};
    }
    bool is_leaf(NodeId id) const { return child_begin_[id] == child_begin_[id + 1]; }

    std::span<const NodeId> layer_nodes(int layer) const { return layers_[layer]; }

    double running_max(NodeId id) const;
    double running_sum(NodeId id) const;

    /// Unique parent in tree mode; nullopt for the root or in recombining mode.
    std::optional<NodeId> parent(NodeId id) const;
    /// Root-to-node path (tree mode only).
    std::vector<NodeId> path_to(NodeId id) const;

    /// Re-checks every structural invariant; throws ModelError on violation.
    void validate() const;

private:
    friend class LatticeBuilder;

    TimeGrid grid_;
    LatticeMode mode_ = LatticeMode::tree;
    int dim_ = 1;
    SummaryRule summaries_;
    std::vector<int> layer_;
    std::vector<double> state_;
    std::vector<double> max_;
    std::vector<double> sum_;
    std::vector<std::size_t> child_begin_;
    std::vector<NodeId> child_;
    std::vector<double> increment_;
    std::vector<NodeId> parent_;
    std::vector<std::vector<NodeId>> layers_;
};

/// Assembles a lattice from nodes and edges. Nodes must be added in id order
/// and edges of one parent in child order.
class LatticeBuilder {
public:
    LatticeBuilder(TimeGrid grid, LatticeMode mode, int dimension, SummaryRule summaries = {});

    void reserve(std::size_t nodes, std::size_t edges);
    NodeId add_node(int layer, std::span<const double> state, double running_max = 0.0,
                    double running_sum = 0.0);
    void add_edge(NodeId parent, NodeId child, std::span<const double> increment);

    /// Validates and freezes. Throws ModelError on any invariant violation.
    ScenarioLattice finish() &&;

private:
    struct PendingEdge {
        NodeId parent;
        NodeId child;
    };
    ScenarioLattice lattice_;
    std::vector<PendingEdge> edges_;
    std::vector<double> edge_increments_;
};

/// One transition law over a node's children. `params` records the generating
/// parameters, e.g. {sigma} or {drift, sigma}; it is empty for explicit kernels.
struct Kernel {
    std::vector<double> probs;
    std::vector<double> params;
};

/// Per-node finite kernel families. Families are shared between nodes where
/// the ambiguity set does not depend on the node (G-lattices use one family).
class KernelSet {
public:
    KernelSet() = default;
    explicit KernelSet(std::size_t node_count);

    std::uint32_t add_family(std::vector<Kernel> family);
    void assign(NodeId id, std::uint32_t family);

    std::span<const Kernel> at(NodeId id) const;
    std::size_t count(NodeId id) const { return at(id).size(); }
    std::size_t node_count() const { return family_of_.size(); }
    std::size_t family_count() const { return families_.size(); }

    /// Children that carry positive mass under at least one kernel.
    std::vector<std::size_t> support_union(NodeId id) const;

    /// Throws ModelError unless every non-leaf node has a nonempty family of
    /// probability vectors of matching length (entries >= 0, sum within 1e-12).
    void validate(const ScenarioLattice& lattice) const;

    static constexpr std::uint32_t kNoFamily = 0xffffffffu;

private:
    std::vector<std::vector<Kernel>> families_;
    std::vector<std::uint32_t> family_of_;
};

/// Throws ModelError if `probs` is not a probability vector within 1e-12.
void check_probability_vector(std::span<const double> probs, const std::string& where);

struct Model {
    ScenarioLattice lattice;
    KernelSet kernels;
};

struct GLatticeSpec {
    int steps = 0;
    double horizon = 1.0;
    std::vector<double> sigmas;
    LatticeMode mode = LatticeMode::recombining;
    SummaryRule summaries;
};

/// Trinomial lattice with increments {+u, 0, -u}, u = sigma_max * sqrt(dt),
/// and for each sigma the kernel (p, 1 - 2p, p) with p = sigma^2 / (2 sigma_max^2).
Model build_g_lattice(const GLatticeSpec& spec);

struct RectangleSpec {
    int steps = 0;
    double horizon = 1.0;
    std::vector<double> drifts;
    std::vector<double> vols;
    /// Spatial step; defaults to sigma_max * sqrt(dt) + |b|_max * dt.
    std::optional<double> step;
    LatticeMode mode = LatticeMode::recombining;
    SummaryRule summaries;
};

/// Moment-matched trinomial kernels for every (drift, vol) pair: mean b*dt and
/// second moment sigma^2*dt + (b*dt)^2.
Model build_rectangle_lattice(const RectangleSpec& spec);

/// Probabilities (up, mid, down) of the moment-matched kernel for step u.
/// Throws ModelError naming (b, sigma) if they leave the simplex.
std::vector<double> rectangle_kernel(double drift, double vol, double dt, double u);

/// Explicit tree description. Node ids are user labels; the builder assigns
/// preorder ids starting at the root (the only node that is nobody's child).
struct TreeSpec {
    struct Edge {
        std::string child;
        std::vector<double> increment;
    };
    struct Node {
        std::string id;
        std::vector<Edge> children;
        std::vector<std::vector<double>> kernels;
        std::optional<double> payoff;
    };
    double horizon = 1.0;
    int dimension = 1;
    std::vector<Node> nodes;
};

struct TreeModel {
    Model model;
    /// Payoff per NodeId when every node of the spec carried one, else empty.
    std::vector<double> payoff;
    /// User label per NodeId.
    std::vector<std::string> labels;
};

TreeModel build_tree(const TreeSpec& spec);

// Moment diagnostic for E^P[ ||B^theta||_delta ] <= c * delta^alpha.

struct MomentOptions {
    double alpha = 0.5;
    double c = 1.0;
    /// Enumerate all policies when their number is at most this, else sample.
    std::size_t enumerate_limit = 64;
    std::size_t sampled_policies = 16;
    std::uint64_t seed = 1;
    /// Cap on (node, running-deviation) states per forward pass from one start layer.
    std::size_t max_states = 1'000'000;
};

struct MomentEntry {
    std::string policy;
    int start_layer = 0;
    int window_steps = 0;
    double delta = 0.0;
    double expectation = 0.0;
    double ratio = 0.0;  // expectation / delta^alpha
    bool within_bound = true;
};

struct MomentReport {
    std::vector<MomentEntry> entries;
    double worst_ratio = 0.0;
    bool all_within_bound = true;
    std::size_t skipped = 0;  // (start, window) pairs dropped by max_states
};

/// Exact expectation of the windowed sup-deviation for deterministic start
/// layers and all window lengths, under enumerated or sampled policies.
/// Reports failures instead of throwing.
MomentReport moment_diagnostic(const Model& model, const MomentOptions& options);

} // namespace advsnell
