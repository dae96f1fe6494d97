#include "advsnell/scenario.hpp"

#include "advsnell/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <tuple>
#include <unordered_map>

namespace advsnell {

namespace {

constexpr double kProbTolerance = 1e-12;
constexpr std::size_t kMaxTreeNodes = 2'000'000;

std::string describe_params(double b, double sigma) {
    std::ostringstream os;
    os << "(b=" << b << ", sigma=" << sigma << ")";
    return os.str();
}

} // namespace

// ---------------------------------------------------------------------------
// TimeGrid / ExerciseMask

TimeGrid TimeGrid::uniform(int steps, double horizon) {
    if (steps <= 0) throw ModelError("time grid needs at least one step");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ModelError("horizon must be positive and finite");
    TimeGrid grid;
    grid.times.resize(static_cast<std::size_t>(steps) + 1);
    for (int i = 0; i <= steps; ++i) grid.times[i] = horizon * static_cast<double>(i) / steps;
    grid.times.back() = horizon;
    return grid;
}

void TimeGrid::validate() const {
    if (times.size() < 2) throw ModelError("time grid needs at least one step");
    if (times.front() != 0.0) throw ModelError("time grid must start at 0");
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (!(times[i] > times[i - 1])) throw ModelError("time grid must be strictly increasing");
    }
}

namespace {
void check_steps(int steps) {
    if (steps <= 0) throw ConfigError("exercise mask needs a positive step count");
}
} // namespace

ExerciseMask ExerciseMask::american(int steps) {
    check_steps(steps);
    return ExerciseMask(std::vector<char>(static_cast<std::size_t>(steps) + 1, 1));
}

ExerciseMask ExerciseMask::european(int steps) {
    check_steps(steps);
    std::vector<char> allowed(static_cast<std::size_t>(steps) + 1, 0);
    allowed.back() = 1;
    return ExerciseMask(std::move(allowed));
}

ExerciseMask ExerciseMask::every(int steps, int stride) {
    check_steps(steps);
    if (stride <= 0) throw ConfigError("exercise stride must be positive");
    std::vector<char> allowed(static_cast<std::size_t>(steps) + 1, 0);
    for (int i = 0; i <= steps; i += stride) allowed[i] = 1;
    allowed.back() = 1;
    return ExerciseMask(std::move(allowed));
}

ExerciseMask ExerciseMask::from_layers(int steps, std::span<const int> layers) {
    check_steps(steps);
    std::vector<char> allowed(static_cast<std::size_t>(steps) + 1, 0);
    for (int layer : layers) {
        if (layer < 0 || layer > steps) throw ConfigError("exercise layer out of range");
        allowed[layer] = 1;
    }
    return ExerciseMask(std::move(allowed));
}

int ExerciseMask::exercisable_count() const {
    return static_cast<int>(std::count(allowed_.begin(), allowed_.end(), 1));
}

bool ExerciseMask::subset_of(const ExerciseMask& other) const {
    if (allowed_.size() != other.allowed_.size()) return false;
    for (std::size_t i = 0; i < allowed_.size(); ++i) {
        if (allowed_[i] && !other.allowed_[i]) return false;
    }
    return true;
}

std::vector<int> ExerciseMask::layers() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < allowed_.size(); ++i) {
        if (allowed_[i]) out.push_back(static_cast<int>(i));
    }
    return out;
}

void ExerciseMask::validate(int steps) const {
    if (this->steps() != steps) throw ConfigError("exercise mask length does not match the lattice");
    if (exercisable_count() == 0) throw ConfigError("exercise mask has no exercisable layer");
    if (!allowed_.back()) throw ConfigError("exercise mask must allow the terminal layer");
}

const char* to_string(LatticeMode mode) {
    return mode == LatticeMode::tree ? "tree" : "recombining";
}

// ---------------------------------------------------------------------------
// ScenarioLattice

double ScenarioLattice::running_max(NodeId id) const {
    if (!summaries_.running_max) throw ConfigError("lattice carries no running-max summary");
    return max_[id];
}

double ScenarioLattice::running_sum(NodeId id) const {
    if (!summaries_.running_sum) throw ConfigError("lattice carries no running-sum summary");
    return sum_[id];
}

std::optional<NodeId> ScenarioLattice::parent(NodeId id) const {
    if (mode_ != LatticeMode::tree || id == root()) return std::nullopt;
    return parent_[id];
}

std::vector<NodeId> ScenarioLattice::path_to(NodeId id) const {
    if (mode_ != LatticeMode::tree) throw ModelError("paths are unique only in tree mode");
    std::vector<NodeId> path{id};
    while (path.back() != root()) path.push_back(parent_[path.back()]);
    std::reverse(path.begin(), path.end());
    return path;
}

void ScenarioLattice::validate() const {
    grid_.validate();
    const std::size_t n = size();
    if (n == 0) throw ModelError("lattice has no nodes");
    if (layer_[0] != 0) throw ModelError("root must sit at layer 0");
    for (int k = 0; k < dim_; ++k) {
        if (state_[k] != 0.0) throw ModelError("root state must be 0");
    }
    const int steps = grid_.steps();
    std::vector<int> parent_count(n, 0);
    for (NodeId id = 0; id < n; ++id) {
        const int layer = layer_[id];
        if (layer < 0 || layer > steps) throw ModelError("node layer outside the time grid");
        if (layer < steps && is_leaf(id)) {
            throw ModelError("node " + std::to_string(id) + " before the horizon has no children");
        }
        if (layer == steps && !is_leaf(id)) throw ModelError("terminal-layer node has children");
        const auto kids = children(id);
        for (std::size_t k = 0; k < kids.size(); ++k) {
            const NodeId c = kids[k];
            if (c >= n) throw ModelError("edge points to an unknown node");
            if (c <= id) throw ModelError("child ids must exceed parent ids");
            if (layer_[c] != layer + 1) throw ModelError("child layer must be parent layer + 1");
            ++parent_count[c];
            const auto inc = increment(id, k);
            const auto ps = state(id);
            const auto cs = state(c);
            for (int j = 0; j < dim_; ++j) {
                const double expect = ps[j] + inc[j];
                const double scale = std::max({1.0, std::abs(ps[j]), std::abs(cs[j])});
                if (std::abs(cs[j] - expect) > 1e-9 * scale) {
                    throw ModelError("child state differs from parent state + increment at node " +
                                     std::to_string(id));
                }
            }
            if (summaries_.running_max) {
                const double expect = std::max(max_[id], cs[0]);
                if (std::abs(max_[c] - expect) > 1e-9 * std::max(1.0, std::abs(expect))) {
                    throw ModelError("running-max summary inconsistent at node " + std::to_string(c));
                }
            }
            if (summaries_.running_sum) {
                const double expect = sum_[id] + cs[0];
                if (std::abs(sum_[c] - expect) > 1e-9 * std::max(1.0, std::abs(expect))) {
                    throw ModelError("running-sum summary inconsistent at node " + std::to_string(c));
                }
            }
        }
    }
    for (NodeId id = 1; id < n; ++id) {
        if (parent_count[id] == 0) throw ModelError("node " + std::to_string(id) + " is unreachable");
        if (mode_ == LatticeMode::tree && parent_count[id] != 1) {
            throw ModelError("tree node " + std::to_string(id) + " has more than one parent");
        }
    }
}

// ---------------------------------------------------------------------------
// LatticeBuilder

LatticeBuilder::LatticeBuilder(TimeGrid grid, LatticeMode mode, int dimension, SummaryRule summaries) {
    grid.validate();
    if (dimension < 1) throw ModelError("dimension must be at least 1");
    lattice_.grid_ = std::move(grid);
    lattice_.mode_ = mode;
    lattice_.dim_ = dimension;
    lattice_.summaries_ = summaries;
}

void LatticeBuilder::reserve(std::size_t nodes, std::size_t edges) {
    lattice_.layer_.reserve(nodes);
    lattice_.state_.reserve(nodes * lattice_.dim_);
    edges_.reserve(edges);
    edge_increments_.reserve(edges * lattice_.dim_);
}

NodeId LatticeBuilder::add_node(int layer, std::span<const double> state, double running_max,
                                double running_sum) {
    if (static_cast<int>(state.size()) != lattice_.dim_) throw ModelError("state has the wrong dimension");
    const auto id = static_cast<NodeId>(lattice_.layer_.size());
    lattice_.layer_.push_back(layer);
    lattice_.state_.insert(lattice_.state_.end(), state.begin(), state.end());
    if (lattice_.summaries_.running_max) lattice_.max_.push_back(running_max);
    if (lattice_.summaries_.running_sum) lattice_.sum_.push_back(running_sum);
    return id;
}

void LatticeBuilder::add_edge(NodeId parent, NodeId child, std::span<const double> increment) {
    if (static_cast<int>(increment.size()) != lattice_.dim_) {
        throw ModelError("increment has the wrong dimension");
    }
    if (!edges_.empty() && edges_.back().parent > parent) {
        throw ModelError("edges must be added in parent order");
    }
    edges_.push_back({parent, child});
    edge_increments_.insert(edge_increments_.end(), increment.begin(), increment.end());
}

ScenarioLattice LatticeBuilder::finish() && {
    auto& L = lattice_;
    const std::size_t n = L.layer_.size();
    L.child_begin_.assign(n + 1, 0);
    for (const auto& e : edges_) {
        if (e.parent >= n || e.child >= n) throw ModelError("edge refers to an unknown node");
        ++L.child_begin_[e.parent + 1];
    }
    std::partial_sum(L.child_begin_.begin(), L.child_begin_.end(), L.child_begin_.begin());
    L.child_.resize(edges_.size());
    for (std::size_t i = 0; i < edges_.size(); ++i) L.child_[i] = edges_[i].child;
    L.increment_ = std::move(edge_increments_);

    if (L.mode_ == LatticeMode::tree) {
        L.parent_.assign(n, 0);
        for (const auto& e : edges_) L.parent_[e.child] = e.parent;
    }
    L.layers_.assign(static_cast<std::size_t>(L.grid_.steps()) + 1, {});
    for (NodeId id = 0; id < n; ++id) {
        const int layer = L.layer_[id];
        if (layer < 0 || layer > L.grid_.steps()) throw ModelError("node layer outside the time grid");
        L.layers_[layer].push_back(id);
    }
    edges_.clear();
    L.validate();
    return std::move(L);
}

// ---------------------------------------------------------------------------
// KernelSet

void check_probability_vector(std::span<const double> probs, const std::string& where) {
    double total = 0.0;
    for (double p : probs) {
        if (!std::isfinite(p) || p < 0.0) throw ModelError("kernel has a negative or non-finite entry at " + where);
        total += p;
    }
    if (std::abs(total - 1.0) > kProbTolerance) throw ModelError("kernel does not sum to 1 at " + where);
}

KernelSet::KernelSet(std::size_t node_count) : family_of_(node_count, kNoFamily) {}

std::uint32_t KernelSet::add_family(std::vector<Kernel> family) {
    families_.push_back(std::move(family));
    return static_cast<std::uint32_t>(families_.size() - 1);
}

void KernelSet::assign(NodeId id, std::uint32_t family) {
    if (family >= families_.size()) throw ModelError("unknown kernel family");
    family_of_.at(id) = family;
}

std::span<const Kernel> KernelSet::at(NodeId id) const {
    const auto f = family_of_.at(id);
    if (f == kNoFamily) return {};
    return families_[f];
}

std::vector<std::size_t> KernelSet::support_union(NodeId id) const {
    const auto family = at(id);
    if (family.empty()) return {};
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < family.front().probs.size(); ++c) {
        for (const auto& k : family) {
            if (k.probs[c] > 0.0) {
                out.push_back(c);
                break;
            }
        }
    }
    return out;
}

void KernelSet::validate(const ScenarioLattice& lattice) const {
    if (family_of_.size() != lattice.size()) throw ModelError("kernel set does not cover the lattice");
    for (NodeId id = 0; id < lattice.size(); ++id) {
        if (lattice.is_leaf(id)) continue;
        const auto family = at(id);
        const std::string where = "node " + std::to_string(id);
        if (family.empty()) throw ModelError("no kernel attached to " + where);
        for (const auto& k : family) {
            if (k.probs.size() != lattice.child_count(id)) {
                throw ModelError("kernel length does not match the child count at " + where);
            }
            check_probability_vector(k.probs, where);
        }
    }
}

// ---------------------------------------------------------------------------
// Trinomial builders

namespace {

struct TrinomialKey {
    int k;      // state index: B = k * u
    int m;      // running-max index
    long long s;  // running-sum index

    friend bool operator<(const TrinomialKey& a, const TrinomialKey& b) {
        return std::tie(a.k, a.m, a.s) < std::tie(b.k, b.m, b.s);
    }
    friend bool operator==(const TrinomialKey&, const TrinomialKey&) = default;
};

constexpr int kMoves[3] = {+1, 0, -1};

ScenarioLattice expand_recombining_plain(int steps, double horizon, double u) {
    LatticeBuilder builder(TimeGrid::uniform(steps, horizon), LatticeMode::recombining, 1);
    const std::size_t nodes = static_cast<std::size_t>(steps + 1) * (steps + 1);
    builder.reserve(nodes, 3 * (nodes - 2 * steps - 1));
    for (int i = 0; i <= steps; ++i) {
        for (int k = -i; k <= i; ++k) {
            const double s = k * u;
            builder.add_node(i, std::span(&s, 1));
        }
    }
    // Layer i starts at id i*i; state index k sits at offset k + i.
    for (int i = 0; i < steps; ++i) {
        const NodeId begin = static_cast<NodeId>(i) * i;
        const NodeId next = static_cast<NodeId>(i + 1) * (i + 1);
        for (int k = -i; k <= i; ++k) {
            const NodeId id = begin + static_cast<NodeId>(k + i);
            for (int mv : kMoves) {
                const double inc = mv * u;
                builder.add_edge(id, next + static_cast<NodeId>(k + mv + i + 1), std::span(&inc, 1));
            }
        }
    }
    return std::move(builder).finish();
}

ScenarioLattice expand_recombining_summaries(int steps, double horizon, double u, SummaryRule summaries) {
    LatticeBuilder builder(TimeGrid::uniform(steps, horizon), LatticeMode::recombining, 1, summaries);
    auto key_of_child = [&](const TrinomialKey& parent, int mv) {
        TrinomialKey child{parent.k + mv, 0, 0};
        if (summaries.running_max) child.m = std::max(parent.m, child.k);
        if (summaries.running_sum) child.s = parent.s + child.k;
        return child;
    };
    std::vector<TrinomialKey> layer_keys{TrinomialKey{0, 0, 0}};
    std::vector<std::vector<TrinomialKey>> all_layers{layer_keys};
    std::size_t total = 1;
    for (int i = 0; i < steps; ++i) {
        std::vector<TrinomialKey> next;
        next.reserve(layer_keys.size() * 3);
        for (const auto& key : layer_keys) {
            for (int mv : kMoves) next.push_back(key_of_child(key, mv));
        }
        std::sort(next.begin(), next.end());
        next.erase(std::unique(next.begin(), next.end()), next.end());
        total += next.size();
        if (total > kMaxTreeNodes) throw ModelError("summary lattice exceeds the node cap");
        all_layers.push_back(next);
        layer_keys = std::move(next);
    }
    std::vector<NodeId> layer_begin;
    for (int i = 0; i <= steps; ++i) {
        for (const auto& key : all_layers[i]) {
            const double s = key.k * u;
            const NodeId id = builder.add_node(i, std::span(&s, 1), key.m * u, static_cast<double>(key.s) * u);
            if (&key == &all_layers[i].front()) layer_begin.push_back(id);
        }
    }
    for (int i = 0; i < steps; ++i) {
        const auto& next = all_layers[i + 1];
        for (std::size_t j = 0; j < all_layers[i].size(); ++j) {
            const NodeId id = layer_begin[i] + static_cast<NodeId>(j);
            for (int mv : kMoves) {
                const auto child = key_of_child(all_layers[i][j], mv);
                const auto pos = std::lower_bound(next.begin(), next.end(), child) - next.begin();
                const double inc = mv * u;
                builder.add_edge(id, layer_begin[i + 1] + static_cast<NodeId>(pos), std::span(&inc, 1));
            }
        }
    }
    return std::move(builder).finish();
}

ScenarioLattice expand_tree(int steps, double horizon, double u, SummaryRule summaries) {
    double count = 0.0;
    for (int i = 0; i <= steps; ++i) count += std::pow(3.0, i);
    if (count > static_cast<double>(kMaxTreeNodes)) throw ModelError("trinomial tree exceeds the node cap");
    // Preorder numbering, children visited in (up, mid, down) order.
    LatticeBuilder real(TimeGrid::uniform(steps, horizon), LatticeMode::tree, 1, summaries);
    std::vector<std::tuple<NodeId, NodeId, double>> edge_list;
    struct Walker {
        LatticeBuilder& b;
        std::vector<std::tuple<NodeId, NodeId, double>>& edges;
        int steps;
        double u;
        NodeId visit(int layer, int k, int m, long long s) {
            const double state = k * u;
            const NodeId id = b.add_node(layer, std::span(&state, 1), m * u, static_cast<double>(s) * u);
            if (layer == steps) return id;
            for (int mv : kMoves) {
                const int ck = k + mv;
                const NodeId child = visit(layer + 1, ck, std::max(m, ck), s + ck);
                edges.emplace_back(id, child, mv * u);
            }
            return id;
        }
    };
    Walker walker{real, edge_list, steps, u};
    walker.visit(0, 0, 0, 0);
    std::stable_sort(edge_list.begin(), edge_list.end(),
                     [](const auto& a, const auto& b) { return std::get<0>(a) < std::get<0>(b); });
    for (const auto& [p, c, inc] : edge_list) real.add_edge(p, c, std::span(&inc, 1));
    return std::move(real).finish();
}

ScenarioLattice expand_trinomial(int steps, double horizon, double u, LatticeMode mode, SummaryRule summaries) {
    if (mode == LatticeMode::tree) return expand_tree(steps, horizon, u, summaries);
    if (!summaries.running_max && !summaries.running_sum) return expand_recombining_plain(steps, horizon, u);
    return expand_recombining_summaries(steps, horizon, u, summaries);
}

Model attach_uniform_family(ScenarioLattice lattice, std::vector<Kernel> family) {
    KernelSet kernels(lattice.size());
    const auto f = kernels.add_family(std::move(family));
    for (NodeId id = 0; id < lattice.size(); ++id) {
        if (!lattice.is_leaf(id)) kernels.assign(id, f);
    }
    kernels.validate(lattice);
    return Model{std::move(lattice), std::move(kernels)};
}

} // namespace

Model build_g_lattice(const GLatticeSpec& spec) {
    if (spec.steps <= 0) throw ModelError("G-lattice needs n >= 1 steps");
    if (spec.sigmas.empty()) throw ModelError("sigma set must be nonempty");
    double sigma_max = 0.0;
    for (double s : spec.sigmas) {
        if (!(s >= 0.0) || !std::isfinite(s)) throw ModelError("sigma values must be finite and >= 0");
        sigma_max = std::max(sigma_max, s);
    }
    if (!(sigma_max > 0.0)) throw ModelError("sigma_max must be positive");
    const double dt = spec.horizon / spec.steps;
    const double u = sigma_max * std::sqrt(dt);
    std::vector<Kernel> family;
    for (double s : spec.sigmas) {
        const double p = s * s / (2.0 * sigma_max * sigma_max);
        if (p > 0.5) throw ModelError("sigma " + std::to_string(s) + " exceeds sigma_max");
        family.push_back(Kernel{{p, 1.0 - 2.0 * p, p}, {s}});
    }
    return attach_uniform_family(expand_trinomial(spec.steps, spec.horizon, u, spec.mode, spec.summaries),
                                 std::move(family));
}

std::vector<double> rectangle_kernel(double drift, double vol, double dt, double u) {
    const double m = drift * dt;
    const double s = vol * vol * dt;
    const double denom = 2.0 * u * u;
    const double up = (s + m * m + m * u) / denom;
    const double down = (s + m * m - m * u) / denom;
    const double mid = 1.0 - up - down;
    if (up < 0.0 || down < 0.0 || mid < 0.0 || up > 1.0 || down > 1.0) {
        throw ModelError("no admissible kernel for " + describe_params(drift, vol) + " with step u = " +
                         std::to_string(u));
    }
    return {up, mid, down};
}

Model build_rectangle_lattice(const RectangleSpec& spec) {
    if (spec.steps <= 0) throw ModelError("rectangle lattice needs n >= 1 steps");
    if (spec.drifts.empty() || spec.vols.empty()) throw ModelError("drift and volatility grids must be nonempty");
    double vol_max = 0.0;
    double drift_max = 0.0;
    for (double v : spec.vols) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ModelError("volatility points must be positive");
        vol_max = std::max(vol_max, v);
    }
    for (double b : spec.drifts) {
        if (!std::isfinite(b)) throw ModelError("drift points must be finite");
        drift_max = std::max(drift_max, std::abs(b));
    }
    const double dt = spec.horizon / spec.steps;
    const double u = spec.step.value_or(vol_max * std::sqrt(dt) + drift_max * dt);
    if (!(u > 0.0)) throw ModelError("lattice step must be positive");
    std::vector<Kernel> family;
    for (double b : spec.drifts) {
        for (double v : spec.vols) family.push_back(Kernel{rectangle_kernel(b, v, dt, u), {b, v}});
    }
    return attach_uniform_family(expand_trinomial(spec.steps, spec.horizon, u, spec.mode, spec.summaries),
                                 std::move(family));
}

// ---------------------------------------------------------------------------
// Explicit trees

TreeModel build_tree(const TreeSpec& spec) {
    if (spec.nodes.empty()) throw ModelError("tree spec has no nodes");
    if (spec.dimension < 1) throw ModelError("dimension must be at least 1");
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < spec.nodes.size(); ++i) {
        if (!index.emplace(spec.nodes[i].id, i).second) {
            throw ModelError("duplicate node id '" + spec.nodes[i].id + "'");
        }
    }
    std::vector<int> parents(spec.nodes.size(), 0);
    for (const auto& node : spec.nodes) {
        for (const auto& e : node.children) {
            const auto it = index.find(e.child);
            if (it == index.end()) throw ModelError("edge to unknown node '" + e.child + "'");
            ++parents[it->second];
        }
    }
    std::optional<std::size_t> root;
    for (std::size_t i = 0; i < spec.nodes.size(); ++i) {
        if (parents[i] > 1) throw ModelError("node '" + spec.nodes[i].id + "' has more than one parent");
        if (parents[i] == 0) {
            if (root) throw ModelError("tree spec has more than one root");
            root = i;
        }
    }
    if (!root) throw ModelError("tree spec has no root");

    // Depth of every node, and the common leaf depth n.
    std::vector<int> depth(spec.nodes.size(), -1);
    std::vector<std::size_t> order{*root};
    depth[*root] = 0;
    int steps = -1;
    for (std::size_t head = 0; head < order.size(); ++head) {
        const auto& node = spec.nodes[order[head]];
        if (node.children.empty()) {
            if (steps >= 0 && steps != depth[order[head]]) throw ModelError("all leaves must share one depth");
            steps = depth[order[head]];
        }
        for (const auto& e : node.children) {
            const auto c = index.at(e.child);
            depth[c] = depth[order[head]] + 1;
            order.push_back(c);
        }
    }
    if (order.size() != spec.nodes.size()) throw ModelError("tree spec contains unreachable nodes");
    if (steps <= 0) throw ModelError("tree needs at least one step");

    const int dim = spec.dimension;
    LatticeBuilder builder(TimeGrid::uniform(steps, spec.horizon), LatticeMode::tree, dim);
    TreeModel out;
    std::vector<NodeId> assigned(spec.nodes.size(), 0);
    std::vector<std::size_t> spec_of;  // NodeId -> spec index
    std::vector<std::tuple<NodeId, NodeId, std::vector<double>>> edges;

    struct Walker {
        const TreeSpec& spec;
        const std::unordered_map<std::string, std::size_t>& index;
        LatticeBuilder& builder;
        std::vector<std::size_t>& spec_of;
        std::vector<std::tuple<NodeId, NodeId, std::vector<double>>>& edges;
        int dim;
        NodeId visit(std::size_t i, int layer, const std::vector<double>& state) {
            const NodeId id = builder.add_node(layer, state);
            spec_of.push_back(i);
            for (const auto& e : spec.nodes[i].children) {
                if (static_cast<int>(e.increment.size()) != dim) {
                    throw ModelError("increment dimension mismatch on edge to '" + e.child + "'");
                }
                std::vector<double> next = state;
                for (int j = 0; j < dim; ++j) next[j] += e.increment[j];
                const NodeId child = visit(index.at(e.child), layer + 1, next);
                edges.emplace_back(id, child, e.increment);
            }
            return id;
        }
    };
    Walker walker{spec, index, builder, spec_of, edges, dim};
    walker.visit(*root, 0, std::vector<double>(dim, 0.0));
    std::stable_sort(edges.begin(), edges.end(),
                     [](const auto& a, const auto& b) { return std::get<0>(a) < std::get<0>(b); });
    for (const auto& [p, c, inc] : edges) builder.add_edge(p, c, inc);
    auto lattice = std::move(builder).finish();

    KernelSet kernels(lattice.size());
    bool all_payoffs = true;
    for (NodeId id = 0; id < lattice.size(); ++id) {
        const auto& node = spec.nodes[spec_of[id]];
        out.labels.push_back(node.id);
        all_payoffs = all_payoffs && node.payoff.has_value();
        if (node.children.empty()) {
            if (!node.kernels.empty()) throw ModelError("leaf '" + node.id + "' must not carry kernels");
            continue;
        }
        if (node.kernels.empty()) throw ModelError("node '" + node.id + "' has no kernels");
        std::vector<Kernel> family;
        for (const auto& probs : node.kernels) {
            if (probs.size() != node.children.size()) {
                throw ModelError("kernel length does not match the child count at '" + node.id + "'");
            }
            check_probability_vector(probs, "'" + node.id + "'");
            family.push_back(Kernel{probs, {}});
        }
        kernels.assign(id, kernels.add_family(std::move(family)));
    }
    kernels.validate(lattice);
    if (all_payoffs) {
        for (NodeId id = 0; id < lattice.size(); ++id) out.payoff.push_back(*spec.nodes[spec_of[id]].payoff);
    }
    out.model = Model{std::move(lattice), std::move(kernels)};
    return out;
}

// ---------------------------------------------------------------------------
// Moment diagnostic

namespace {

double euclidean(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

struct DevState {
    NodeId node;
    double dev;
    double prob;
};

/// E^P[ max_{j<=k} |B_{theta+j} - B_theta| ] for deterministic theta = start_layer
/// and every window k = 1..max_window, from one forward pass per anchor node.
std::optional<std::vector<double>> windowed_deviations(const Model& model, const std::vector<std::uint32_t>& policy,
                                                       const std::vector<double>& reach, int start_layer,
                                                       int max_window, std::size_t max_states) {
    const auto& L = model.lattice;
    std::vector<double> total(static_cast<std::size_t>(max_window), 0.0);
    std::size_t states = 0;
    for (NodeId anchor : L.layer_nodes(start_layer)) {
        if (reach[anchor] == 0.0) continue;
        std::vector<DevState> current{{anchor, 0.0, 1.0}};
        std::vector<DevState> next;
        for (int step = 0; step < max_window; ++step) {
            next.clear();
            for (const auto& st : current) {
                const auto& k = model.kernels.at(st.node)[policy[st.node]];
                const auto kids = L.children(st.node);
                for (std::size_t c = 0; c < kids.size(); ++c) {
                    if (k.probs[c] == 0.0) continue;
                    const double d = std::max(st.dev, euclidean(L.state(kids[c]), L.state(anchor)));
                    next.push_back({kids[c], d, st.prob * k.probs[c]});
                }
            }
            // Merge equal (node, dev) states; stable order keeps the sums deterministic.
            std::stable_sort(next.begin(), next.end(), [](const DevState& x, const DevState& y) {
                return x.node != y.node ? x.node < y.node : x.dev < y.dev;
            });
            std::size_t w = 0;
            for (std::size_t r = 0; r < next.size(); ++r) {
                if (w > 0 && next[w - 1].node == next[r].node && next[w - 1].dev == next[r].dev) {
                    next[w - 1].prob += next[r].prob;
                } else {
                    next[w++] = next[r];
                }
            }
            next.resize(w);
            states += next.size();
            if (states > max_states) return std::nullopt;
            std::swap(current, next);
            double local = 0.0;
            for (const auto& st : current) local += st.prob * st.dev;
            total[static_cast<std::size_t>(step)] += reach[anchor] * local;
        }
    }
    return total;
}

std::vector<double> reach_probabilities(const Model& model, const std::vector<std::uint32_t>& policy) {
    const auto& L = model.lattice;
    std::vector<double> reach(L.size(), 0.0);
    reach[ScenarioLattice::root()] = 1.0;
    for (NodeId id = 0; id < L.size(); ++id) {
        if (L.is_leaf(id) || reach[id] == 0.0) continue;
        const auto& k = model.kernels.at(id)[policy[id]];
        const auto kids = L.children(id);
        for (std::size_t c = 0; c < kids.size(); ++c) reach[kids[c]] += reach[id] * k.probs[c];
    }
    return reach;
}

} // namespace

MomentReport moment_diagnostic(const Model& model, const MomentOptions& options) {
    if (!(options.alpha > 0.0) || !(options.c > 0.0)) throw ConfigError("moment diagnostic needs alpha, c > 0");
    const auto& L = model.lattice;
    std::vector<std::pair<std::string, std::vector<std::uint32_t>>> policies;

    double combos = 1.0;
    std::vector<NodeId> decision_nodes;
    for (NodeId id = 0; id < L.size(); ++id) {
        if (L.is_leaf(id)) continue;
        const auto count = model.kernels.count(id);
        if (count > 1) decision_nodes.push_back(id);
        combos *= static_cast<double>(count);
    }
    if (combos <= static_cast<double>(options.enumerate_limit)) {
        std::vector<std::uint32_t> choice(L.size(), 0);
        for (std::size_t index = 0;; ++index) {
            policies.emplace_back("enumerated#" + std::to_string(index), choice);
            std::size_t pos = 0;
            while (pos < decision_nodes.size()) {
                const NodeId id = decision_nodes[pos];
                if (++choice[id] < model.kernels.count(id)) break;
                choice[id] = 0;
                ++pos;
            }
            if (pos == decision_nodes.size()) break;
        }
    } else {
        std::size_t max_family = 1;
        for (NodeId id : decision_nodes) max_family = std::max(max_family, model.kernels.count(id));
        for (std::size_t j = 0; j < max_family; ++j) {
            std::vector<std::uint32_t> choice(L.size(), 0);
            for (NodeId id : decision_nodes) {
                choice[id] = static_cast<std::uint32_t>(std::min(j, model.kernels.count(id) - 1));
            }
            policies.emplace_back("constant#" + std::to_string(j), std::move(choice));
        }
        std::mt19937_64 rng(options.seed);
        for (std::size_t s = 0; s < options.sampled_policies; ++s) {
            std::vector<std::uint32_t> choice(L.size(), 0);
            for (NodeId id : decision_nodes) choice[id] = static_cast<std::uint32_t>(rng() % model.kernels.count(id));
            policies.emplace_back("sampled#" + std::to_string(s), std::move(choice));
        }
    }

    MomentReport report;
    const int steps = L.steps();
    for (const auto& [label, choice] : policies) {
        const auto reach = reach_probabilities(model, choice);
        for (int theta = 0; theta < steps; ++theta) {
            const auto values = windowed_deviations(model, choice, reach, theta, steps - theta, options.max_states);
            if (!values) {
                report.skipped += static_cast<std::size_t>(steps - theta);
                continue;
            }
            for (int window = 1; theta + window <= steps; ++window) {
                const double* value = &(*values)[static_cast<std::size_t>(window - 1)];
                MomentEntry e;
                e.policy = label;
                e.start_layer = theta;
                e.window_steps = window;
                e.delta = L.grid().times[theta + window] - L.grid().times[theta];
                e.expectation = *value;
                e.ratio = *value / std::pow(e.delta, options.alpha);
                e.within_bound = *value <= options.c * std::pow(e.delta, options.alpha);
                report.worst_ratio = std::max(report.worst_ratio, e.ratio);
                report.all_within_bound = report.all_within_bound && e.within_bound;
                report.entries.push_back(std::move(e));
            }
        }
    }
    return report;
}

} // namespace advsnell
