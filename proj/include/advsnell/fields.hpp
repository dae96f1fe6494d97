#pragma once

// Node-indexed objects shared by the solver modules: value fields, stopping
// rules and control policies. All are adapted by construction because they
// attach one entry to each node.

#include "advsnell/scenario.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace advsnell {

/// Real values indexed by NodeId.
class ValueField {
public:
    ValueField() = default;
    explicit ValueField(std::size_t nodes, double fill = 0.0) : values_(nodes, fill) {}
    explicit ValueField(std::vector<double> values) : values_(std::move(values)) {}

    double operator[](NodeId id) const { return values_[id]; }
    double& operator[](NodeId id) { return values_[id]; }
    std::size_t size() const { return values_.size(); }
    const std::vector<double>& values() const { return values_; }

    friend bool operator==(const ValueField&, const ValueField&) = default;

private:
    std::vector<double> values_;
};

/// Node-attached stop/continue decisions. The induced stopping time of a path
/// is the first node on it whose decision is `stop`; decisions below that node
/// are irrelevant for the path.
class StoppingRule {
public:
    StoppingRule() = default;
    explicit StoppingRule(std::size_t nodes, bool stop = false) : stop_(nodes, stop ? 1 : 0) {}

    bool stops(NodeId id) const { return stop_[id] != 0; }
    void set(NodeId id, bool stop) { stop_[id] = stop ? 1 : 0; }
    std::size_t size() const { return stop_.size(); }
    std::size_t stop_count() const;

    /// Forces stop at every leaf.
    static StoppingRule terminal(const ScenarioLattice& lattice);
    static StoppingRule at_root(const ScenarioLattice& lattice);

    /// Throws ModelError if a leaf continues or a stop sits on a layer the mask forbids.
    void validate(const ScenarioLattice& lattice, const ExerciseMask& mask) const;
    /// Throws ModelError if a leaf continues.
    void validate_terminal(const ScenarioLattice& lattice) const;

    /// Nodes reached by some root path before the rule has stopped, i.e. the
    /// node itself and all its predecessors on that path continue.
    std::vector<char> before_stop(const ScenarioLattice& lattice) const;
    /// Nodes where the induced stopping time can take effect: reached by a
    /// path that has not stopped earlier, and stopping here.
    std::vector<char> effective_stops(const ScenarioLattice& lattice) const;

    friend bool operator==(const StoppingRule&, const StoppingRule&) = default;

private:
    std::vector<char> stop_;
};

/// Kernel index chosen at every node; entries at leaves are ignored.
class ControlPolicy {
public:
    ControlPolicy() = default;
    ControlPolicy(std::vector<std::uint32_t> choice, std::string label)
        : choice_(std::move(choice)), label_(std::move(label)) {}

    std::uint32_t operator[](NodeId id) const { return choice_[id]; }
    std::uint32_t& operator[](NodeId id) { return choice_[id]; }
    std::size_t size() const { return choice_.size(); }
    const std::string& label() const { return label_; }
    const std::vector<std::uint32_t>& choices() const { return choice_; }

    static ControlPolicy constant(const Model& model, std::uint32_t index, std::string label);

    /// Throws ModelError if an index is out of range at some non-leaf node.
    void validate(const Model& model) const;

    friend bool operator==(const ControlPolicy& a, const ControlPolicy& b) { return a.choice_ == b.choice_; }

private:
    std::vector<std::uint32_t> choice_;
    std::string label_;
};

} // namespace advsnell
