#ifndef ACLEARN_CIRCUIT_HPP
#define ACLEARN_CIRCUIT_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "aclearn/types.hpp"

namespace aclearn {

enum class NodeKind : std::uint8_t { Sum, Product, Indicator, Parameter };

const char* to_string(NodeKind kind);

// One node of the arena. Indicator nodes use (var, value); Parameter nodes use
// (dist, value, weight) and record the variable that owns the distribution.
struct CircuitNode {
    NodeKind kind = NodeKind::Sum;
    bool live = true;
    VarId var = 0;
    DistId dist = 0;
    ValueIndex value = 0;
    double weight = 0.0;
    std::vector<NodeId> children;

    bool is_leaf() const { return kind == NodeKind::Indicator || kind == NodeKind::Parameter; }
};

// Per (variable, value) indicator settings. All ones for a variable sums it
// out; exactly one set observes it.
class EvidenceVector {
public:
    // Starts with every variable summed out.
    explicit EvidenceVector(std::span<const std::uint32_t> arities);

    static EvidenceVector all_ones(std::span<const std::uint32_t> arities);
    static EvidenceVector from_assignment(std::span<const std::uint32_t> arities,
                                          std::span<const ValueIndex> assignment);

    void observe(VarId var, ValueIndex value);
    void sum_out(VarId var);
    void set(VarId var, ValueIndex value, bool on);
    bool get(VarId var, ValueIndex value) const;

    std::size_t num_vars() const { return arities_.size(); }
    std::uint32_t arity(VarId var) const { return arities_[var]; }
    // Throws DataError unless every variable has at least one indicator on.
    void validate() const;

private:
    std::vector<std::uint32_t> arities_;
    std::vector<std::size_t> offsets_;
    std::vector<std::uint8_t> bits_;
};

// A rooted DAG of sum/product nodes over indicator and parameter leaves that
// computes a network polynomial.
//
// Nodes live in an append-only arena; ids are never reused. Removal is logical
// (the node is marked dead and its child list released) so ids held by callers
// stay meaningful across splits. Mutation goes through add_* / set_children /
// set_root followed by garbage_collect(), which also refreshes the evaluation
// schedule. Evaluation is const and safe for concurrent readers.
class ArithmeticCircuit {
public:
    ArithmeticCircuit() = default;
    explicit ArithmeticCircuit(std::vector<std::uint32_t> arities);

    // Product of marginals: one Sum per variable over Indicator x Parameter
    // pairs. The root distribution of variable i gets DistId i. With a single
    // variable the Sum itself is the root.
    static ArithmeticCircuit build_initial(const std::vector<std::vector<double>>& marginals);

    NodeId add_sum(std::vector<NodeId> children);
    NodeId add_product(std::vector<NodeId> children);
    NodeId add_parameter(VarId owner, DistId dist, ValueIndex value, double weight);
    void set_children(NodeId id, std::vector<NodeId> children);
    void set_root(NodeId id);

    // Marks every node unreachable from the root dead (indicators excepted),
    // updates indices and caches, and rebuilds the evaluation schedule.
    // Returns the number of nodes removed.
    std::size_t garbage_collect();

    double evaluate(const EvidenceVector& evidence, std::size_t* visits = nullptr) const;
    // Natural log of evaluate(); -infinity for zero.
    double evaluate_log(const EvidenceVector& evidence, std::size_t* visits = nullptr) const;

    std::size_t edge_count() const { return edge_count_; }
    std::size_t parameter_count() const { return parameter_count_; }
    // From-scratch recounts over nodes reachable from the root.
    std::size_t count_edges() const;
    std::size_t count_parameters() const;

    const CircuitNode& node(NodeId id) const { return nodes_[id]; }
    std::size_t arena_size() const { return nodes_.size(); }
    std::size_t live_node_count() const { return live_count_; }
    NodeId root() const { return root_; }
    // Incremented by every mutation; lets callers detect stale analyses.
    std::uint64_t version() const { return version_; }

    std::size_t num_vars() const { return arities_.size(); }
    const std::vector<std::uint32_t>& arities() const { return arities_; }

    NodeId indicator(VarId var, ValueIndex value) const;
    // Parameter node for (dist, value), or kNoNode.
    NodeId parameter(DistId dist, ValueIndex value) const;
    // Live parameter nodes of a distribution, indexed by value.
    std::vector<NodeId> parameters_of(DistId dist) const;

    // Reachable nodes, children before parents; the root is last.
    const std::vector<NodeId>& schedule() const { return order_; }

private:
    NodeId push(CircuitNode node);
    void check_children(const std::vector<NodeId>& children) const;
    void rebuild_schedule();

    std::vector<std::uint32_t> arities_;
    std::vector<std::size_t> indicator_offsets_;
    std::vector<NodeId> indicators_;
    std::vector<std::vector<NodeId>> params_by_dist_;
    std::vector<CircuitNode> nodes_;
    NodeId root_ = kNoNode;
    std::uint64_t version_ = 0;
    std::size_t edge_count_ = 0;
    std::size_t parameter_count_ = 0;
    std::size_t live_count_ = 0;

    // Evaluation schedule in CSR form over schedule positions.
    std::vector<NodeId> order_;
    std::vector<std::uint32_t> child_offsets_;
    std::vector<std::uint32_t> child_positions_;
};

// Parent lists of the nodes reachable from the root, derived on demand.
class ParentIndex {
public:
    explicit ParentIndex(const ArithmeticCircuit& circuit);

    std::span<const NodeId> parents(NodeId id) const {
        return {parents_.data() + offsets_[id], parents_.data() + offsets_[id + 1]};
    }
    std::size_t in_degree(NodeId id) const { return offsets_[id + 1] - offsets_[id]; }

private:
    std::vector<std::size_t> offsets_;
    std::vector<NodeId> parents_;
};

}  // namespace aclearn

#endif  // ACLEARN_CIRCUIT_HPP
