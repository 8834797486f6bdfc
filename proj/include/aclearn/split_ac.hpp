#ifndef ACLEARN_SPLIT_AC_HPP
#define ACLEARN_SPLIT_AC_HPP

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "aclearn/circuit.hpp"

namespace aclearn {

// Which nodes of a circuit lie above the parameters of distribution D and the
// indicators of variable V, and where the two ancestor sets meet.
//
// A node is a D-ancestor if it reaches a parameter of D, a V-ancestor if it
// reaches an indicator of V. Mutual ancestors (M) are nodes that are both and
// have no child that is both; in a smooth, decomposable circuit each one is a
// Product with exactly one D-ancestor child n_D and one V-ancestor child n_V.
// N is every D- or V-ancestor strictly below some mutual ancestor, excluding
// the parameter and indicator leaves themselves.
struct MutualAncestorAnalysis {
    DistId dist = 0;
    VarId var = 0;
    std::uint64_t circuit_version = 0;

    std::vector<NodeId> d_params;       // by value of D's variable
    std::vector<NodeId> v_indicators;   // by value of V
    std::unordered_set<NodeId> d_ancestors;            // includes d_params
    std::unordered_map<NodeId, std::uint64_t> v_masks;  // V-ancestor -> values of V reached

    std::vector<NodeId> mutual;                          // sorted
    std::vector<std::pair<NodeId, NodeId>> ma_children;  // (n_V, n_D), parallel to `mutual`
    std::vector<NodeId> between;                         // N, sorted

    bool is_d_ancestor(NodeId id) const { return d_ancestors.count(id) != 0; }
    std::uint64_t v_mask(NodeId id) const {
        auto it = v_masks.find(id);
        return it == v_masks.end() ? 0 : it->second;
    }
    bool in_between(NodeId id) const;

    // Interior nodes that are ancestors of exactly one of D and V, plus the
    // mutual ancestors: the nodes whose change can alter this split's edge cost.
    std::vector<NodeId> footprint() const;
};

MutualAncestorAnalysis find_mutual_ancestors(const ArithmeticCircuit& circuit, const ParentIndex& parents,
                                             DistId dist, VarId var);

struct EdgeCost {
    std::int64_t edges = 0;  // exact cost, or a lower bound when aborted
    std::int64_t parameters = 0;
    bool aborted = false;
};

// Edge-count change that split_ac would cause, computed without mutating the
// circuit. With `abort_above`, stops as soon as the cost is known to exceed it
// and returns a lower bound greater than the threshold.
EdgeCost edge_cost_dry_run(const ArithmeticCircuit& circuit, const MutualAncestorAnalysis& analysis,
                           const ParentIndex& parents, std::optional<std::int64_t> abort_above = std::nullopt);

struct SplitOutcome {
    std::vector<NodeId> changed;  // copied nodes and nodes that lost children, sorted
    std::size_t edges_before = 0;
    std::size_t edges_after = 0;
    std::size_t parameters_before = 0;
    std::size_t parameters_after = 0;
    std::size_t nodes_removed = 0;

    std::int64_t edge_delta() const {
        return static_cast<std::int64_t>(edges_after) - static_cast<std::int64_t>(edges_before);
    }
};

// Rewrites the circuit so D is replaced by the distributions D_i, each used in
// the context V = i. `new_leaves[i]` is the id of D_i and `new_thetas[i]` its
// probability vector. The analysis must be fresh for the circuit.
SplitOutcome split_ac(ArithmeticCircuit& circuit, const MutualAncestorAnalysis& analysis,
                      const std::vector<DistId>& new_leaves, const std::vector<std::vector<double>>& new_thetas);

}  // namespace aclearn

#endif  // ACLEARN_SPLIT_AC_HPP
