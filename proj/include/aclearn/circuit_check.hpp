#ifndef ACLEARN_CIRCUIT_CHECK_HPP
#define ACLEARN_CIRCUIT_CHECK_HPP

#include <optional>
#include <string>
#include <vector>

#include <boost/dynamic_bitset.hpp>

#include "aclearn/circuit.hpp"

namespace aclearn {

// Variables whose indicators (resp. parameters) are reachable from a node.
struct NodeScope {
    boost::dynamic_bitset<> indicator_vars;
    boost::dynamic_bitset<> parameter_vars;
};

// Indexed by NodeId; nodes not reachable from the root get empty bitsets.
std::vector<NodeScope> compute_scopes(const ArithmeticCircuit& circuit);

struct PropertyReport {
    bool smooth = true;
    bool decomposable = true;
    bool deterministic = true;
    std::optional<NodeId> smooth_violation;
    std::optional<NodeId> decomposable_violation;
    std::optional<NodeId> deterministic_violation;

    bool ok() const { return smooth && decomposable && deterministic; }
    std::string describe() const;
};

// Smoothness: every Sum's children share indicator and parameter scopes.
// Decomposability: every Product's children have pairwise disjoint scopes.
// Determinism: every Sum with two or more children has a variable whose
// reachable indicator values are nonempty and pairwise disjoint across the
// children. A single-child Sum is deterministic.
PropertyReport check_properties(const ArithmeticCircuit& circuit);

}  // namespace aclearn

#endif  // ACLEARN_CIRCUIT_CHECK_HPP
