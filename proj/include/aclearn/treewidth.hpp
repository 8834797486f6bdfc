#ifndef ACLEARN_TREEWIDTH_HPP
#define ACLEARN_TREEWIDTH_HPP

#include <cstddef>
#include <vector>

#include "aclearn/bn.hpp"

namespace aclearn {

// Undirected graph as sorted adjacency lists.
using UndirectedGraph = std::vector<std::vector<VarId>>;

// Connects every variable to its parents and every pair of co-parents.
UndirectedGraph moral_graph(const BayesianNetwork& bn);

struct EliminationResult {
    std::size_t width = 0;  // largest clique formed during elimination, minus one
    std::vector<VarId> order;
};

// Greedy min-fill elimination; ties go to the lowest variable index.
EliminationResult min_fill_elimination(const UndirectedGraph& graph);
EliminationResult estimate_treewidth_minfill(const BayesianNetwork& bn);

// Width induced by eliminating vertices in the given order.
std::size_t elimination_width(const UndirectedGraph& graph, const std::vector<VarId>& order);

}  // namespace aclearn

#endif  // ACLEARN_TREEWIDTH_HPP
