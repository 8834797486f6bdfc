#include "aclearn/treewidth.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include "aclearn/errors.hpp"

namespace aclearn {

UndirectedGraph moral_graph(const BayesianNetwork& bn) {
    std::vector<std::set<VarId>> adj(bn.num_vars());
    for (VarId v = 0; v < bn.num_vars(); ++v) {
        const auto& ps = bn.parents(v);
        for (std::size_t a = 0; a < ps.size(); ++a) {
            adj[v].insert(ps[a]);
            adj[ps[a]].insert(v);
            for (std::size_t b = a + 1; b < ps.size(); ++b) {
                adj[ps[a]].insert(ps[b]);
                adj[ps[b]].insert(ps[a]);
            }
        }
    }
    UndirectedGraph g(adj.size());
    for (std::size_t v = 0; v < adj.size(); ++v) g[v].assign(adj[v].begin(), adj[v].end());
    return g;
}

namespace {

using AdjSets = std::vector<std::set<VarId>>;

std::size_t fill_in(const AdjSets& adj, VarId v) {
    std::size_t fill = 0;
    for (auto a = adj[v].begin(); a != adj[v].end(); ++a)
        for (auto b = std::next(a); b != adj[v].end(); ++b)
            if (!adj[*a].count(*b)) ++fill;
    return fill;
}

// Removes v, connecting its neighbours; returns the clique size |N(v)| + 1.
std::size_t eliminate(AdjSets& adj, VarId v) {
    const std::vector<VarId> nb(adj[v].begin(), adj[v].end());
    for (std::size_t a = 0; a < nb.size(); ++a) {
        adj[nb[a]].erase(v);
        for (std::size_t b = a + 1; b < nb.size(); ++b) {
            adj[nb[a]].insert(nb[b]);
            adj[nb[b]].insert(nb[a]);
        }
    }
    adj[v].clear();
    return nb.size() + 1;
}

AdjSets to_sets(const UndirectedGraph& g) {
    AdjSets adj(g.size());
    for (std::size_t v = 0; v < g.size(); ++v) adj[v].insert(g[v].begin(), g[v].end());
    return adj;
}

}  // namespace

EliminationResult min_fill_elimination(const UndirectedGraph& graph) {
    auto adj = to_sets(graph);
    std::vector<std::uint8_t> done(adj.size(), 0);
    EliminationResult res;
    std::size_t max_clique = 0;
    for (std::size_t step = 0; step < adj.size(); ++step) {
        VarId best = 0;
        std::size_t best_fill = std::numeric_limits<std::size_t>::max();
        for (VarId v = 0; v < adj.size(); ++v) {
            if (done[v]) continue;
            auto f = fill_in(adj, v);
            if (f < best_fill) {
                best_fill = f;
                best = v;
            }
        }
        done[best] = 1;
        res.order.push_back(best);
        max_clique = std::max(max_clique, eliminate(adj, best));
    }
    res.width = max_clique == 0 ? 0 : max_clique - 1;
    return res;
}

EliminationResult estimate_treewidth_minfill(const BayesianNetwork& bn) {
    return min_fill_elimination(moral_graph(bn));
}

std::size_t elimination_width(const UndirectedGraph& graph, const std::vector<VarId>& order) {
    if (order.size() != graph.size()) throw DataError("elimination order must cover every vertex");
    auto adj = to_sets(graph);
    std::vector<std::uint8_t> seen(adj.size(), 0);
    std::size_t max_clique = 0;
    for (VarId v : order) {
        if (v >= adj.size() || seen[v]) throw DataError("elimination order is not a permutation");
        seen[v] = 1;
        max_clique = std::max(max_clique, eliminate(adj, v));
    }
    return max_clique == 0 ? 0 : max_clique - 1;
}

}  // namespace aclearn
