// Shared oracles and generators for the test and acceptance binaries.
#ifndef ACLEARN_TESTS_SUPPORT_HPP
#define ACLEARN_TESTS_SUPPORT_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <vector>

#include "aclearn/bn.hpp"
#include "aclearn/circuit.hpp"
#include "aclearn/dataset.hpp"
#include "aclearn/model.hpp"

namespace aclearn::testing {

// Every complete assignment in lexicographic order.
inline void for_each_assignment(const std::vector<std::uint32_t>& arities,
                                const std::function<void(const std::vector<ValueIndex>&)>& fn) {
    std::vector<ValueIndex> x(arities.size(), 0);
    while (true) {
        fn(x);
        std::size_t k = 0;
        while (k < x.size() && ++x[k] == arities[k]) x[k++] = 0;
        if (k == x.size()) return;
    }
}

inline double max_joint_error(const ArithmeticCircuit& c, const BayesianNetwork& bn) {
    double worst = 0.0;
    for_each_assignment(bn.arities(), [&](const std::vector<ValueIndex>& x) {
        auto ev = EvidenceVector::from_assignment(bn.arities(), x);
        worst = std::max(worst, std::abs(c.evaluate(ev) - bn.joint_probability(x)));
    });
    return worst;
}

// Sum of the joint over completions of a partial assignment (-1 = free).
inline double enumerate_marginal(const BayesianNetwork& bn, const std::vector<int>& partial) {
    double total = 0.0;
    for_each_assignment(bn.arities(), [&](const std::vector<ValueIndex>& x) {
        for (std::size_t v = 0; v < x.size(); ++v)
            if (partial[v] >= 0 && static_cast<int>(x[v]) != partial[v]) return;
        total += bn.joint_probability(x);
    });
    return total;
}

// Data sampled from a random chain-like structure: each variable copies a
// random earlier variable with probability `strength`, otherwise draws
// uniformly. Produces real dependencies for the learner to find.
inline Dataset planted_dataset(std::size_t n, std::size_t rows, std::uint32_t max_arity, double strength,
                               std::mt19937_64& rng) {
    std::vector<std::uint32_t> arities(n);
    std::uniform_int_distribution<std::uint32_t> ar(2, max_arity);
    for (auto& a : arities) a = ar(rng);
    std::vector<int> source(n, -1);
    for (std::size_t v = 1; v < n; ++v) source[v] = std::uniform_int_distribution<int>(-1, static_cast<int>(v) - 1)(rng);
    std::bernoulli_distribution copy(strength);
    std::vector<std::uint8_t> cells(n * rows);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t v = 0; v < n; ++v) {
            std::uint8_t x;
            if (source[v] >= 0 && copy(rng))
                x = static_cast<std::uint8_t>(cells[r * n + source[v]] % arities[v]);
            else
                x = static_cast<std::uint8_t>(std::uniform_int_distribution<std::uint32_t>(0, arities[v] - 1)(rng));
            cells[r * n + v] = x;
        }
    }
    return Dataset(std::move(arities), std::move(cells));
}

inline std::vector<Split> all_valid_splits(const BayesianNetwork& bn) {
    std::vector<Split> out;
    for (DistId d : bn.live_leaves()) {
        const VarId target = bn.leaf(d).var;
        for (VarId v = 0; v < bn.num_vars(); ++v) {
            if (v == target) continue;
            Split s{target, d, v};
            if (bn.is_valid_split(s)) out.push_back(s);
        }
    }
    return out;
}

inline std::optional<Split> random_valid_split(const BayesianNetwork& bn, std::mt19937_64& rng) {
    auto all = all_valid_splits(bn);
    if (all.empty()) return std::nullopt;
    return all[std::uniform_int_distribution<std::size_t>(0, all.size() - 1)(rng)];
}

// Scope computation by plain recursion with memoization, independent of the
// checker's bitset pass. Scopes hold indicator variables and parameter
// variables; the returned sets are keyed by node.
struct ScopeOracle {
    const ArithmeticCircuit& c;
    std::map<NodeId, std::set<VarId>> ind, par;
    std::map<NodeId, std::map<VarId, std::set<ValueIndex>>> values;

    void visit(NodeId id) {
        if (ind.count(id)) return;
        const auto& n = c.node(id);
        std::set<VarId> si, sp;
        std::map<VarId, std::set<ValueIndex>> sv;
        if (n.kind == NodeKind::Indicator) {
            si.insert(n.var);
            sv[n.var].insert(n.value);
        } else if (n.kind == NodeKind::Parameter) {
            sp.insert(n.var);
        }
        for (NodeId ch : n.children) {
            visit(ch);
            si.insert(ind[ch].begin(), ind[ch].end());
            sp.insert(par[ch].begin(), par[ch].end());
            for (auto& [v, vals] : values[ch]) sv[v].insert(vals.begin(), vals.end());
        }
        ind[id] = si;
        par[id] = sp;
        values[id] = sv;
    }

    // True iff the circuit is smooth, decomposable and deterministic.
    bool all_properties() {
        visit(c.root());
        for (auto& [id, _] : ind) {
            const auto& n = c.node(id);
            if (n.kind == NodeKind::Product) {
                for (std::size_t a = 0; a < n.children.size(); ++a)
                    for (std::size_t b = a + 1; b < n.children.size(); ++b) {
                        for (VarId v : ind[n.children[a]])
                            if (ind[n.children[b]].count(v)) return false;
                        for (VarId v : par[n.children[a]])
                            if (par[n.children[b]].count(v)) return false;
                    }
            } else if (n.kind == NodeKind::Sum) {
                for (NodeId ch : n.children)
                    if (ind[ch] != ind[n.children.front()] || par[ch] != par[n.children.front()]) return false;
                if (n.children.size() < 2) continue;
                bool decided = false;
                for (VarId v : ind[id]) {
                    bool disjoint = true;
                    std::set<ValueIndex> seen;
                    for (NodeId ch : n.children) {
                        const auto& vals = values[ch][v];
                        if (vals.empty()) disjoint = false;
                        for (ValueIndex x : vals)
                            if (!seen.insert(x).second) disjoint = false;
                    }
                    if (disjoint) decided = true;
                }
                if (!decided) return false;
            }
        }
        return true;
    }
};

}  // namespace aclearn::testing

#endif  // ACLEARN_TESTS_SUPPORT_HPP
