#include "aclearn/circuit_check.hpp"

#include <algorithm>
#include <sstream>
#include <utility>

namespace aclearn {

namespace {

// Indicator values of one variable reachable from a node, kept only when the
// set is a strict subset of the variable's domain.
using ValueMasks = std::vector<std::pair<VarId, std::uint64_t>>;

std::uint64_t full_mask(std::uint32_t arity) {
    return arity >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << arity) - 1;
}

const std::uint64_t* find_mask(const ValueMasks& masks, VarId var) {
    auto it = std::lower_bound(masks.begin(), masks.end(), var,
                               [](const auto& e, VarId v) { return e.first < v; });
    return it != masks.end() && it->first == var ? &it->second : nullptr;
}

}  // namespace

std::vector<NodeScope> compute_scopes(const ArithmeticCircuit& circuit) {
    const auto nvars = circuit.num_vars();
    std::vector<NodeScope> scopes(circuit.arena_size());
    for (NodeId id : circuit.schedule()) {
        const auto& n = circuit.node(id);
        auto& s = scopes[id];
        s.indicator_vars.resize(nvars);
        s.parameter_vars.resize(nvars);
        if (n.kind == NodeKind::Indicator) s.indicator_vars.set(n.var);
        if (n.kind == NodeKind::Parameter) s.parameter_vars.set(n.var);
        for (NodeId c : n.children) {
            s.indicator_vars |= scopes[c].indicator_vars;
            s.parameter_vars |= scopes[c].parameter_vars;
        }
    }
    return scopes;
}

PropertyReport check_properties(const ArithmeticCircuit& circuit) {
    PropertyReport report;
    const auto scopes = compute_scopes(circuit);
    const auto& arities = circuit.arities();
    std::vector<ValueMasks> masks(circuit.arena_size());

    for (NodeId id : circuit.schedule()) {
        const auto& n = circuit.node(id);
        if (n.kind == NodeKind::Indicator) {
            masks[id].emplace_back(n.var, std::uint64_t{1} << n.value);
            continue;
        }
        if (n.kind == NodeKind::Parameter) continue;

        // Restricted value masks: a variable stays restricted only if every
        // child that mentions it restricts it.
        ValueMasks merged;
        for (NodeId c : n.children)
            for (auto [var, m] : masks[c]) merged.emplace_back(var, m);
        std::sort(merged.begin(), merged.end());
        ValueMasks own;
        for (std::size_t i = 0; i < merged.size();) {
            VarId var = merged[i].first;
            std::uint64_t m = 0;
            for (; i < merged.size() && merged[i].first == var; ++i) m |= merged[i].second;
            bool restricted = m != full_mask(arities[var]);
            for (NodeId c : n.children) {
                if (!restricted) break;
                if (scopes[c].indicator_vars.test(var) && !find_mask(masks[c], var)) restricted = false;
            }
            if (restricted) own.emplace_back(var, m);
        }
        masks[id] = std::move(own);

        if (n.kind == NodeKind::Product) {
            boost::dynamic_bitset<> ind(circuit.num_vars()), par(circuit.num_vars());
            for (NodeId c : n.children) {
                if (ind.intersects(scopes[c].indicator_vars) || par.intersects(scopes[c].parameter_vars)) {
                    if (report.decomposable) report.decomposable_violation = id;
                    report.decomposable = false;
                    break;
                }
                ind |= scopes[c].indicator_vars;
                par |= scopes[c].parameter_vars;
            }
            continue;
        }

        // Sum node.
        const auto& first = scopes[n.children.front()];
        for (NodeId c : n.children) {
            if (scopes[c].indicator_vars != first.indicator_vars || scopes[c].parameter_vars != first.parameter_vars) {
                if (report.smooth) report.smooth_violation = id;
                report.smooth = false;
                break;
            }
        }
        if (n.children.size() < 2) continue;
        bool decided = false;
        for (auto [var, unused] : masks[n.children.front()]) {
            std::uint64_t seen = 0;
            bool ok = true;
            for (NodeId c : n.children) {
                const auto* m = find_mask(masks[c], var);
                if (!m || *m == 0 || (seen & *m)) {
                    ok = false;
                    break;
                }
                seen |= *m;
            }
            if (ok) {
                decided = true;
                break;
            }
        }
        if (!decided) {
            if (report.deterministic) report.deterministic_violation = id;
            report.deterministic = false;
        }
    }
    return report;
}

std::string PropertyReport::describe() const {
    std::ostringstream os;
    os << "smooth=" << smooth << " decomposable=" << decomposable << " deterministic=" << deterministic;
    if (smooth_violation) os << " smooth_violation=" << *smooth_violation;
    if (decomposable_violation) os << " decomposable_violation=" << *decomposable_violation;
    if (deterministic_violation) os << " deterministic_violation=" << *deterministic_violation;
    return os.str();
}

}  // namespace aclearn
