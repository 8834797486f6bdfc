#include "aclearn/split_ac.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "aclearn/errors.hpp"

namespace aclearn {

bool MutualAncestorAnalysis::in_between(NodeId id) const {
    return std::binary_search(between.begin(), between.end(), id);
}

std::vector<NodeId> MutualAncestorAnalysis::footprint() const {
    std::vector<NodeId> out;
    for (NodeId id : d_ancestors)
        if (v_mask(id) == 0) out.push_back(id);
    for (auto [id, mask] : v_masks)
        if (!is_d_ancestor(id)) out.push_back(id);
    out.insert(out.end(), mutual.begin(), mutual.end());
    // Leaves are never copied or shrunk, so they never match a changed set.
    std::erase_if(out, [this](NodeId id) {
        return std::find(d_params.begin(), d_params.end(), id) != d_params.end() ||
               std::find(v_indicators.begin(), v_indicators.end(), id) != v_indicators.end();
    });
    std::sort(out.begin(), out.end());
    return out;
}

MutualAncestorAnalysis find_mutual_ancestors(const ArithmeticCircuit& circuit, const ParentIndex& parents,
                                             DistId dist, VarId var) {
    MutualAncestorAnalysis a;
    a.dist = dist;
    a.var = var;
    a.circuit_version = circuit.version();
    a.d_params = circuit.parameters_of(dist);
    if (a.d_params.empty() || std::count(a.d_params.begin(), a.d_params.end(), kNoNode) > 0)
        throw DataError("distribution " + std::to_string(dist) + " has no parameter nodes in the circuit");
    if (var >= circuit.num_vars()) throw DataError("unknown split variable " + std::to_string(var));
    if (circuit.node(a.d_params.front()).var == var)
        throw DataError("cannot split a distribution on its own variable");
    for (ValueIndex i = 0; i < circuit.arities()[var]; ++i) a.v_indicators.push_back(circuit.indicator(var, i));

    std::vector<NodeId> stack(a.d_params.begin(), a.d_params.end());
    a.d_ancestors.insert(stack.begin(), stack.end());
    while (!stack.empty()) {
        NodeId id = stack.back();
        stack.pop_back();
        for (NodeId p : parents.parents(id))
            if (a.d_ancestors.insert(p).second) stack.push_back(p);
    }
    for (ValueIndex i = 0; i < a.v_indicators.size(); ++i) {
        const std::uint64_t bit = std::uint64_t{1} << i;
        stack.assign(1, a.v_indicators[i]);
        a.v_masks[a.v_indicators[i]] |= bit;
        while (!stack.empty()) {
            NodeId id = stack.back();
            stack.pop_back();
            for (NodeId p : parents.parents(id)) {
                auto& m = a.v_masks[p];
                if (!(m & bit)) {
                    m |= bit;
                    stack.push_back(p);
                }
            }
        }
    }

    auto both = [&](NodeId id) { return a.is_d_ancestor(id) && a.v_mask(id) != 0; };
    for (NodeId id : a.d_ancestors) {
        if (!both(id)) continue;
        const auto& n = circuit.node(id);
        if (std::any_of(n.children.begin(), n.children.end(), both)) continue;
        a.mutual.push_back(id);
    }
    if (a.mutual.empty()) throw InvariantViolation("parameters and indicators share no ancestor");
    std::sort(a.mutual.begin(), a.mutual.end());

    for (NodeId m : a.mutual) {
        const auto& n = circuit.node(m);
        if (n.kind != NodeKind::Product)
            throw InvariantViolation("mutual ancestor " + std::to_string(m) + " is not a product");
        NodeId nv = kNoNode, nd = kNoNode;
        for (NodeId c : n.children) {
            bool is_d = a.is_d_ancestor(c), is_v = a.v_mask(c) != 0;
            if (is_d) {
                if (nd != kNoNode) throw InvariantViolation("mutual ancestor with two D-ancestor children");
                nd = c;
            }
            if (is_v) {
                if (nv != kNoNode) throw InvariantViolation("mutual ancestor with two V-ancestor children");
                nv = c;
            }
        }
        if (nv == kNoNode || nd == kNoNode)
            throw InvariantViolation("mutual ancestor " + std::to_string(m) + " lacks a D- or V-ancestor child");
        a.ma_children.emplace_back(nv, nd);
    }

    auto is_leaf_of_split = [&](NodeId id) {
        const auto& n = circuit.node(id);
        return (n.kind == NodeKind::Parameter && n.dist == dist) || (n.kind == NodeKind::Indicator && n.var == var);
    };
    std::unordered_set<NodeId> seen;
    for (auto [nv, nd] : a.ma_children)
        for (NodeId start : {nv, nd})
            if (!is_leaf_of_split(start) && seen.insert(start).second) stack.push_back(start);
    while (!stack.empty()) {
        NodeId id = stack.back();
        stack.pop_back();
        for (NodeId c : circuit.node(id).children) {
            if (is_leaf_of_split(c) || !(a.is_d_ancestor(c) || a.v_mask(c) != 0)) continue;
            if (seen.insert(c).second) stack.push_back(c);
        }
    }
    a.between.assign(seen.begin(), seen.end());
    std::sort(a.between.begin(), a.between.end());
    return a;
}

namespace {

// Reference to an existing node (>= 0) or to a planned node (< 0).
using Ref = std::int64_t;
constexpr Ref planned_ref(std::size_t k) { return -static_cast<Ref>(k) - 1; }
constexpr std::size_t planned_index(Ref r) { return static_cast<std::size_t>(-r - 1); }

struct PlannedNode {
    NodeKind kind = NodeKind::Sum;
    ValueIndex v_value = 0;      // Parameter: which D_i
    ValueIndex param_value = 0;  // Parameter: value of D's variable
    std::vector<Ref> children;
};

// Plans the nodes SplitAC creates: per-value copies of N (created lazily, so
// only copies consistent with their value exist), the new parameters d_ij,
// and for each mutual ancestor the products v_i x n'_V x n'_D under a new sum.
class CopyPlanner {
public:
    CopyPlanner(const ArithmeticCircuit& circuit, const MutualAncestorAnalysis& analysis)
        : c_(circuit), a_(analysis), target_arity_(analysis.d_params.size()) {
        params_.assign(a_.v_indicators.size() * target_arity_, 0);
    }

    // Returns false if the planned edge count exceeded `edge_limit`.
    bool run(std::optional<std::int64_t> edge_limit) {
        limit_ = edge_limit;
        for (std::size_t k = 0; k < a_.mutual.size(); ++k) {
            auto [nv, nd] = a_.ma_children[k];
            const std::uint64_t values = a_.v_mask(a_.mutual[k]);
            std::vector<Ref> terms;
            for (ValueIndex i = 0; i < a_.v_indicators.size(); ++i) {
                if (!(values >> i & 1)) continue;
                std::vector<Ref> factors{static_cast<Ref>(a_.v_indicators[i])};
                for (NodeId side : {nv, nd}) {
                    auto r = map_child(side, i);
                    if (!r) continue;
                    if (*r == kPending) r = copy(side, i);
                    if (!r) return false;
                    factors.push_back(*r);
                }
                terms.push_back(plan(PlannedNode{NodeKind::Product, 0, 0, std::move(factors)}));
                if (over_limit()) return false;
            }
            sums_.push_back(plan(PlannedNode{NodeKind::Sum, 0, 0, std::move(terms)}));
            if (over_limit()) return false;
        }
        return true;
    }

    const std::vector<PlannedNode>& nodes() const { return nodes_; }
    const std::vector<Ref>& sums() const { return sums_; }
    std::int64_t edges() const { return edges_; }
    std::int64_t parameters() const { return parameters_; }

private:
    static constexpr Ref kPending = std::numeric_limits<Ref>::min();

    bool over_limit() const { return limit_ && edges_ > *limit_; }

    Ref plan(PlannedNode n) {
        edges_ += static_cast<std::int64_t>(n.children.size());
        if (n.kind == NodeKind::Parameter) ++parameters_;
        nodes_.push_back(std::move(n));
        return planned_ref(nodes_.size() - 1);
    }

    Ref param(ValueIndex i, ValueIndex j) {
        auto& slot = params_[i * target_arity_ + j];
        if (slot == 0) slot = plan(PlannedNode{NodeKind::Parameter, i, j, {}});
        return slot;
    }

    // How child `id` of a node in N appears in the copy for V = i: omitted
    // (nullopt), a new parameter, a copy still to be made (kPending), or the
    // shared original.
    std::optional<Ref> map_child(NodeId id, ValueIndex i) {
        const auto& n = c_.node(id);
        if (n.kind == NodeKind::Indicator && n.var == a_.var) return std::nullopt;
        const std::uint64_t mask = a_.v_mask(id);
        if (mask != 0 && !(mask >> i & 1)) return std::nullopt;
        if (n.kind == NodeKind::Parameter && n.dist == a_.dist) return param(i, n.value);
        if (mask != 0 || a_.is_d_ancestor(id)) {
            auto it = memo_.find(key(id, i));
            return it != memo_.end() ? it->second : kPending;
        }
        return static_cast<Ref>(id);
    }

    static std::uint64_t key(NodeId id, ValueIndex i) { return (std::uint64_t{id} << 6) | i; }

    // Post-order copy of `root` for value i; nullopt when the edge limit hit.
    std::optional<Ref> copy(NodeId root, ValueIndex i) {
        struct Frame {
            NodeId id;
            std::size_t next;
            std::vector<Ref> children;
        };
        std::vector<Frame> stack;
        stack.push_back({root, 0, {}});
        Ref result = 0;
        while (!stack.empty()) {
            const NodeId id = stack.back().id;
            const auto& ch = c_.node(id).children;
            if (stack.back().next < ch.size()) {
                NodeId child = ch[stack.back().next];
                auto r = map_child(child, i);
                if (r && *r == kPending) {
                    stack.push_back({child, 0, {}});
                    continue;
                }
                auto& top = stack.back();
                ++top.next;
                if (r) top.children.push_back(*r);
                continue;
            }
            Frame done = std::move(stack.back());
            stack.pop_back();
            if (done.children.empty())
                throw InvariantViolation("copy of node " + std::to_string(id) + " has no children");
            result = plan(PlannedNode{c_.node(id).kind, 0, 0, std::move(done.children)});
            memo_.emplace(key(id, i), result);
            if (over_limit()) return std::nullopt;
        }
        return result;
    }

    const ArithmeticCircuit& c_;
    const MutualAncestorAnalysis& a_;
    std::size_t target_arity_;
    std::optional<std::int64_t> limit_;
    std::vector<PlannedNode> nodes_;
    std::vector<Ref> sums_;
    std::vector<Ref> params_;
    std::unordered_map<std::uint64_t, Ref> memo_;
    std::int64_t edges_ = 0;
    std::int64_t parameters_ = 0;
};

struct Removal {
    std::int64_t edges = 0;
    std::int64_t parameters = 0;
};

// Nodes that become unreachable once every mutual ancestor drops n_V and n_D.
// Copies never point at originals in N or at D's parameters, and every node
// in N keeps at least one copy that references its other children, so only
// nodes in N and D's parameters can die.
Removal cascade_removal(const ArithmeticCircuit& circuit, const MutualAncestorAnalysis& a, const ParentIndex& parents) {
    Removal r;
    std::unordered_map<NodeId, std::size_t> refs;
    std::vector<NodeId> stack;
    for (auto [nv, nd] : a.ma_children) {
        stack.push_back(nv);
        stack.push_back(nd);
    }
    while (!stack.empty()) {
        NodeId id = stack.back();
        stack.pop_back();
        const auto& n = circuit.node(id);
        const bool d_param = n.kind == NodeKind::Parameter && n.dist == a.dist;
        if (!d_param && !a.in_between(id)) continue;
        auto [it, fresh] = refs.try_emplace(id, parents.in_degree(id));
        if (--it->second != 0) continue;
        r.edges += static_cast<std::int64_t>(n.children.size());
        if (d_param) ++r.parameters;
        for (NodeId c : n.children) stack.push_back(c);
    }
    return r;
}

}  // namespace

EdgeCost edge_cost_dry_run(const ArithmeticCircuit& circuit, const MutualAncestorAnalysis& analysis,
                           const ParentIndex& parents, std::optional<std::int64_t> abort_above) {
    if (analysis.circuit_version != circuit.version()) throw InvariantViolation("stale mutual-ancestor analysis");
    const Removal removed = cascade_removal(circuit, analysis, parents);
    // Each mutual ancestor trades two children for one.
    const auto fixed = -removed.edges - static_cast<std::int64_t>(analysis.mutual.size());
    CopyPlanner planner(circuit, analysis);
    std::optional<std::int64_t> limit;
    if (abort_above) limit = *abort_above - fixed;
    EdgeCost cost;
    cost.aborted = !planner.run(limit);
    cost.edges = planner.edges() + fixed;
    cost.parameters = planner.parameters() - removed.parameters;
    return cost;
}

SplitOutcome split_ac(ArithmeticCircuit& circuit, const MutualAncestorAnalysis& analysis,
                      const std::vector<DistId>& new_leaves, const std::vector<std::vector<double>>& new_thetas) {
    if (analysis.circuit_version != circuit.version()) throw InvariantViolation("stale mutual-ancestor analysis");
    if (new_leaves.size() != analysis.v_indicators.size() || new_thetas.size() != new_leaves.size())
        throw DataError("split needs one new leaf per value of the split variable");
    const VarId owner = circuit.node(analysis.d_params.front()).var;
    for (const auto& t : new_thetas)
        if (t.size() != analysis.d_params.size()) throw DataError("new leaf distribution has the wrong arity");

    SplitOutcome out;
    out.edges_before = circuit.edge_count();
    out.parameters_before = circuit.parameter_count();

    CopyPlanner planner(circuit, analysis);
    planner.run(std::nullopt);

    std::vector<NodeId> made(planner.nodes().size(), kNoNode);
    auto resolve = [&](Ref r) { return r >= 0 ? static_cast<NodeId>(r) : made[planned_index(r)]; };
    for (std::size_t k = 0; k < planner.nodes().size(); ++k) {
        const auto& p = planner.nodes()[k];
        if (p.kind == NodeKind::Parameter) {
            made[k] = circuit.add_parameter(owner, new_leaves[p.v_value], p.param_value,
                                            new_thetas[p.v_value][p.param_value]);
            continue;
        }
        std::vector<NodeId> children;
        children.reserve(p.children.size());
        for (Ref r : p.children) children.push_back(resolve(r));
        made[k] = p.kind == NodeKind::Sum ? circuit.add_sum(std::move(children)) : circuit.add_product(std::move(children));
    }

    for (std::size_t k = 0; k < analysis.mutual.size(); ++k) {
        const NodeId m = analysis.mutual[k];
        auto [nv, nd] = analysis.ma_children[k];
        const NodeId sum = resolve(planner.sums()[k]);
        std::vector<NodeId> children;
        bool placed = false;
        for (NodeId c : circuit.node(m).children) {
            if (c == nv || c == nd) {
                if (!placed) children.push_back(sum);
                placed = true;
                continue;
            }
            children.push_back(c);
        }
        circuit.set_children(m, std::move(children));
    }
    out.nodes_removed = circuit.garbage_collect();
    out.edges_after = circuit.edge_count();
    out.parameters_after = circuit.parameter_count();

    out.changed = analysis.between;
    out.changed.insert(out.changed.end(), analysis.mutual.begin(), analysis.mutual.end());
    std::sort(out.changed.begin(), out.changed.end());
    return out;
}

}  // namespace aclearn
