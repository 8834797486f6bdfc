#include "aclearn/circuit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "aclearn/errors.hpp"

namespace aclearn {

const char* to_string(NodeKind kind) {
    switch (kind) {
        case NodeKind::Sum: return "sum";
        case NodeKind::Product: return "product";
        case NodeKind::Indicator: return "indicator";
        case NodeKind::Parameter: return "parameter";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// EvidenceVector

EvidenceVector::EvidenceVector(std::span<const std::uint32_t> arities)
    : arities_(arities.begin(), arities.end()) {
    offsets_.reserve(arities_.size() + 1);
    std::size_t total = 0;
    for (auto a : arities_) {
        offsets_.push_back(total);
        total += a;
    }
    offsets_.push_back(total);
    bits_.assign(total, 1);
}

EvidenceVector EvidenceVector::all_ones(std::span<const std::uint32_t> arities) {
    EvidenceVector ev(arities);
    std::fill(ev.bits_.begin(), ev.bits_.end(), 1);
    return ev;
}

EvidenceVector EvidenceVector::from_assignment(std::span<const std::uint32_t> arities,
                                               std::span<const ValueIndex> assignment) {
    if (assignment.size() != arities.size())
        throw DataError("assignment covers " + std::to_string(assignment.size()) + " of " +
                        std::to_string(arities.size()) + " variables");
    EvidenceVector ev(arities);
    for (VarId v = 0; v < assignment.size(); ++v) ev.observe(v, assignment[v]);
    return ev;
}

void EvidenceVector::observe(VarId var, ValueIndex value) {
    if (var >= arities_.size() || value >= arities_[var])
        throw DataError("evidence references unknown variable/value " + std::to_string(var) + "=" +
                        std::to_string(value));
    std::fill(bits_.begin() + offsets_[var], bits_.begin() + offsets_[var + 1], 0);
    bits_[offsets_[var] + value] = 1;
}

void EvidenceVector::sum_out(VarId var) {
    if (var >= arities_.size()) throw DataError("evidence references unknown variable " + std::to_string(var));
    std::fill(bits_.begin() + offsets_[var], bits_.begin() + offsets_[var + 1], 1);
}

void EvidenceVector::set(VarId var, ValueIndex value, bool on) {
    if (var >= arities_.size() || value >= arities_[var])
        throw DataError("evidence references unknown variable/value " + std::to_string(var) + "=" +
                        std::to_string(value));
    bits_[offsets_[var] + value] = on ? 1 : 0;
}

bool EvidenceVector::get(VarId var, ValueIndex value) const {
    return bits_[offsets_[var] + value] != 0;
}

void EvidenceVector::validate() const {
    for (VarId v = 0; v < arities_.size(); ++v) {
        bool any = false;
        for (auto i = offsets_[v]; i < offsets_[v + 1]; ++i) any |= bits_[i] != 0;
        if (!any) throw DataError("evidence sets no indicator of variable " + std::to_string(v));
    }
}

// ---------------------------------------------------------------------------
// ArithmeticCircuit

ArithmeticCircuit::ArithmeticCircuit(std::vector<std::uint32_t> arities) : arities_(std::move(arities)) {
    if (arities_.empty()) throw DataError("a circuit needs at least one variable");
    std::size_t total = 0;
    for (auto a : arities_) {
        if (a < 2 || a > kMaxArity)
            throw DataError("variable arity must lie in [2, " + std::to_string(kMaxArity) + "], got " +
                            std::to_string(a));
        indicator_offsets_.push_back(total);
        total += a;
    }
    indicator_offsets_.push_back(total);
    indicators_.reserve(total);
    for (VarId v = 0; v < arities_.size(); ++v) {
        for (ValueIndex i = 0; i < arities_[v]; ++i) {
            CircuitNode n;
            n.kind = NodeKind::Indicator;
            n.var = v;
            n.value = i;
            indicators_.push_back(push(std::move(n)));
        }
    }
}

ArithmeticCircuit ArithmeticCircuit::build_initial(const std::vector<std::vector<double>>& marginals) {
    std::vector<std::uint32_t> arities;
    for (const auto& m : marginals) arities.push_back(static_cast<std::uint32_t>(m.size()));
    ArithmeticCircuit c(arities);

    std::vector<NodeId> sums;
    for (VarId v = 0; v < marginals.size(); ++v) {
        double total = 0.0;
        for (double p : marginals[v]) {
            if (!(p > 0.0) || p > 1.0)
                throw DataError("marginal of variable " + std::to_string(v) + " has a probability outside (0, 1]");
            total += p;
        }
        if (std::abs(total - 1.0) > 1e-12)
            throw DataError("marginal of variable " + std::to_string(v) + " does not sum to 1");
        std::vector<NodeId> terms;
        for (ValueIndex i = 0; i < arities[v]; ++i) {
            NodeId par = c.add_parameter(v, v, i, marginals[v][i]);
            terms.push_back(c.add_product({c.indicator(v, i), par}));
        }
        sums.push_back(c.add_sum(std::move(terms)));
    }
    c.set_root(sums.size() == 1 ? sums.front() : c.add_product(std::move(sums)));
    c.garbage_collect();
    return c;
}

NodeId ArithmeticCircuit::push(CircuitNode node) {
    auto id = static_cast<NodeId>(nodes_.size());
    if (id == kNoNode) throw InvariantViolation("circuit arena exhausted");
    edge_count_ += node.children.size();
    if (node.kind == NodeKind::Parameter) ++parameter_count_;
    ++live_count_;
    ++version_;
    nodes_.push_back(std::move(node));
    return id;
}

void ArithmeticCircuit::check_children(const std::vector<NodeId>& children) const {
    if (children.empty()) throw InvariantViolation("interior node without children");
    for (std::size_t i = 0; i < children.size(); ++i) {
        if (children[i] >= nodes_.size() || !nodes_[children[i]].live)
            throw InvariantViolation("child " + std::to_string(children[i]) + " is not a live node");
        for (std::size_t j = 0; j < i; ++j)
            if (children[i] == children[j])
                throw InvariantViolation("duplicate edge to child " + std::to_string(children[i]));
    }
}

NodeId ArithmeticCircuit::add_sum(std::vector<NodeId> children) {
    check_children(children);
    CircuitNode n;
    n.kind = NodeKind::Sum;
    n.children = std::move(children);
    return push(std::move(n));
}

NodeId ArithmeticCircuit::add_product(std::vector<NodeId> children) {
    check_children(children);
    CircuitNode n;
    n.kind = NodeKind::Product;
    n.children = std::move(children);
    return push(std::move(n));
}

NodeId ArithmeticCircuit::add_parameter(VarId owner, DistId dist, ValueIndex value, double weight) {
    if (owner >= arities_.size() || value >= arities_[owner])
        throw DataError("parameter for unknown variable/value");
    if (!(weight >= 0.0) || weight > 1.0) throw DataError("parameter weight outside [0, 1]");
    if (dist >= params_by_dist_.size()) params_by_dist_.resize(dist + 1);
    auto& slots = params_by_dist_[dist];
    if (slots.empty()) slots.assign(arities_[owner], kNoNode);
    if (slots.size() != arities_[owner]) throw InvariantViolation("distribution reused with a different owner");
    if (slots[value] != kNoNode) throw InvariantViolation("parameter node already exists for this distribution value");
    CircuitNode n;
    n.kind = NodeKind::Parameter;
    n.var = owner;
    n.dist = dist;
    n.value = value;
    n.weight = weight;
    NodeId id = push(std::move(n));
    slots[value] = id;
    return id;
}

void ArithmeticCircuit::set_children(NodeId id, std::vector<NodeId> children) {
    auto& n = nodes_.at(id);
    if (n.is_leaf() || !n.live) throw InvariantViolation("set_children on a leaf or dead node");
    check_children(children);
    edge_count_ -= n.children.size();
    edge_count_ += children.size();
    n.children = std::move(children);
    ++version_;
}

void ArithmeticCircuit::set_root(NodeId id) {
    if (id >= nodes_.size() || !nodes_[id].live) throw InvariantViolation("root must be a live node");
    root_ = id;
    ++version_;
}

std::size_t ArithmeticCircuit::garbage_collect() {
    if (root_ == kNoNode) throw InvariantViolation("garbage_collect without a root");
    std::vector<std::uint8_t> reached(nodes_.size(), 0);
    std::vector<NodeId> stack{root_};
    reached[root_] = 1;
    while (!stack.empty()) {
        NodeId id = stack.back();
        stack.pop_back();
        for (NodeId c : nodes_[id].children) {
            if (!reached[c]) {
                reached[c] = 1;
                stack.push_back(c);
            }
        }
    }
    std::size_t removed = 0;
    for (NodeId id = 0; id < nodes_.size(); ++id) {
        auto& n = nodes_[id];
        if (!n.live || reached[id] || n.kind == NodeKind::Indicator) continue;
        n.live = false;
        edge_count_ -= n.children.size();
        std::vector<NodeId>().swap(n.children);
        if (n.kind == NodeKind::Parameter) {
            --parameter_count_;
            auto& slots = params_by_dist_[n.dist];
            slots[n.value] = kNoNode;
            if (std::all_of(slots.begin(), slots.end(), [](NodeId s) { return s == kNoNode; }))
                std::vector<NodeId>().swap(slots);
        }
        --live_count_;
        ++removed;
    }
    rebuild_schedule();
    ++version_;
    return removed;
}

void ArithmeticCircuit::rebuild_schedule() {
    order_.clear();
    std::vector<std::uint32_t> position(nodes_.size(), std::numeric_limits<std::uint32_t>::max());
    std::vector<std::uint8_t> state(nodes_.size(), 0);  // 0 new, 1 open, 2 done
    std::vector<std::pair<NodeId, std::size_t>> stack{{root_, 0}};
    state[root_] = 1;
    while (!stack.empty()) {
        auto& [id, next] = stack.back();
        const auto& ch = nodes_[id].children;
        if (next < ch.size()) {
            NodeId c = ch[next++];
            if (state[c] == 0) {
                state[c] = 1;
                stack.emplace_back(c, 0);
            } else if (state[c] == 1) {
                throw InvariantViolation("cycle through node " + std::to_string(c));
            }
            continue;
        }
        state[id] = 2;
        position[id] = static_cast<std::uint32_t>(order_.size());
        order_.push_back(id);
        stack.pop_back();
    }
    child_offsets_.assign(1, 0);
    child_positions_.clear();
    for (NodeId id : order_) {
        for (NodeId c : nodes_[id].children) child_positions_.push_back(position[c]);
        child_offsets_.push_back(static_cast<std::uint32_t>(child_positions_.size()));
    }
}

double ArithmeticCircuit::evaluate(const EvidenceVector& evidence, std::size_t* visits) const {
    if (evidence.num_vars() != arities_.size()) throw DataError("evidence has the wrong number of variables");
    for (VarId v = 0; v < arities_.size(); ++v)
        if (evidence.arity(v) != arities_[v]) throw DataError("evidence arity mismatch");
    evidence.validate();
    std::vector<double> value(order_.size());
    for (std::size_t p = 0; p < order_.size(); ++p) {
        const auto& n = nodes_[order_[p]];
        switch (n.kind) {
            case NodeKind::Indicator: value[p] = evidence.get(n.var, n.value) ? 1.0 : 0.0; break;
            case NodeKind::Parameter: value[p] = n.weight; break;
            case NodeKind::Sum: {
                double s = 0.0;
                for (auto k = child_offsets_[p]; k < child_offsets_[p + 1]; ++k) s += value[child_positions_[k]];
                value[p] = s;
                break;
            }
            case NodeKind::Product: {
                double s = 1.0;
                for (auto k = child_offsets_[p]; k < child_offsets_[p + 1]; ++k) {
                    s *= value[child_positions_[k]];
                    if (s == 0.0) break;
                }
                value[p] = s;
                break;
            }
        }
    }
    if (visits) *visits += order_.size();
    return value.back();
}

double ArithmeticCircuit::evaluate_log(const EvidenceVector& evidence, std::size_t* visits) const {
    if (evidence.num_vars() != arities_.size()) throw DataError("evidence has the wrong number of variables");
    for (VarId v = 0; v < arities_.size(); ++v)
        if (evidence.arity(v) != arities_[v]) throw DataError("evidence arity mismatch");
    evidence.validate();
    constexpr double kNegInf = -std::numeric_limits<double>::infinity();
    std::vector<double> value(order_.size());
    for (std::size_t p = 0; p < order_.size(); ++p) {
        const auto& n = nodes_[order_[p]];
        switch (n.kind) {
            case NodeKind::Indicator: value[p] = evidence.get(n.var, n.value) ? 0.0 : kNegInf; break;
            case NodeKind::Parameter: value[p] = n.weight > 0.0 ? std::log(n.weight) : kNegInf; break;
            case NodeKind::Sum: {
                double hi = kNegInf;
                for (auto k = child_offsets_[p]; k < child_offsets_[p + 1]; ++k)
                    hi = std::max(hi, value[child_positions_[k]]);
                if (hi == kNegInf) {
                    value[p] = kNegInf;
                    break;
                }
                double s = 0.0;
                for (auto k = child_offsets_[p]; k < child_offsets_[p + 1]; ++k)
                    s += std::exp(value[child_positions_[k]] - hi);
                value[p] = hi + std::log(s);
                break;
            }
            case NodeKind::Product: {
                double s = 0.0;
                for (auto k = child_offsets_[p]; k < child_offsets_[p + 1]; ++k) {
                    s += value[child_positions_[k]];
                    if (s == kNegInf) break;
                }
                value[p] = s;
                break;
            }
        }
    }
    if (visits) *visits += order_.size();
    return value.back();
}

std::size_t ArithmeticCircuit::count_edges() const {
    std::size_t total = 0;
    for (NodeId id : order_) total += nodes_[id].children.size();
    return total;
}

std::size_t ArithmeticCircuit::count_parameters() const {
    return static_cast<std::size_t>(std::count_if(order_.begin(), order_.end(), [this](NodeId id) {
        return nodes_[id].kind == NodeKind::Parameter;
    }));
}

NodeId ArithmeticCircuit::indicator(VarId var, ValueIndex value) const {
    if (var >= arities_.size() || value >= arities_[var])
        throw DataError("unknown indicator " + std::to_string(var) + "=" + std::to_string(value));
    return indicators_[indicator_offsets_[var] + value];
}

NodeId ArithmeticCircuit::parameter(DistId dist, ValueIndex value) const {
    if (dist >= params_by_dist_.size() || value >= params_by_dist_[dist].size()) return kNoNode;
    return params_by_dist_[dist][value];
}

std::vector<NodeId> ArithmeticCircuit::parameters_of(DistId dist) const {
    if (dist >= params_by_dist_.size()) return {};
    return params_by_dist_[dist];
}

// ---------------------------------------------------------------------------
// ParentIndex

ParentIndex::ParentIndex(const ArithmeticCircuit& circuit) {
    const auto n = circuit.arena_size();
    std::vector<std::size_t> counts(n + 1, 0);
    for (NodeId id : circuit.schedule())
        for (NodeId c : circuit.node(id).children) ++counts[c + 1];
    offsets_.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) offsets_[i + 1] = offsets_[i] + counts[i + 1];
    parents_.resize(offsets_[n]);
    std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
    for (NodeId id : circuit.schedule())
        for (NodeId c : circuit.node(id).children) parents_[fill[c]++] = id;
}

}  // namespace aclearn
