#include "aclearn/bn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "aclearn/errors.hpp"

namespace aclearn {

const char* to_string(Estimator e) {
    return e == Estimator::Laplace ? "laplace" : "ml";
}

Estimator parse_estimator(const std::string& name) {
    if (name == "laplace") return Estimator::Laplace;
    if (name == "ml") return Estimator::MaximumLikelihood;
    throw DataError("unknown estimator '" + name + "' (expected laplace or ml)");
}

std::vector<double> estimate_leaf_distribution(std::span<const std::uint64_t> counts, Estimator estimator) {
    if (counts.size() < 2) throw DataError("a leaf distribution needs arity >= 2");
    const double k = static_cast<double>(counts.size());
    const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}));
    std::vector<double> theta(counts.size());
    if (estimator == Estimator::MaximumLikelihood && total > 0) {
        for (std::size_t v = 0; v < counts.size(); ++v) theta[v] = static_cast<double>(counts[v]) / total;
    } else if (estimator == Estimator::MaximumLikelihood) {
        std::fill(theta.begin(), theta.end(), 1.0 / k);
    } else {
        for (std::size_t v = 0; v < counts.size(); ++v)
            theta[v] = (static_cast<double>(counts[v]) + 1.0) / (total + k);
    }
    return theta;
}

double count_log_likelihood(std::span<const std::uint64_t> counts, std::span<const double> theta) {
    double ll = 0.0;
    for (std::size_t v = 0; v < counts.size(); ++v)
        if (counts[v] > 0) ll += static_cast<double>(counts[v]) * std::log(theta[v]);
    return ll;
}

DistId DecisionTreeCpd::leaf_for(std::span<const ValueIndex> assignment) const {
    return leaf_for_lookup([&](VarId v) { return assignment[v]; });
}

// ---------------------------------------------------------------------------

BayesianNetwork BayesianNetwork::from_data(const Dataset& data, Estimator estimator) {
    BayesianNetwork bn;
    bn.arities_ = data.arities();
    bn.estimator_ = estimator;
    const auto n = data.num_vars();
    std::vector<std::uint32_t> all_rows(data.rows());
    std::iota(all_rows.begin(), all_rows.end(), 0u);
    for (VarId v = 0; v < n; ++v) {
        LeafDistribution leaf;
        leaf.id = v;
        leaf.var = v;
        leaf.counts.assign(bn.arities_[v], 0);
        for (std::size_t r = 0; r < data.rows(); ++r) ++leaf.counts[data.at(r, v)];
        leaf.theta = estimate_leaf_distribution(leaf.counts, estimator);
        leaf.rows = all_rows;
        bn.leaves_.push_back(std::move(leaf));
        bn.cpds_.emplace_back(v, v);
    }
    bn.rebuild_structure();
    return bn;
}

BayesianNetwork BayesianNetwork::from_trees(std::vector<std::uint32_t> arities, Estimator estimator,
                                            const std::vector<std::vector<SerializedNode>>& trees) {
    BayesianNetwork bn;
    bn.arities_ = std::move(arities);
    bn.estimator_ = estimator;
    const auto n = bn.arities_.size();
    if (trees.size() != n) throw DataError("network: expected one tree per variable");
    for (auto a : bn.arities_)
        if (a < 2 || a > kMaxArity) throw DataError("network: arity out of range");

    for (VarId v = 0; v < n; ++v) {
        DecisionTreeCpd cpd;
        cpd.var_ = v;
        std::size_t pos = 0;
        std::vector<std::pair<VarId, ValueIndex>> path;
        // Preorder reconstruction with an explicit stack of (tree node, next child value).
        auto make_node = [&](auto&& self) -> std::uint32_t {
            if (pos >= trees[v].size()) throw DataError("network: truncated tree for variable " + std::to_string(v));
            const auto& sn = trees[v][pos++];
            auto k = static_cast<std::uint32_t>(cpd.nodes_.size());
            cpd.nodes_.push_back(TreeNode{});
            if (sn.split_var == TreeNode::kLeaf) {
                const auto& sl = sn.leaf;
                if (sl.theta.size() != bn.arities_[v] || sl.counts.size() != bn.arities_[v])
                    throw DataError("network: leaf size mismatch for variable " + std::to_string(v));
                if (sl.id >= bn.leaves_.size()) bn.leaves_.resize(sl.id + 1, LeafDistribution{0, 0, false, 0, {}, {}, {}, {}});
                if (bn.leaves_[sl.id].live) throw DataError("network: duplicate leaf id " + std::to_string(sl.id));
                auto& leaf = bn.leaves_[sl.id];
                leaf.id = sl.id;
                leaf.var = v;
                leaf.live = true;
                leaf.tree_node = k;
                leaf.theta = sl.theta;
                leaf.counts = sl.counts;
                leaf.path = path;
                cpd.nodes_[k].leaf = sl.id;
                return k;
            }
            if (sn.split_var >= n || sn.split_var == v) throw DataError("network: bad split variable");
            for (auto& [pv, unused] : path)
                if (pv == sn.split_var) throw DataError("network: variable repeated on a tree path");
            cpd.nodes_[k].split_var = sn.split_var;
            for (ValueIndex i = 0; i < bn.arities_[sn.split_var]; ++i) {
                path.emplace_back(sn.split_var, i);
                auto child = self(self);
                path.pop_back();
                cpd.nodes_[k].children.push_back(child);
            }
            return k;
        };
        make_node(make_node);
        if (pos != trees[v].size()) throw DataError("network: trailing nodes in tree for variable " + std::to_string(v));
        bn.cpds_.push_back(std::move(cpd));
    }
    bn.rebuild_structure();
    for (VarId v = 0; v < n; ++v)
        if (bn.is_descendant(v, v)) throw DataError("network: parent arcs contain a cycle");
    return bn;
}

const LeafDistribution& BayesianNetwork::leaf(DistId id) const {
    if (id >= leaves_.size()) throw DataError("unknown leaf distribution " + std::to_string(id));
    return leaves_[id];
}

std::vector<DistId> BayesianNetwork::live_leaves() const {
    std::vector<DistId> out;
    for (const auto& l : leaves_)
        if (l.live) out.push_back(l.id);
    return out;
}

std::size_t BayesianNetwork::live_leaf_count() const {
    return static_cast<std::size_t>(std::count_if(leaves_.begin(), leaves_.end(), [](const auto& l) { return l.live; }));
}

void BayesianNetwork::rebuild_structure() {
    const auto n = arities_.size();
    parents_.assign(n, {});
    children_.assign(n, {});
    for (VarId v = 0; v < n; ++v) {
        for (const auto& tn : cpds_[v].nodes_)
            if (!tn.is_leaf()) parents_[v].push_back(tn.split_var);
        std::sort(parents_[v].begin(), parents_[v].end());
        parents_[v].erase(std::unique(parents_[v].begin(), parents_[v].end()), parents_[v].end());
        for (VarId p : parents_[v]) children_[p].push_back(v);
    }
    descendant_.assign(n * n, 0);
    std::vector<VarId> stack;
    for (VarId s = 0; s < n; ++s) {
        stack.assign(children_[s].begin(), children_[s].end());
        while (!stack.empty()) {
            VarId x = stack.back();
            stack.pop_back();
            if (descendant_[s * n + x]) continue;
            descendant_[s * n + x] = 1;
            for (VarId c : children_[x]) stack.push_back(c);
        }
    }
}

bool BayesianNetwork::is_valid_split(const Split& split) const {
    if (split.target >= num_vars() || split.split_var >= num_vars()) throw DataError("split references unknown variable");
    const auto& l = leaf(split.leaf);
    if (!l.live || l.var != split.target) throw DataError("split references a stale leaf");
    if (split.split_var == split.target) return false;
    if (is_descendant(split.target, split.split_var)) return false;
    for (auto& [pv, unused] : l.path)
        if (pv == split.split_var) return false;
    return true;
}

SplitCounts BayesianNetwork::split_counts(const Split& split, const Dataset& data) const {
    const auto& l = leaf(split.leaf);
    SplitCounts counts(arities_[split.split_var], std::vector<std::uint64_t>(arities_[split.target], 0));
    for (auto r : l.rows) ++counts[data.at(r, split.split_var)][data.at(r, split.target)];
    return counts;
}

std::vector<DistId> BayesianNetwork::apply_split(const Split& split, const Dataset& data) {
    if (!is_valid_split(split)) throw DataError("split is not valid");
    const auto k = arities_[split.split_var];
    const auto parent_node = leaves_[split.leaf].tree_node;
    auto& cpd = cpds_[split.target];

    std::vector<std::vector<std::uint32_t>> rows(k);
    for (auto r : leaves_[split.leaf].rows) rows[data.at(r, split.split_var)].push_back(r);

    std::vector<DistId> created;
    for (ValueIndex i = 0; i < k; ++i) {
        LeafDistribution d;
        d.id = static_cast<DistId>(leaves_.size());
        d.var = split.target;
        d.counts.assign(arities_[split.target], 0);
        for (auto r : rows[i]) ++d.counts[data.at(r, split.target)];
        d.theta = estimate_leaf_distribution(d.counts, estimator_);
        d.path = leaves_[split.leaf].path;
        d.path.emplace_back(split.split_var, i);
        d.rows = std::move(rows[i]);
        d.tree_node = static_cast<std::uint32_t>(cpd.nodes_.size());
        cpd.nodes_.push_back(TreeNode{TreeNode::kLeaf, {}, d.id});
        cpd.nodes_[parent_node].children.push_back(d.tree_node);
        created.push_back(d.id);
        leaves_.push_back(std::move(d));
    }
    cpd.nodes_[parent_node].split_var = split.split_var;
    auto& old = leaves_[split.leaf];
    old.live = false;
    std::vector<std::uint32_t>().swap(old.rows);
    rebuild_structure();
    return created;
}

double BayesianNetwork::log_likelihood() const {
    double ll = 0.0;
    for (const auto& l : leaves_)
        if (l.live) ll += count_log_likelihood(l.counts, l.theta);
    return ll;
}

double BayesianNetwork::log_joint_probability(std::span<const ValueIndex> assignment) const {
    if (assignment.size() != num_vars()) throw DataError("joint probability needs a complete assignment");
    double lp = 0.0;
    for (VarId v = 0; v < num_vars(); ++v) {
        if (assignment[v] >= arities_[v]) throw DataError("assignment value out of range");
        lp += std::log(leaves_[cpds_[v].leaf_for(assignment)].theta[assignment[v]]);
    }
    return lp;
}

double BayesianNetwork::joint_probability(std::span<const ValueIndex> assignment) const {
    if (assignment.size() != num_vars()) throw DataError("joint probability needs a complete assignment");
    double p = 1.0;
    for (VarId v = 0; v < num_vars(); ++v) {
        if (assignment[v] >= arities_[v]) throw DataError("assignment value out of range");
        p *= leaves_[cpds_[v].leaf_for(assignment)].theta[assignment[v]];
    }
    return p;
}

double likelihood_gain(const BayesianNetwork& bn, const Split& split, const SplitCounts& counts) {
    const auto& l = bn.leaf(split.leaf);
    double gain = -count_log_likelihood(l.counts, l.theta);
    for (const auto& c : counts) gain += count_log_likelihood(c, estimate_leaf_distribution(c, bn.estimator()));
    return gain;
}

double likelihood_gain(const BayesianNetwork& bn, const Split& split, const Dataset& data) {
    return likelihood_gain(bn, split, bn.split_counts(split, data));
}

double log_likelihood(const BayesianNetwork& bn, const Dataset& data) {
    if (data.arities() != bn.arities()) throw DataError("dataset does not match the network's variables");
    double ll = 0.0;
    for (std::size_t r = 0; r < data.rows(); ++r) {
        auto row = data.row(r);
        for (VarId v = 0; v < bn.num_vars(); ++v) {
            DistId d = bn.cpd(v).leaf_for_lookup([&](VarId p) { return row[p]; });
            ll += std::log(bn.leaf(d).theta[row[v]]);
        }
    }
    return ll;
}

}  // namespace aclearn
