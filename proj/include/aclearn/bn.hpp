#ifndef ACLEARN_BN_HPP
#define ACLEARN_BN_HPP

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aclearn/dataset.hpp"
#include "aclearn/types.hpp"

namespace aclearn {

// Laplace is the posterior mean under a flat Dirichlet, (n_v + 1) / (N + k).
// MaximumLikelihood is the flat-Dirichlet mode, n_v / N (uniform when N == 0),
// and may produce zero parameters.
enum class Estimator { Laplace, MaximumLikelihood };

const char* to_string(Estimator e);
Estimator parse_estimator(const std::string& name);

std::vector<double> estimate_leaf_distribution(std::span<const std::uint64_t> counts,
                                               Estimator estimator = Estimator::Laplace);

// sum_v counts[v] * log(theta[v]); zero counts contribute nothing.
double count_log_likelihood(std::span<const std::uint64_t> counts, std::span<const double> theta);

// S(D, V): replace leaf `leaf` of `target`'s tree by one leaf per value of `split_var`.
struct Split {
    VarId target = 0;
    DistId leaf = 0;
    VarId split_var = 0;

    friend bool operator==(const Split&, const Split&) = default;
};

struct LeafDistribution {
    DistId id = 0;
    VarId var = 0;
    bool live = true;
    std::uint32_t tree_node = 0;
    std::vector<double> theta;
    std::vector<std::uint64_t> counts;
    // (variable, value) constraints from the tree root down to this leaf.
    std::vector<std::pair<VarId, ValueIndex>> path;
    // Training rows reaching the leaf; empty for models loaded from disk.
    std::vector<std::uint32_t> rows;
};

struct TreeNode {
    static constexpr VarId kLeaf = static_cast<VarId>(-1);
    VarId split_var = kLeaf;
    std::vector<std::uint32_t> children;  // indexed by value of split_var
    DistId leaf = 0;                      // valid when split_var == kLeaf

    bool is_leaf() const { return split_var == kLeaf; }
};

class DecisionTreeCpd {
public:
    DecisionTreeCpd() = default;
    DecisionTreeCpd(VarId var, DistId root_leaf) : var_(var), nodes_{TreeNode{TreeNode::kLeaf, {}, root_leaf}} {}

    VarId var() const { return var_; }
    const std::vector<TreeNode>& nodes() const { return nodes_; }
    // Leaf reached by walking the tree under a complete assignment.
    DistId leaf_for(std::span<const ValueIndex> assignment) const;
    template <class Lookup>
    DistId leaf_for_lookup(Lookup&& value_of) const {
        std::uint32_t k = 0;
        while (!nodes_[k].is_leaf()) k = nodes_[k].children[value_of(nodes_[k].split_var)];
        return nodes_[k].leaf;
    }

private:
    friend class BayesianNetwork;
    VarId var_ = 0;
    std::vector<TreeNode> nodes_;
};

// Per-value-of-V count vectors of the target variable at one leaf.
using SplitCounts = std::vector<std::vector<std::uint64_t>>;

// A Bayesian network whose CPDs are decision trees with multinomial leaves.
// Leaf distribution ids are global; the root leaf of variable i has id i.
class BayesianNetwork {
public:
    BayesianNetwork() = default;
    // Empty network whose root leaves are estimated from `data`.
    static BayesianNetwork from_data(const Dataset& data, Estimator estimator = Estimator::Laplace);

    std::size_t num_vars() const { return arities_.size(); }
    std::uint32_t arity(VarId v) const { return arities_[v]; }
    const std::vector<std::uint32_t>& arities() const { return arities_; }
    Estimator estimator() const { return estimator_; }

    const DecisionTreeCpd& cpd(VarId v) const { return cpds_[v]; }
    const LeafDistribution& leaf(DistId id) const;
    std::size_t leaf_slots() const { return leaves_.size(); }
    std::vector<DistId> live_leaves() const;
    std::size_t live_leaf_count() const;

    // Sorted parent set (variables labeling interior nodes of v's tree).
    const std::vector<VarId>& parents(VarId v) const { return parents_[v]; }
    // Variables having v as a parent, sorted.
    const std::vector<VarId>& children(VarId v) const { return children_[v]; }
    // True iff there is a directed path of length >= 1 from `from` to `to`.
    bool is_descendant(VarId from, VarId to) const { return descendant_[from * arities_.size() + to] != 0; }

    // Throws DataError if the leaf is stale or does not belong to the target.
    bool is_valid_split(const Split& split) const;
    SplitCounts split_counts(const Split& split, const Dataset& data) const;
    // Applies a valid split; returns the new leaf ids indexed by value of split_var.
    std::vector<DistId> apply_split(const Split& split, const Dataset& data);

    // Sum over live leaves of count-weighted log theta.
    double log_likelihood() const;
    double joint_probability(std::span<const ValueIndex> assignment) const;
    double log_joint_probability(std::span<const ValueIndex> assignment) const;

    // Rebuilds a network from explicit trees (used when loading models).
    struct SerializedLeaf {
        DistId id;
        std::vector<double> theta;
        std::vector<std::uint64_t> counts;
    };
    struct SerializedNode {
        VarId split_var;  // TreeNode::kLeaf for leaves
        SerializedLeaf leaf;
    };
    // Trees are given in preorder, children in value order.
    static BayesianNetwork from_trees(std::vector<std::uint32_t> arities, Estimator estimator,
                                      const std::vector<std::vector<SerializedNode>>& trees);

private:
    void rebuild_structure();

    std::vector<std::uint32_t> arities_;
    Estimator estimator_ = Estimator::Laplace;
    std::vector<DecisionTreeCpd> cpds_;
    std::vector<LeafDistribution> leaves_;
    std::vector<std::vector<VarId>> parents_;
    std::vector<std::vector<VarId>> children_;
    std::vector<std::uint8_t> descendant_;
};

// Log-likelihood change of a split using the network's estimator on both sides.
double likelihood_gain(const BayesianNetwork& bn, const Split& split, const Dataset& data);
double likelihood_gain(const BayesianNetwork& bn, const Split& split, const SplitCounts& counts);

// Row-by-row log-likelihood of `data` under the network.
double log_likelihood(const BayesianNetwork& bn, const Dataset& data);

}  // namespace aclearn

#endif  // ACLEARN_BN_HPP
