#include "aclearn/model.hpp"

#include "aclearn/errors.hpp"

namespace aclearn {

ArithmeticCircuit build_initial_circuit(const BayesianNetwork& bn) {
    std::vector<std::vector<double>> marginals;
    for (VarId v = 0; v < bn.num_vars(); ++v) {
        const auto& root = bn.cpd(v).nodes().front();
        if (!root.is_leaf()) throw DataError("initial circuit needs a network without arcs");
        marginals.push_back(bn.leaf(root.leaf).theta);
    }
    return ArithmeticCircuit::build_initial(marginals);
}

Model initial_model(const Dataset& data, Estimator estimator) {
    Model m;
    m.bn = BayesianNetwork::from_data(data, estimator);
    m.circuit = build_initial_circuit(m.bn);
    return m;
}

AppliedSplit apply_split(Model& model, const Split& split, const Dataset& data) {
    return apply_split(model, split, data, ParentIndex(model.circuit));
}

AppliedSplit apply_split(Model& model, const Split& split, const Dataset& data, const ParentIndex& parents) {
    if (!model.bn.is_valid_split(split)) throw DataError("split is not valid");
    auto analysis = find_mutual_ancestors(model.circuit, parents, split.leaf, split.split_var);
    AppliedSplit out;
    out.new_leaves = model.bn.apply_split(split, data);
    std::vector<std::vector<double>> thetas;
    for (DistId d : out.new_leaves) thetas.push_back(model.bn.leaf(d).theta);
    out.outcome = split_ac(model.circuit, analysis, out.new_leaves, thetas);
    return out;
}

}  // namespace aclearn
