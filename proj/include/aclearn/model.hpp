#ifndef ACLEARN_MODEL_HPP
#define ACLEARN_MODEL_HPP

#include <vector>

#include "aclearn/bn.hpp"
#include "aclearn/circuit.hpp"
#include "aclearn/split_ac.hpp"

namespace aclearn {

// The two views of a learned model, kept in lockstep.
struct Model {
    BayesianNetwork bn;
    ArithmeticCircuit circuit;
};

// Product-of-marginals circuit for a network with no arcs.
ArithmeticCircuit build_initial_circuit(const BayesianNetwork& bn);
Model initial_model(const Dataset& data, Estimator estimator = Estimator::Laplace);

struct AppliedSplit {
    std::vector<DistId> new_leaves;
    SplitOutcome outcome;
};

// Applies a valid split to the tree and to the circuit.
AppliedSplit apply_split(Model& model, const Split& split, const Dataset& data);
AppliedSplit apply_split(Model& model, const Split& split, const Dataset& data, const ParentIndex& parents);

}  // namespace aclearn

#endif  // ACLEARN_MODEL_HPP
