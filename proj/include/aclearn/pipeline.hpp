#ifndef ACLEARN_PIPELINE_HPP
#define ACLEARN_PIPELINE_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include "aclearn/dataset.hpp"
#include "aclearn/learner.hpp"
#include "aclearn/model.hpp"
#include "aclearn/treewidth.hpp"

namespace aclearn {

// Shuffles rows with `seed` and puts round(fraction * rows) of them in the
// first part. Rows keep their original order within each part.
std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double fraction, std::uint64_t seed);

// Natural-log probability of each row under the circuit.
std::vector<double> per_example_log_likelihood(const ArithmeticCircuit& circuit, const Dataset& data);

struct ModelStats {
    std::size_t nodes = 0;
    std::size_t edges = 0;
    std::size_t parameters = 0;
    std::size_t leaves = 0;
    double avg_parents = 0.0;
    std::size_t max_parents = 0;
    EliminationResult treewidth;  // min-fill width and the order that produced it
};

ModelStats model_stats(const Model& model);

struct TuningGrid {
    std::vector<double> k_e;
    std::vector<double> k_p{0.0};
    double validation_fraction = 0.1;

    // Throws DataError on an empty grid or a fraction outside (0, 1).
    void validate() const;
};

struct TuningRow {
    double k_e = 0.0;
    double k_p = 0.0;
    std::size_t splits = 0;
    std::size_t edges = 0;
    double holdout_ll = 0.0;  // per held-out row
};

struct TuningResult {
    std::vector<TuningRow> rows;  // grid order: k_e outer, k_p inner
    std::size_t best = 0;         // first row with the highest holdout LL
    LearnResult final;            // retrained on all of `data`
};

// Learns on the training part of a seeded split for each grid cell, scores
// the held-out part, then retrains the best cell on all of `data`. `base`
// supplies every setting except the penalties.
TuningResult tune(const Dataset& data, const TuningGrid& grid, const LearnerConfig& base, std::uint64_t seed);

}  // namespace aclearn

#endif  // ACLEARN_PIPELINE_HPP
