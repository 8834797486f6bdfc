#include "aclearn/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <random>

#include "aclearn/errors.hpp"

namespace aclearn {

std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw DataError("split fraction must lie in (0, 1)");
    std::vector<std::size_t> ids(data.rows());
    std::iota(ids.begin(), ids.end(), 0);
    std::mt19937_64 rng(seed);
    for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rng() % i]);
    const auto k = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(data.rows())));
    std::vector<std::size_t> first(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k));
    std::vector<std::size_t> second(ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end());
    std::sort(first.begin(), first.end());
    std::sort(second.begin(), second.end());
    return {data.subset(first), data.subset(second)};
}

std::vector<double> per_example_log_likelihood(const ArithmeticCircuit& circuit, const Dataset& data) {
    if (data.arities() != circuit.arities()) throw DataError("dataset arities do not match the model");
    std::vector<double> out;
    out.reserve(data.rows());
    EvidenceVector ev(circuit.arities());
    for (std::size_t r = 0; r < data.rows(); ++r) {
        auto row = data.row(r);
        for (VarId v = 0; v < row.size(); ++v) ev.observe(v, row[v]);
        out.push_back(circuit.evaluate_log(ev));
    }
    return out;
}

ModelStats model_stats(const Model& model) {
    ModelStats s;
    s.nodes = model.circuit.live_node_count();
    s.edges = model.circuit.edge_count();
    s.parameters = model.circuit.parameter_count();
    s.leaves = model.bn.live_leaf_count();
    std::size_t total = 0;
    for (VarId v = 0; v < model.bn.num_vars(); ++v) {
        total += model.bn.parents(v).size();
        s.max_parents = std::max(s.max_parents, model.bn.parents(v).size());
    }
    if (model.bn.num_vars()) s.avg_parents = static_cast<double>(total) / static_cast<double>(model.bn.num_vars());
    s.treewidth = estimate_treewidth_minfill(model.bn);
    return s;
}

void TuningGrid::validate() const {
    if (k_e.empty() || k_p.empty()) throw DataError("tuning grid is empty");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
        throw DataError("validation fraction must lie in (0, 1)");
}

TuningResult tune(const Dataset& data, const TuningGrid& grid, const LearnerConfig& base, std::uint64_t seed) {
    grid.validate();
    auto [train, holdout] = split_dataset(data, 1.0 - grid.validation_fraction, seed);
    if (train.rows() == 0 || holdout.rows() == 0) throw DataError("dataset too small to hold out a validation part");
    std::vector<std::future<TuningRow>> cells;
    for (double ke : grid.k_e) {
        for (double kp : grid.k_p) {
            LearnerConfig cfg = base;
            cfg.k_e = ke;
            cfg.k_p = kp;
            cells.push_back(std::async(std::launch::async, [cfg, &train, &holdout] {
                auto learned = learn(train, cfg);
                TuningRow row{cfg.k_e, cfg.k_p, learned.trace.size(), learned.model.circuit.edge_count(), 0.0};
                row.holdout_ll = log_likelihood(learned.model.bn, holdout) / static_cast<double>(holdout.rows());
                return row;
            }));
        }
    }
    TuningResult result;
    for (auto& cell : cells) {
        auto row = cell.get();
        if (result.rows.empty() || row.holdout_ll > result.rows[result.best].holdout_ll)
            result.best = result.rows.size();
        result.rows.push_back(row);
    }
    LearnerConfig cfg = base;
    cfg.k_e = result.rows[result.best].k_e;
    cfg.k_p = result.rows[result.best].k_p;
    result.final = learn(data, cfg);
    return result;
}

}  // namespace aclearn
