#ifndef ACLEARN_LEARNER_HPP
#define ACLEARN_LEARNER_HPP

#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "aclearn/bn.hpp"
#include "aclearn/dataset.hpp"
#include "aclearn/model.hpp"
#include "aclearn/split_ac.hpp"

namespace aclearn {

enum class SearchMode { Greedy, Quick };

const char* to_string(SearchMode mode);
SearchMode parse_search_mode(const std::string& name);

struct LearnerConfig {
    double k_e = 0.02;  // per-edge penalty
    double k_p = 0.0;   // per-parameter penalty
    SearchMode mode = SearchMode::Greedy;
    std::size_t max_splits = std::numeric_limits<std::size_t>::max();
    double max_seconds = std::numeric_limits<double>::infinity();
    Estimator estimator = Estimator::Laplace;
    std::uint64_t seed = 0;
    // Stop edge-cost dry runs once a candidate can no longer win.
    bool early_abort = true;

    // Throws DataError on negative or non-finite penalties.
    void validate() const;
};

struct SplitCandidate {
    std::uint64_t seq = 0;  // creation order; also the index into the candidate table
    Split split;
    double gain = 0.0;
    std::int64_t param_delta = 0;
    bool live = true;

    bool cost_known = false;
    bool cost_is_bound = false;  // `cost` is a lower bound from an aborted dry run
    bool stale = false;
    std::int64_t cost = 0;
    // Interior nodes whose change can alter the cost, as of the last computation.
    std::vector<NodeId> footprint;
};

// LL - k_e * edges - k_p * parameters.
double penalized_score(double log_likelihood, std::size_t edges, std::size_t parameters, double k_e, double k_p);

// gain - k_e * cost - k_p * param_delta.
double candidate_score_gain(const SplitCandidate& c, std::int64_t cost, double k_e, double k_p);

// Computes a candidate's edge cost, optionally aborting above a threshold.
using CostFunction = std::function<EdgeCost(SplitCandidate&, std::optional<std::int64_t> abort_above)>;

struct SelectionResult {
    std::optional<std::uint64_t> seq;
    double score_gain = 0.0;
    std::size_t cost_computations = 0;
    std::size_t stale_recomputes = 0;
};

// Picks the candidate with the highest positive score gain. `order` lists live
// candidate seqs by decreasing gain, earliest first among equal gains.
// Candidates are visited in that order until no later one can win. Costs not
// yet known are computed; greedy mode recomputes stale costs on visit, quick
// mode trusts a stale cost unless it would make the candidate the incumbent.
// Ties go to the earliest-created candidate. Updates the candidates' caches.
SelectionResult select_split(const std::vector<std::uint64_t>& order, std::vector<SplitCandidate>& candidates,
                             const LearnerConfig& config, const CostFunction& cost_of);

struct IterationRecord {
    std::size_t iteration = 0;
    Split split;
    std::vector<std::pair<VarId, ValueIndex>> leaf_path;
    double gain = 0.0;
    std::int64_t edge_cost = 0;
    std::int64_t param_delta = 0;
    double score_gain = 0.0;
    std::size_t edges = 0;
    std::size_t parameters = 0;
    double log_likelihood = 0.0;
    double score = 0.0;
    std::size_t candidates = 0;
    std::size_t cost_computations = 0;  // dry runs during this iteration's selection
    std::size_t stale_recomputes = 0;   // of which on stale candidates
    std::size_t marked_stale = 0;       // candidates invalidated by the applied split
    double wall_seconds = 0.0;
};

// Without timing the line depends only on the inputs.
std::string to_json_line(const IterationRecord& record, bool with_timing = true);

// Greedy split search over a BN with tree CPDs and its arithmetic circuit,
// scoring log-likelihood minus per-edge and per-parameter penalties.
class Learner {
public:
    Learner(const Dataset& data, LearnerConfig config);

    // Selects and applies the best split; nullopt when no split has positive
    // score gain or a limit is reached (see stop_reason()).
    std::optional<IterationRecord> step();
    // Runs step() to completion and returns the trace.
    std::vector<IterationRecord> run();

    const Model& model() const { return model_; }
    const LearnerConfig& config() const { return config_; }
    const std::string& stop_reason() const { return stop_reason_; }
    double log_likelihood() const { return model_.bn.log_likelihood(); }
    double score() const;
    double initial_score() const { return initial_score_; }
    std::size_t initial_edges() const { return initial_edges_; }

    const std::vector<SplitCandidate>& candidates() const { return candidates_; }
    std::vector<std::uint64_t> live_candidates() const;
    double score_gain(const SplitCandidate& c, std::int64_t cost) const;
    // Computes a fresh exact cost for a candidate, refreshing its cache.
    void refresh_cost(std::uint64_t seq);

    std::size_t total_cost_computations() const { return total_computations_; }
    std::size_t total_stale_recomputes() const { return total_stale_recomputes_; }

private:
    void add_candidates(DistId leaf);
    EdgeCost compute_cost(SplitCandidate& c, std::optional<std::int64_t> abort_above);
    const ParentIndex& parents();

    const Dataset& data_;
    LearnerConfig config_;
    Model model_;
    std::vector<SplitCandidate> candidates_;
    // (gain, seq), highest gain first, then earliest.
    struct ByGain {
        bool operator()(const std::pair<double, std::uint64_t>& a, const std::pair<double, std::uint64_t>& b) const {
            return a.first != b.first ? a.first > b.first : a.second < b.second;
        }
    };
    std::set<std::pair<double, std::uint64_t>, ByGain> order_;
    std::vector<std::vector<std::uint64_t>> by_leaf_;
    std::optional<ParentIndex> parents_;

    std::string stop_reason_;
    std::size_t iteration_ = 0;
    double initial_score_ = 0.0;
    std::size_t initial_edges_ = 0;
    std::size_t total_computations_ = 0;
    std::size_t total_stale_recomputes_ = 0;
    std::chrono::steady_clock::time_point start_;
};

struct LearnResult {
    Model model;
    std::vector<IterationRecord> trace;
    std::string stop_reason;
    double initial_score = 0.0;
    std::size_t initial_edges = 0;
    std::size_t cost_computations = 0;
    std::size_t stale_recomputes = 0;
};

LearnResult learn(const Dataset& data, const LearnerConfig& config);

}  // namespace aclearn

#endif  // ACLEARN_LEARNER_HPP
