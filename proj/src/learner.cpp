#include "aclearn/learner.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

#include "aclearn/errors.hpp"
#include "aclearn/split_ac.hpp"

namespace aclearn {

const char* to_string(SearchMode mode) { return mode == SearchMode::Greedy ? "greedy" : "quick"; }

SearchMode parse_search_mode(const std::string& name) {
    if (name == "greedy") return SearchMode::Greedy;
    if (name == "quick") return SearchMode::Quick;
    throw DataError("unknown search mode '" + name + "' (expected greedy or quick)");
}

void LearnerConfig::validate() const {
    if (!(k_e >= 0.0) || !std::isfinite(k_e)) throw DataError("k_e must be a finite value >= 0");
    if (!(k_p >= 0.0) || !std::isfinite(k_p)) throw DataError("k_p must be a finite value >= 0");
    if (!(max_seconds > 0.0)) throw DataError("max_seconds must be positive");
}

std::string to_json_line(const IterationRecord& r, bool with_timing) {
    nlohmann::ordered_json j;
    j["iteration"] = r.iteration;
    j["var"] = r.split.target;
    j["leaf"] = r.split.leaf;
    nlohmann::json path = nlohmann::json::array();
    for (auto [v, x] : r.leaf_path) path.push_back({v, x});
    j["leaf_path"] = path;
    j["split_var"] = r.split.split_var;
    j["gain"] = r.gain;
    j["edge_cost"] = r.edge_cost;
    j["param_delta"] = r.param_delta;
    j["score_gain"] = r.score_gain;
    j["edges"] = r.edges;
    j["parameters"] = r.parameters;
    j["log_likelihood"] = r.log_likelihood;
    j["score"] = r.score;
    j["candidates"] = r.candidates;
    j["cost_computations"] = r.cost_computations;
    j["stale_recomputes"] = r.stale_recomputes;
    j["marked_stale"] = r.marked_stale;
    if (with_timing) j["wall_seconds"] = r.wall_seconds;
    return j.dump();
}

Learner::Learner(const Dataset& data, LearnerConfig config)
    : data_(data), config_(config), start_(std::chrono::steady_clock::now()) {
    config_.validate();
    if (data.rows() == 0) throw DataError("cannot learn from an empty dataset");
    model_ = initial_model(data, config_.estimator);
    initial_score_ = score();
    initial_edges_ = model_.circuit.edge_count();
    for (VarId v = 0; v < data.num_vars(); ++v) add_candidates(v);
}

double penalized_score(double log_likelihood, std::size_t edges, std::size_t parameters, double k_e, double k_p) {
    return log_likelihood - k_e * static_cast<double>(edges) - k_p * static_cast<double>(parameters);
}

double candidate_score_gain(const SplitCandidate& c, std::int64_t cost, double k_e, double k_p) {
    return c.gain - k_e * static_cast<double>(cost) - k_p * static_cast<double>(c.param_delta);
}

SelectionResult select_split(const std::vector<std::uint64_t>& order, std::vector<SplitCandidate>& candidates,
                             const LearnerConfig& config, const CostFunction& cost_of) {
    SelectionResult out;
    auto beats = [&](double s, std::uint64_t seq) {
        if (!(s > 0.0)) return false;
        if (!out.seq) return true;
        return s > out.score_gain || (s == out.score_gain && seq < *out.seq);
    };
    auto gain_of = [&](SplitCandidate& c, std::int64_t cost) { return candidate_score_gain(c, cost, config.k_e, config.k_p); };
    auto compute = [&](SplitCandidate& c) {
        std::optional<std::int64_t> abort_above;
        if (config.early_abort && config.k_e > 0.0) {
            // Largest cost at which the candidate could still reach the bar,
            // plus a unit of slack against rounding.
            const double bar = out.seq ? out.score_gain : 0.0;
            const double limit = std::floor((c.gain - config.k_p * static_cast<double>(c.param_delta) - bar) / config.k_e);
            if (limit < 9e15) abort_above = static_cast<std::int64_t>(std::max(limit, -9e15)) + 1;
        }
        const bool was_stale = c.stale;
        const EdgeCost cost = cost_of(c, abort_above);
        ++out.cost_computations;
        if (was_stale) ++out.stale_recomputes;
        c.cost_known = true;
        c.cost_is_bound = cost.aborted;
        c.cost = cost.edges;
        c.stale = false;
    };
    for (std::uint64_t seq : order) {
        auto& c = candidates[seq];
        // Edge costs are positive, so no later candidate can score above its gain.
        if (out.seq ? c.gain < out.score_gain : !(c.gain > 0.0)) break;
        if (!beats(gain_of(c, 0), seq)) continue;
        if (!c.cost_known) {
            compute(c);
        } else if (c.stale) {
            if (config.mode == SearchMode::Quick && !beats(gain_of(c, c.cost), seq)) continue;
            compute(c);
        } else if (c.cost_is_bound) {
            if (!beats(gain_of(c, c.cost), seq)) continue;
            compute(c);
        }
        if (c.cost_is_bound) continue;
        const double s = gain_of(c, c.cost);
        if (beats(s, seq)) {
            out.seq = seq;
            out.score_gain = s;
        }
    }
    return out;
}

double Learner::score() const {
    return penalized_score(log_likelihood(), model_.circuit.edge_count(), model_.circuit.parameter_count(), config_.k_e,
                           config_.k_p);
}

double Learner::score_gain(const SplitCandidate& c, std::int64_t cost) const {
    return candidate_score_gain(c, cost, config_.k_e, config_.k_p);
}

std::vector<std::uint64_t> Learner::live_candidates() const {
    std::vector<std::uint64_t> out;
    for (const auto& c : candidates_)
        if (c.live) out.push_back(c.seq);
    return out;
}

const ParentIndex& Learner::parents() {
    if (!parents_) parents_.emplace(model_.circuit);
    return *parents_;
}

void Learner::add_candidates(DistId leaf) {
    const VarId target = model_.bn.leaf(leaf).var;
    if (by_leaf_.size() <= leaf) by_leaf_.resize(leaf + 1);
    const auto arity = static_cast<std::int64_t>(model_.bn.arity(target));
    for (VarId v = 0; v < model_.bn.num_vars(); ++v) {
        if (v == target) continue;
        Split s{target, leaf, v};
        if (!model_.bn.is_valid_split(s)) continue;
        SplitCandidate c;
        c.seq = candidates_.size();
        c.split = s;
        c.gain = likelihood_gain(model_.bn, s, model_.bn.split_counts(s, data_));
        c.param_delta = static_cast<std::int64_t>(model_.bn.arity(v)) * arity - arity;
        order_.emplace(c.gain, c.seq);
        by_leaf_[leaf].push_back(c.seq);
        candidates_.push_back(std::move(c));
    }
}

EdgeCost Learner::compute_cost(SplitCandidate& c, std::optional<std::int64_t> abort_above) {
    auto analysis = find_mutual_ancestors(model_.circuit, parents(), c.split.leaf, c.split.split_var);
    const auto cost = edge_cost_dry_run(model_.circuit, analysis, parents(), abort_above);
    c.footprint = analysis.footprint();
    return cost;
}

void Learner::refresh_cost(std::uint64_t seq) {
    auto& c = candidates_.at(seq);
    if (!c.live) throw DataError("candidate " + std::to_string(seq) + " is not live");
    const auto cost = compute_cost(c, std::nullopt);
    c.cost_known = true;
    c.cost_is_bound = false;
    c.cost = cost.edges;
    c.stale = false;
}

std::optional<IterationRecord> Learner::step() {
    if (iteration_ >= config_.max_splits) {
        stop_reason_ = "max_splits";
        return std::nullopt;
    }
    const auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); };
    if (elapsed() >= config_.max_seconds) {
        stop_reason_ = "max_seconds";
        return std::nullopt;
    }
    std::vector<std::uint64_t> order;
    order.reserve(order_.size());
    for (const auto& entry : order_) order.push_back(entry.second);
    const auto chosen = select_split(order, candidates_, config_,
                                     [this](SplitCandidate& c, std::optional<std::int64_t> abort_above) {
                                         return compute_cost(c, abort_above);
                                     });
    total_computations_ += chosen.cost_computations;
    total_stale_recomputes_ += chosen.stale_recomputes;
    if (!chosen.seq) {
        stop_reason_ = "no_improving_split";
        return std::nullopt;
    }
    SplitCandidate& c = candidates_[*chosen.seq];
    IterationRecord rec;
    rec.iteration = ++iteration_;
    rec.split = c.split;
    rec.leaf_path = model_.bn.leaf(c.split.leaf).path;
    rec.gain = c.gain;
    rec.edge_cost = c.cost;
    rec.param_delta = c.param_delta;
    rec.score_gain = chosen.score_gain;
    rec.candidates = order_.size();
    rec.cost_computations = chosen.cost_computations;
    rec.stale_recomputes = chosen.stale_recomputes;

    const auto parents_before = model_.bn.parents(c.split.target);
    const Split split = c.split;
    auto applied = apply_split(model_, split, data_, parents());
    parents_.reset();
    if (applied.outcome.edge_delta() != rec.edge_cost)
        throw InvariantViolation("edge cost " + std::to_string(rec.edge_cost) + " disagrees with applied change " +
                                 std::to_string(applied.outcome.edge_delta()));
    if (static_cast<std::int64_t>(applied.outcome.parameters_after) -
            static_cast<std::int64_t>(applied.outcome.parameters_before) !=
        rec.param_delta)
        throw InvariantViolation("parameter change disagrees with the split's parameter delta");

    for (auto seq : by_leaf_[split.leaf]) {
        candidates_[seq].live = false;
        order_.erase({candidates_[seq].gain, seq});
        candidates_[seq].footprint.clear();
    }

    std::vector<std::uint8_t> changed(model_.circuit.arena_size(), 0);
    for (NodeId id : applied.outcome.changed) changed[id] = 1;
    const bool new_arc = model_.bn.parents(split.target) != parents_before;
    for (auto [gain, seq] : order_) {
        auto& k = candidates_[seq];
        if (k.cost_known && !k.stale &&
            std::any_of(k.footprint.begin(), k.footprint.end(), [&](NodeId id) { return changed[id] != 0; })) {
            k.stale = true;
            ++rec.marked_stale;
        }
    }
    if (new_arc) {
        for (auto it = order_.begin(); it != order_.end();) {
            auto& k = candidates_[it->second];
            if (model_.bn.is_valid_split(k.split)) {
                ++it;
                continue;
            }
            k.live = false;
            k.footprint.clear();
            it = order_.erase(it);
        }
    }
    for (DistId d : applied.new_leaves) add_candidates(d);

    rec.edges = model_.circuit.edge_count();
    rec.parameters = model_.circuit.parameter_count();
    rec.log_likelihood = log_likelihood();
    rec.score = score();
    rec.wall_seconds = elapsed();
    return rec;
}

std::vector<IterationRecord> Learner::run() {
    std::vector<IterationRecord> trace;
    while (auto rec = step()) trace.push_back(std::move(*rec));
    return trace;
}

LearnResult learn(const Dataset& data, const LearnerConfig& config) {
    Learner learner(data, config);
    LearnResult out;
    out.trace = learner.run();
    out.stop_reason = learner.stop_reason();
    out.initial_score = learner.initial_score();
    out.initial_edges = learner.initial_edges();
    out.cost_computations = learner.total_cost_computations();
    out.stale_recomputes = learner.total_stale_recomputes();
    out.model = learner.model();
    return out;
}

}  // namespace aclearn
