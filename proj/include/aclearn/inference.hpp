#ifndef ACLEARN_INFERENCE_HPP
#define ACLEARN_INFERENCE_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aclearn/bn.hpp"
#include "aclearn/circuit.hpp"
#include "aclearn/dataset.hpp"

namespace aclearn {

using Assignment = std::vector<std::pair<VarId, ValueIndex>>;

// P(query | evidence) over disjoint variable sets.
struct Query {
    Assignment query;
    Assignment evidence;

    friend bool operator==(const Query&, const Query&) = default;
};

// Throws DataError on unknown variables, out-of-range values, repeated
// variables or overlapping query and evidence sets.
void validate_query(const Query& q, std::span<const std::uint32_t> arities);

// `q 0=1 3=0 | e 2=1`; either side may be empty.
std::string format_query(const Query& q);
Query parse_query(const std::string& line);
void write_queries(std::ostream& os, const std::vector<Query>& queries);
// Blank lines and lines starting with '#' are skipped.
std::vector<Query> read_queries(std::istream& is);

// log P(Q | E) from two circuit evaluations in log space. Throws
// ImpossibleEvidence when P(E) = 0. `visits` accumulates evaluated nodes.
double query_conditional(const ArithmeticCircuit& circuit, const Query& q, std::size_t* visits = nullptr);

// P(X = v | everything else) for each v, from X's own CPD row and the CPD
// rows of its children. `state` is a complete assignment; X's entry is ignored.
std::vector<double> markov_blanket_conditional(const BayesianNetwork& bn, VarId var, std::span<const ValueIndex> state);

struct GibbsScenario {
    std::string name;
    std::size_t chains = 1;
    std::size_t burn_in = 100;
    std::size_t samples = 1000;
    std::uint64_t seed = 0;

    static GibbsScenario fast(std::uint64_t seed = 0) { return {"fast", 1, 100, 1000, seed}; }
    static GibbsScenario medium(std::uint64_t seed = 0) { return {"medium", 10, 100, 1000, seed}; }
    static GibbsScenario slow(std::uint64_t seed = 0) { return {"slow", 10, 1000, 10000, seed}; }
    static GibbsScenario very_slow(std::uint64_t seed = 0) { return {"very-slow", 10, 10000, 100000, seed}; }
    // fast | medium | slow | very-slow
    static GibbsScenario named(const std::string& name, std::uint64_t seed = 0);
};

// Smoothed estimate of log P(Q | E): chains start from uniform random states
// of the non-evidence variables, sweep them in index order, and after burn-in
// count sweeps whose state matches Q. Pooled over chains, the estimate is
// (hits + 1/|Q states|) / (samples + 1).
double gibbs_query(const BayesianNetwork& bn, const Query& q, const GibbsScenario& scenario);

// Per test row: disjoint random query and evidence sets of round(fraction * n)
// variables, valued from the row. Throws DataError if fractions are negative
// or sum past 1.
std::vector<Query> generate_queries(const Dataset& test, double query_fraction, double evidence_fraction,
                                    std::uint64_t seed);

struct QueryResult {
    std::size_t id = 0;
    std::size_t query_vars = 0;
    std::optional<double> log_prob;  // empty when the evidence is impossible
    double per_var = 0.0;            // log_prob / query_vars
    double micros = 0.0;
};

struct QuerySetReport {
    std::vector<QueryResult> results;
    double mean_per_var = 0.0;  // over answered queries
    std::size_t answered = 0;
    std::size_t impossible = 0;
    double total_micros = 0.0;
};

using QueryAnswerer = std::function<double(const Query&)>;

// Runs every query, timing each; answers throwing ImpossibleEvidence are
// counted and excluded from the mean. Queries with an empty query set are
// rejected.
QuerySetReport evaluate_queryset(const std::vector<Query>& queries, const QueryAnswerer& answer);
QuerySetReport evaluate_queryset(const ArithmeticCircuit& circuit, const std::vector<Query>& queries);

// Without timing the line depends only on the inputs.
std::string to_json_line(const QueryResult& r, bool with_timing = true);

}  // namespace aclearn

#endif  // ACLEARN_INFERENCE_HPP
