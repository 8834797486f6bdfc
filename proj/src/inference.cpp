#include "aclearn/inference.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "json.hpp"

#include "aclearn/errors.hpp"

namespace aclearn {

namespace {

void fill_evidence(EvidenceVector& ev, const Assignment& a) {
    for (auto [v, x] : a) ev.observe(v, x);
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

Assignment parse_side(std::istringstream& in, const std::string& line) {
    Assignment out;
    std::string tok;
    while (in >> tok) {
        if (tok == "|") break;
        auto eq = tok.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == tok.size())
            throw DataError("query: expected var=value, got '" + tok + "' in: " + line);
        try {
            std::size_t used = 0;
            unsigned long var = std::stoul(tok.substr(0, eq), &used);
            if (used != eq) throw std::invalid_argument("var");
            std::string rhs = tok.substr(eq + 1);
            unsigned long val = std::stoul(rhs, &used);
            if (used != rhs.size()) throw std::invalid_argument("value");
            out.emplace_back(static_cast<VarId>(var), static_cast<ValueIndex>(val));
        } catch (const std::logic_error&) {
            throw DataError("query: bad number in '" + tok + "' in: " + line);
        }
    }
    return out;
}

}  // namespace

void validate_query(const Query& q, std::span<const std::uint32_t> arities) {
    std::vector<std::uint8_t> used(arities.size(), 0);
    for (const auto* side : {&q.query, &q.evidence}) {
        for (auto [v, x] : *side) {
            if (v >= arities.size()) throw DataError("query: unknown variable " + std::to_string(v));
            if (x >= arities[v])
                throw DataError("query: value " + std::to_string(x) + " out of range for variable " + std::to_string(v));
            if (used[v]++) throw DataError("query: variable " + std::to_string(v) + " appears twice");
        }
    }
}

std::string format_query(const Query& q) {
    std::string out = "q";
    for (auto [v, x] : q.query) out += " " + std::to_string(v) + "=" + std::to_string(x);
    out += " | e";
    for (auto [v, x] : q.evidence) out += " " + std::to_string(v) + "=" + std::to_string(x);
    return out;
}

Query parse_query(const std::string& line) {
    std::istringstream in(line);
    std::string tok;
    if (!(in >> tok) || tok != "q") throw DataError("query: line must start with 'q': " + line);
    Query q;
    q.query = parse_side(in, line);
    if (in >> tok) {
        if (tok != "e") throw DataError("query: expected 'e' after '|': " + line);
        q.evidence = parse_side(in, line);
    }
    return q;
}

void write_queries(std::ostream& os, const std::vector<Query>& queries) {
    for (const auto& q : queries) os << format_query(q) << '\n';
}

std::vector<Query> read_queries(std::istream& is) {
    std::vector<Query> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        try {
            out.push_back(parse_query(line));
        } catch (const DataError& e) {
            throw DataError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

double query_conditional(const ArithmeticCircuit& circuit, const Query& q, std::size_t* visits) {
    validate_query(q, circuit.arities());
    EvidenceVector ev(circuit.arities());
    fill_evidence(ev, q.evidence);
    double log_e = 0.0;
    if (!q.evidence.empty()) {
        log_e = circuit.evaluate_log(ev, visits);
        if (std::isinf(log_e)) throw ImpossibleEvidence("evidence has probability zero");
    }
    if (q.query.empty()) return 0.0;
    fill_evidence(ev, q.query);
    return circuit.evaluate_log(ev, visits) - log_e;
}

std::vector<double> markov_blanket_conditional(const BayesianNetwork& bn, VarId var, std::span<const ValueIndex> state) {
    if (state.size() != bn.num_vars()) throw DataError("state must assign every variable");
    const std::uint32_t k = bn.arity(var);
    std::vector<double> p(k);
    for (ValueIndex v = 0; v < k; ++v) {
        auto value_of = [&](VarId u) { return u == var ? v : state[u]; };
        p[v] = bn.leaf(bn.cpd(var).leaf_for_lookup(value_of)).theta[v];
        for (VarId c : bn.children(var)) p[v] *= bn.leaf(bn.cpd(c).leaf_for_lookup(value_of)).theta[state[c]];
    }
    const double total = std::accumulate(p.begin(), p.end(), 0.0);
    if (total > 0.0) {
        for (auto& x : p) x /= total;
    } else {
        std::fill(p.begin(), p.end(), 1.0 / k);
    }
    return p;
}

GibbsScenario GibbsScenario::named(const std::string& name, std::uint64_t seed) {
    if (name == "fast") return fast(seed);
    if (name == "medium") return medium(seed);
    if (name == "slow") return slow(seed);
    if (name == "very-slow" || name == "very_slow") return very_slow(seed);
    throw DataError("unknown Gibbs scenario '" + name + "' (expected fast, medium, slow or very-slow)");
}

double gibbs_query(const BayesianNetwork& bn, const Query& q, const GibbsScenario& scenario) {
    validate_query(q, bn.arities());
    if (scenario.chains == 0 || scenario.samples == 0) throw DataError("Gibbs scenario needs chains and samples >= 1");
    const std::size_t n = bn.num_vars();
    std::vector<std::uint8_t> fixed(n, 0);
    std::vector<ValueIndex> state(n, 0);
    for (auto [v, x] : q.evidence) {
        fixed[v] = 1;
        state[v] = x;
    }
    std::vector<VarId> free_vars;
    for (VarId v = 0; v < n; ++v)
        if (!fixed[v]) free_vars.push_back(v);

    double q_states = 1.0;
    for (auto [v, x] : q.query) q_states *= bn.arity(v);

    std::vector<double> weights(kMaxArity);
    std::uint64_t hits = 0;
    for (std::size_t chain = 0; chain < scenario.chains; ++chain) {
        std::mt19937_64 rng(scenario.seed ^ (0x9E3779B97F4A7C15ULL * (chain + 1)));
        for (VarId v : free_vars) state[v] = static_cast<ValueIndex>(rng() % bn.arity(v));
        const std::size_t sweeps = scenario.burn_in + scenario.samples;
        for (std::size_t s = 0; s < sweeps; ++s) {
            for (VarId var : free_vars) {
                const std::uint32_t k = bn.arity(var);
                const auto& kids = bn.children(var);
                double total = 0.0;
                for (ValueIndex v = 0; v < k; ++v) {
                    state[var] = v;
                    auto value_of = [&](VarId u) { return state[u]; };
                    double w = bn.leaf(bn.cpd(var).leaf_for_lookup(value_of)).theta[v];
                    for (VarId c : kids) w *= bn.leaf(bn.cpd(c).leaf_for_lookup(value_of)).theta[state[c]];
                    weights[v] = w;
                    total += w;
                }
                ValueIndex pick = k - 1;
                if (total > 0.0) {
                    double u = uniform01(rng) * total;
                    for (ValueIndex v = 0; v < k; ++v) {
                        if (u < weights[v]) {
                            pick = v;
                            break;
                        }
                        u -= weights[v];
                    }
                } else {
                    pick = static_cast<ValueIndex>(rng() % k);
                }
                state[var] = pick;
            }
            if (s < scenario.burn_in) continue;
            bool match = true;
            for (auto [v, x] : q.query) match = match && state[v] == x;
            hits += match;
        }
    }
    const double samples = static_cast<double>(scenario.chains) * static_cast<double>(scenario.samples);
    return std::log((static_cast<double>(hits) + 1.0 / q_states) / (samples + 1.0));
}

std::vector<Query> generate_queries(const Dataset& test, double query_fraction, double evidence_fraction,
                                    std::uint64_t seed) {
    if (!(query_fraction >= 0.0) || !(evidence_fraction >= 0.0) || query_fraction + evidence_fraction > 1.0 + 1e-12)
        throw DataError("query and evidence fractions must be >= 0 and sum to at most 1");
    const std::size_t n = test.num_vars();
    const auto nq = static_cast<std::size_t>(std::lround(query_fraction * static_cast<double>(n)));
    const auto ne = std::min(static_cast<std::size_t>(std::lround(evidence_fraction * static_cast<double>(n))), n - nq);
    std::mt19937_64 rng(seed);
    std::vector<VarId> vars(n);
    std::vector<Query> out;
    out.reserve(test.rows());
    for (std::size_t r = 0; r < test.rows(); ++r) {
        std::iota(vars.begin(), vars.end(), 0);
        // Partial Fisher-Yates: the first nq + ne positions are a uniform sample.
        for (std::size_t i = 0; i < nq + ne; ++i) {
            std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
            std::swap(vars[i], vars[j]);
        }
        std::sort(vars.begin(), vars.begin() + static_cast<std::ptrdiff_t>(nq));
        std::sort(vars.begin() + static_cast<std::ptrdiff_t>(nq), vars.begin() + static_cast<std::ptrdiff_t>(nq + ne));
        Query q;
        for (std::size_t i = 0; i < nq; ++i) q.query.emplace_back(vars[i], test.at(r, vars[i]));
        for (std::size_t i = nq; i < nq + ne; ++i) q.evidence.emplace_back(vars[i], test.at(r, vars[i]));
        out.push_back(std::move(q));
    }
    return out;
}

QuerySetReport evaluate_queryset(const std::vector<Query>& queries, const QueryAnswerer& answer) {
    if (queries.empty()) throw DataError("query set is empty");
    QuerySetReport report;
    double sum = 0.0;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const auto& q = queries[i];
        if (q.query.empty()) throw DataError("query " + std::to_string(i) + " has no query variables");
        QueryResult r;
        r.id = i;
        r.query_vars = q.query.size();
        const auto t0 = std::chrono::steady_clock::now();
        try {
            r.log_prob = answer(q);
            r.per_var = *r.log_prob / static_cast<double>(r.query_vars);
        } catch (const ImpossibleEvidence&) {
            ++report.impossible;
        }
        r.micros = std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - t0).count();
        report.total_micros += r.micros;
        if (r.log_prob) {
            ++report.answered;
            sum += r.per_var;
        }
        report.results.push_back(r);
    }
    if (report.answered) report.mean_per_var = sum / static_cast<double>(report.answered);
    return report;
}

QuerySetReport evaluate_queryset(const ArithmeticCircuit& circuit, const std::vector<Query>& queries) {
    return evaluate_queryset(queries, [&](const Query& q) { return query_conditional(circuit, q); });
}

std::string to_json_line(const QueryResult& r, bool with_timing) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["query_vars"] = r.query_vars;
    if (r.log_prob) {
        j["log_prob"] = *r.log_prob;
        j["per_var"] = r.per_var;
    } else {
        j["log_prob"] = nullptr;
        j["impossible"] = true;
    }
    if (with_timing) j["micros"] = r.micros;
    return j.dump();
}

}  // namespace aclearn
