#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"

#include "aclearn/errors.hpp"
#include "aclearn/inference.hpp"
#include "aclearn/learner.hpp"
#include "support.hpp"

using namespace aclearn;

namespace {

// X -> Y with P(X=1) = 0.6, P(Y=1 | X=1) = 0.9, P(Y=1 | X=0) = 0.2.
BayesianNetwork two_var_chain() {
    using SN = BayesianNetwork::SerializedNode;
    std::vector<std::vector<SN>> trees{
        {SN{TreeNode::kLeaf, {0, {0.4, 0.6}, {0, 0}}}},
        {SN{0, {}}, SN{TreeNode::kLeaf, {1, {0.8, 0.2}, {0, 0}}}, SN{TreeNode::kLeaf, {2, {0.1, 0.9}, {0, 0}}}},
    };
    return BayesianNetwork::from_trees({2, 2}, Estimator::Laplace, trees);
}

// Builds the circuit for an arbitrary network by replaying its tree splits
// on a circuit whose leaves carry the final parameters.
Model learned_model(std::size_t n, std::uint64_t seed, std::size_t splits) {
    std::mt19937_64 rng(seed);
    auto data = testing::planted_dataset(n, 400, 3, 0.7, rng);
    auto m = initial_model(data);
    for (std::size_t k = 0; k < splits; ++k) {
        auto s = testing::random_valid_split(m.bn, rng);
        if (!s) break;
        apply_split(m, *s, data);
    }
    return m;
}

std::vector<int> partial_of(std::size_t n, const Assignment& a, const Assignment& b = {}) {
    std::vector<int> p(n, -1);
    for (auto [v, x] : a) p[v] = static_cast<int>(x);
    for (auto [v, x] : b) p[v] = static_cast<int>(x);
    return p;
}

}  // namespace

TEST_CASE("query text format") {
    Query q{{{0, 1}, {3, 0}}, {{2, 1}}};
    CHECK(format_query(q) == "q 0=1 3=0 | e 2=1");
    CHECK(parse_query("q 0=1 3=0 | e 2=1") == q);
    CHECK(parse_query("q 4=2") == Query{{{4, 2}}, {}});
    CHECK(parse_query("q | e 1=0") == Query{{}, {{1, 0}}});
    CHECK_THROWS_AS(parse_query("x 0=1"), DataError);
    CHECK_THROWS_AS(parse_query("q 0=a"), DataError);
    CHECK_THROWS_AS(parse_query("q 0=1 | z 1=1"), DataError);
    std::istringstream in("# header\nq 0=1 | e\n\nq 1=0 | e 0=1\n");
    auto qs = read_queries(in);
    REQUIRE(qs.size() == 2);
    std::ostringstream out;
    write_queries(out, qs);
    CHECK(out.str() == "q 0=1 | e\nq 1=0 | e 0=1\n");
    std::istringstream bad("q 0=1\nq 0=\n");
    try {
        read_queries(bad);
        FAIL("expected a parse error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("query validation") {
    std::vector<std::uint32_t> ar{2, 3};
    CHECK_THROWS_AS(validate_query({{{0, 1}}, {{0, 0}}}, ar), DataError);
    CHECK_THROWS_AS(validate_query({{{1, 3}}, {}}, ar), DataError);
    CHECK_THROWS_AS(validate_query({{{2, 0}}, {}}, ar), DataError);
    CHECK_NOTHROW(validate_query({{{1, 2}}, {{0, 1}}}, ar));
}

TEST_CASE("exact queries on the two-variable chain") {
    // Counts that reproduce the chain exactly under unsmoothed estimates.
    std::vector<std::uint8_t> cells;
    auto rows = [&](std::uint8_t x, std::uint8_t y, int k) {
        for (int i = 0; i < k; ++i) cells.insert(cells.end(), {x, y});
    };
    rows(1, 1, 54);
    rows(1, 0, 6);
    rows(0, 1, 8);
    rows(0, 0, 32);
    Dataset data({2, 2}, cells);
    auto m = initial_model(data, Estimator::MaximumLikelihood);
    apply_split(m, Split{1, 1, 0}, data);
    // P(Y=1) = 0.6 * 0.9 + 0.4 * 0.2 = 0.62, by enumeration over the 4 states.
    double p_y1 = 0.0;
    testing::for_each_assignment({2, 2}, [&](const auto& x) {
        if (x[1] == 1) p_y1 += two_var_chain().joint_probability(x);
    });
    CHECK(p_y1 == doctest::Approx(0.62).epsilon(1e-14));
    CHECK(std::exp(query_conditional(m.circuit, {{{1, 1}}, {}})) == doctest::Approx(p_y1).epsilon(1e-12));
    CHECK(std::exp(query_conditional(m.circuit, {{{1, 1}}, {{0, 0}}})) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(std::exp(query_conditional(m.circuit, {{{0, 1}}, {{1, 1}}})) == doctest::Approx(0.54 / 0.62).epsilon(1e-12));
}

TEST_CASE("conditional queries match enumeration") {
    std::mt19937_64 rng(5);
    for (int run = 0; run < 8; ++run) {
        auto m = learned_model(4 + run % 3, 100 + run, 8);
        const auto n = m.bn.num_vars();
        auto queries = generate_queries(testing::planted_dataset(n, 30, 2, 0.5, rng), 0.3, 0.3, run);
        for (const auto& q : queries) {
            bool in_range = true;
            for (const auto* side : {&q.query, &q.evidence})
                for (auto [v, x] : *side) in_range = in_range && x < m.bn.arity(v);
            if (!in_range) continue;
            const double num = testing::enumerate_marginal(m.bn, partial_of(n, q.query, q.evidence));
            const double den = testing::enumerate_marginal(m.bn, partial_of(n, q.evidence));
            std::size_t visits = 0;
            CHECK(query_conditional(m.circuit, q, &visits) == doctest::Approx(std::log(num / den)).epsilon(1e-9));
            CHECK(visits <= 2 * m.circuit.live_node_count());
        }
    }
}

TEST_CASE("full-assignment queries are log joints") {
    auto m = learned_model(5, 7, 10);
    testing::for_each_assignment(m.bn.arities(), [&](const auto& x) {
        Query q;
        for (VarId v = 0; v < x.size(); ++v) q.query.emplace_back(v, x[v]);
        CHECK(query_conditional(m.circuit, q) == doctest::Approx(m.bn.log_joint_probability(x)).epsilon(1e-10));
    });
}

TEST_CASE("conditional identities") {
    auto m = learned_model(6, 9, 12);
    const auto& ar = m.bn.arities();
    Query a{{{0, 1}}, {}}, b{{{2, 0}, {4, 1}}, {}};
    Assignment e{{5, 1}};
    // P(Q|E) * P(E) = P(Q, E).
    EvidenceVector ev(ar), qe(ar);
    ev.observe(5, 1);
    qe.observe(5, 1);
    qe.observe(0, 1);
    CHECK(std::exp(query_conditional(m.circuit, {a.query, e})) * m.circuit.evaluate(ev) ==
          doctest::Approx(m.circuit.evaluate(qe)).epsilon(1e-10));
    // Chain rule: log P(A, B | E) = log P(A | B, E) + log P(B | E).
    Assignment ab = a.query;
    ab.insert(ab.end(), b.query.begin(), b.query.end());
    Assignment be = b.query;
    be.insert(be.end(), e.begin(), e.end());
    CHECK(query_conditional(m.circuit, {ab, e}) ==
          doctest::Approx(query_conditional(m.circuit, {a.query, be}) + query_conditional(m.circuit, {b.query, e}))
              .epsilon(1e-9));
    // Marginalization: summing a variable out equals the sum over its values.
    EvidenceVector base(ar);
    base.observe(1, 0);
    double total = 0.0;
    for (ValueIndex v = 0; v < ar[3]; ++v) {
        EvidenceVector x = base;
        x.observe(3, v);
        total += m.circuit.evaluate(x);
    }
    CHECK(m.circuit.evaluate(base) == doctest::Approx(total).epsilon(1e-12));
}

TEST_CASE("impossible evidence") {
    ArithmeticCircuit c({2, 2});
    // Deterministic circuit where X0 = 1 never occurs.
    NodeId p = c.add_parameter(0, 0, 0, 1.0);
    NodeId q0 = c.add_parameter(1, 1, 0, 0.5), q1 = c.add_parameter(1, 1, 1, 0.5);
    NodeId s1 = c.add_sum({c.add_product({c.indicator(1, 0), q0}), c.add_product({c.indicator(1, 1), q1})});
    c.set_root(c.add_product({c.indicator(0, 0), p, s1}));
    c.garbage_collect();
    CHECK_THROWS_AS(query_conditional(c, {{{1, 0}}, {{0, 1}}}), ImpossibleEvidence);
    CHECK(std::isinf(query_conditional(c, {{{0, 1}}, {{1, 0}}})));
    auto report = evaluate_queryset(c, {Query{{{1, 0}}, {{0, 1}}}, Query{{{1, 0}, {0, 0}}, {}}});
    CHECK(report.impossible == 1);
    CHECK(report.answered == 1);
    CHECK(report.mean_per_var == doctest::Approx(std::log(0.5) / 2));
    CHECK(report.results[0].log_prob == std::nullopt);
}

TEST_CASE("query-set metric") {
    auto report = evaluate_queryset({Query{{{0, 0}, {1, 1}}, {}}}, [](const Query&) { return -1.0; });
    CHECK(report.mean_per_var == doctest::Approx(-0.5));
    CHECK(report.results.front().micros >= 0.0);
    CHECK_THROWS_AS(evaluate_queryset({}, [](const Query&) { return 0.0; }), DataError);
    CHECK_THROWS_AS(evaluate_queryset({Query{{}, {{0, 1}}}}, [](const Query&) { return 0.0; }), DataError);
    CHECK(to_json_line(report.results.front()).find("\"per_var\":-0.5") != std::string::npos);
}

TEST_CASE("Markov blanket conditionals") {
    SUBCASE("childless variable uses its own CPD row") {
        auto bn = two_var_chain();
        std::vector<ValueIndex> state{1, 0};
        auto p = markov_blanket_conditional(bn, 1, state);
        CHECK(p[1] == doctest::Approx(0.9));
        CHECK(p[0] + p[1] == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("proportional to the joint") {
        auto m = learned_model(6, 13, 14);
        std::mt19937_64 rng(2);
        for (int t = 0; t < 50; ++t) {
            std::vector<ValueIndex> x(m.bn.num_vars());
            for (VarId v = 0; v < x.size(); ++v) x[v] = static_cast<ValueIndex>(rng() % m.bn.arity(v));
            const VarId var = static_cast<VarId>(rng() % x.size());
            auto p = markov_blanket_conditional(m.bn, var, x);
            double z = 0.0;
            std::vector<double> joint(p.size());
            for (ValueIndex v = 0; v < p.size(); ++v) {
                x[var] = v;
                joint[v] = m.bn.joint_probability(x);
                z += joint[v];
            }
            double sum = 0.0;
            for (ValueIndex v = 0; v < p.size(); ++v) {
                CHECK(p[v] == doctest::Approx(joint[v] / z).epsilon(1e-12));
                sum += p[v];
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("Gibbs sampling") {
    auto bn = two_var_chain();
    SUBCASE("medium scenario on the chain") {
        double est = std::exp(gibbs_query(bn, {{{1, 1}}, {}}, GibbsScenario::medium(1)));
        CHECK(std::abs(est - 0.62) <= 0.03);
    }
    SUBCASE("all variables observed") {
        double lp = gibbs_query(bn, {{}, {{0, 1}, {1, 0}}}, GibbsScenario::fast(1));
        CHECK(lp == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("estimates are proper probabilities and deterministic") {
        auto a = gibbs_query(bn, {{{0, 0}}, {{1, 1}}}, GibbsScenario::fast(3));
        auto b = gibbs_query(bn, {{{0, 0}}, {{1, 1}}}, GibbsScenario::fast(3));
        CHECK(a == b);
        CHECK(a <= 0.0);
        CHECK(std::isfinite(a));
    }
    SUBCASE("scenario names") {
        CHECK(GibbsScenario::named("very-slow").samples == 100000);
        CHECK(GibbsScenario::named("medium").chains == 10);
        CHECK_THROWS_AS(GibbsScenario::named("glacial"), DataError);
    }
}

TEST_CASE("Gibbs error shrinks with longer runs") {
    auto m = learned_model(8, 21, 14);
    std::mt19937_64 rng(4);
    std::vector<double> fast_err, slow_err;
    for (int t = 0; t < 50; ++t) {
        const VarId qv = static_cast<VarId>(rng() % 8);
        VarId ev = static_cast<VarId>(rng() % 8);
        if (ev == qv) ev = (ev + 1) % 8;
        Query q{{{qv, static_cast<ValueIndex>(rng() % m.bn.arity(qv))}}, {{ev, static_cast<ValueIndex>(rng() % m.bn.arity(ev))}}};
        const double exact = std::exp(query_conditional(m.circuit, q));
        fast_err.push_back(std::abs(std::exp(gibbs_query(m.bn, q, GibbsScenario::fast(t))) - exact));
        slow_err.push_back(std::abs(std::exp(gibbs_query(m.bn, q, GibbsScenario::slow(t))) - exact));
    }
    auto median = [](std::vector<double> v) {
        std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
        return v[v.size() / 2];
    };
    CHECK(median(slow_err) <= median(fast_err));
}

TEST_CASE("exact inference beats fast Gibbs on held-out queries") {
    std::mt19937_64 rng(31);
    auto train = testing::planted_dataset(8, 1500, 2, 0.8, rng);
    LearnerConfig cfg;
    cfg.k_e = 0.01;
    auto r = learn(train, cfg);
    auto queries = generate_queries(train.subset(std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}), 0.3, 0.3, 1);
    while (queries.size() < 100) {
        auto more = generate_queries(train.subset(std::vector<std::size_t>{queries.size()}), 0.3, 0.3, queries.size());
        queries.insert(queries.end(), more.begin(), more.end());
    }
    auto exact = evaluate_queryset(r.model.circuit, queries);
    auto sampled = evaluate_queryset(queries, [&](const Query& q) { return gibbs_query(r.model.bn, q, GibbsScenario::fast(7)); });
    CHECK(exact.mean_per_var >= sampled.mean_per_var);
}

TEST_CASE("query generation") {
    std::mt19937_64 rng(8);
    auto data = testing::planted_dataset(10, 50, 3, 0.5, rng);
    auto qs = generate_queries(data, 0.3, 0.0, 1);
    REQUIRE(qs.size() == 50);
    for (std::size_t r = 0; r < qs.size(); ++r) {
        CHECK(qs[r].query.size() == 3);
        CHECK(qs[r].evidence.empty());
        for (auto [v, x] : qs[r].query) CHECK(data.at(r, v) == x);
    }
    auto a = generate_queries(data, 0.3, 0.5, 2), b = generate_queries(data, 0.3, 0.5, 2),
         c = generate_queries(data, 0.3, 0.5, 3);
    CHECK(a == b);
    CHECK(a != c);
    for (const auto& q : a) {
        CHECK(q.query.size() == 3);
        CHECK(q.evidence.size() == 5);
        CHECK_NOTHROW(validate_query(q, data.arities()));
    }
    CHECK_THROWS_AS(generate_queries(data, 0.6, 0.5, 1), DataError);
    CHECK_THROWS_AS(generate_queries(data, -0.1, 0.5, 1), DataError);
}
