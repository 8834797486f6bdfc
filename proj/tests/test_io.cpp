#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "doctest.h"

#include "aclearn/circuit_check.hpp"
#include "aclearn/errors.hpp"
#include "aclearn/io.hpp"
#include "aclearn/pipeline.hpp"
#include "support.hpp"

using namespace aclearn;

namespace {

Model small_learned_model(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto data = testing::planted_dataset(6, 500, 3, 0.8, rng);
    LearnerConfig cfg;
    cfg.k_e = 0.02;
    return learn(data, cfg).model;
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("aclearn_test_" + name)).string();
}

// Each variable after the first two is, with probability 0.9, the xor of the
// two before it.
Dataset xor_chain(std::size_t n, std::size_t rows, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution copy(0.9), coin(0.5);
    std::vector<std::uint8_t> cells(n * rows);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t v = 0; v < n; ++v)
            cells[r * n + v] = (v >= 2 && copy(rng)) ? cells[r * n + v - 1] ^ cells[r * n + v - 2] : coin(rng);
    return Dataset(std::vector<std::uint32_t>(n, 2), std::move(cells));
}

}  // namespace

TEST_CASE("dataset parsing") {
    std::istringstream ok("2,2\n1,0\n1,1\n");
    auto d = parse_dataset(ok, "ok.csv");
    CHECK(d.rows() == 2);
    CHECK(d.num_vars() == 2);
    CHECK(d.density() == doctest::Approx(3.0 / 4.0));

    std::istringstream bad_value("2,2\n1,0\n2,1\n");
    try {
        parse_dataset(bad_value, "bad.csv");
        FAIL("expected rejection");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("bad.csv:3") != std::string::npos);
    }
    std::istringstream ragged("2,2\n1\n");
    CHECK_THROWS_AS(parse_dataset(ragged), DataError);
    std::istringstream empty("");
    CHECK_THROWS_AS(parse_dataset(empty), DataError);
    std::istringstream junk("2,x\n");
    CHECK_THROWS_AS(parse_dataset(junk), DataError);
    std::istringstream unary("1,2\n");
    CHECK_THROWS_AS(parse_dataset(unary), DataError);
    std::istringstream header_only("2,3\n");
    CHECK(parse_dataset(header_only).rows() == 0);
}

TEST_CASE("dataset with many columns") {
    std::ostringstream os;
    for (int v = 0; v < 65; ++v) os << (v ? "," : "") << 2;
    os << '\n';
    for (int r = 0; r < 3; ++r) {
        for (int v = 0; v < 65; ++v) os << (v ? "," : "") << ((r + v) % 2);
        os << '\n';
    }
    std::istringstream in(os.str());
    CHECK(parse_dataset(in).num_vars() == 65);
}

TEST_CASE("dataset write and digest") {
    std::mt19937_64 rng(3);
    auto d = testing::planted_dataset(5, 40, 4, 0.5, rng);
    std::ostringstream os;
    write_dataset(os, d);
    std::istringstream in(os.str());
    auto back = parse_dataset(in);
    CHECK(dataset_digest(back) == dataset_digest(d));
    CHECK(dataset_digest(d).size() == 8);
    auto other = d.subset(std::vector<std::size_t>{0, 1});
    CHECK(dataset_digest(other) != dataset_digest(d));
}

TEST_CASE("dataset splits") {
    std::mt19937_64 rng(1);
    auto d = testing::planted_dataset(3, 100, 3, 0.5, rng);
    auto [a, b] = split_dataset(d, 0.9, 7);
    CHECK(a.rows() == 90);
    CHECK(b.rows() == 10);
    auto [a2, b2] = split_dataset(d, 0.9, 7);
    CHECK(dataset_digest(a) == dataset_digest(a2));
    CHECK(dataset_digest(b) == dataset_digest(b2));
    auto rows_of = [](const Dataset& x) {
        std::vector<std::vector<ValueIndex>> out;
        for (std::size_t r = 0; r < x.rows(); ++r) out.push_back(x.row_values(r));
        return out;
    };
    auto all = rows_of(d), left = rows_of(a), right = rows_of(b);
    left.insert(left.end(), right.begin(), right.end());
    std::sort(all.begin(), all.end());
    std::sort(left.begin(), left.end());
    CHECK(all == left);
    CHECK_THROWS_AS(split_dataset(d, 1.0, 1), DataError);
    CHECK_THROWS_AS(split_dataset(d, 0.0, 1), DataError);
}

TEST_CASE("network text round trip") {
    auto m = small_learned_model(4);
    std::ostringstream a;
    write_bn(a, m.bn);
    std::istringstream in(a.str());
    auto bn = read_bn(in);
    std::ostringstream b;
    write_bn(b, bn);
    CHECK(a.str() == b.str());
    testing::for_each_assignment(bn.arities(), [&](const auto& x) {
        CHECK(bn.joint_probability(x) == m.bn.joint_probability(x));
    });
    std::istringstream bad("bn 1 laplace\narities 2\ntree 0 1\nleaf 0 0.5\n");
    CHECK_THROWS_AS(read_bn(bad), DataError);
}

TEST_CASE("model bundles") {
    auto m = small_learned_model(5);
    RunManifest manifest{{"command", "learn"}, {"k_e", "0.02"}, {"seed", "0"}};
    const auto text = serialize_model(m, manifest);

    SUBCASE("save, load and save again is byte-identical") {
        auto loaded = deserialize_model(text);
        CHECK(loaded.manifest == manifest);
        CHECK(serialize_model(loaded.model, loaded.manifest) == text);
        CHECK(check_properties(loaded.model.circuit).ok());
        CHECK(testing::max_joint_error(loaded.model.circuit, loaded.model.bn) <= 1e-12);
    }
    SUBCASE("loaded circuit evaluates like the original") {
        auto loaded = deserialize_model(text);
        std::mt19937_64 rng(9);
        for (int t = 0; t < 100; ++t) {
            EvidenceVector ev(m.circuit.arities());
            for (VarId v = 0; v < m.circuit.num_vars(); ++v)
                if (rng() % 2) ev.observe(v, static_cast<ValueIndex>(rng() % m.circuit.arities()[v]));
            CHECK(loaded.model.circuit.evaluate(ev) == m.circuit.evaluate(ev));
        }
    }
    SUBCASE("corruption is rejected") {
        CHECK_THROWS_AS(deserialize_model(text.substr(0, text.size() / 2)), DataError);
        std::string flipped = text;
        flipped[text.size() / 3] = flipped[text.size() / 3] == '1' ? '2' : '1';
        CHECK_THROWS_AS(deserialize_model(flipped), DataError);
        std::string versioned = text;
        versioned.replace(0, std::string("aclearn-model 1").size(), "aclearn-model 9");
        try {
            deserialize_model(versioned);
            FAIL("expected rejection");
        } catch (const DataError& e) {
            CHECK(std::string(e.what()).find("checksum") != std::string::npos);
        }
    }
    SUBCASE("files") {
        const auto path = temp_path("bundle.acm");
        save_model(path, m, manifest);
        CHECK(read_file(path) == text);
        CHECK(load_model(path).manifest == manifest);
        std::filesystem::remove(path);
        CHECK_THROWS_AS(load_model(path), DataError);
    }
}

TEST_CASE("version mismatch with a valid checksum") {
    auto text = serialize_model(small_learned_model(6), {});
    auto body = text.substr(0, text.rfind("checksum "));
    body.replace(0, std::string("aclearn-model 1").size(), "aclearn-model 2");
    try {
        deserialize_model(body + "checksum " + text_checksum(body) + "\n");
        FAIL("expected rejection");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("version") != std::string::npos);
    }
}

TEST_CASE("model statistics") {
    Dataset data({2, 2, 2}, std::vector<std::uint8_t>(12, 0));
    auto empty = initial_model(data);
    auto s = model_stats(empty);
    CHECK(s.avg_parents == 0.0);
    CHECK(s.max_parents == 0);
    CHECK(s.treewidth.width == 0);
    CHECK(s.leaves == 3);
    CHECK(s.edges == empty.circuit.edge_count());

    auto m = small_learned_model(8);
    auto st = model_stats(m);
    auto g = moral_graph(m.bn);
    CHECK(elimination_width(g, st.treewidth.order) == st.treewidth.width);
    CHECK(st.leaves == m.bn.live_leaf_count());
}

TEST_CASE("per-example likelihood") {
    std::mt19937_64 rng(12);
    auto data = testing::planted_dataset(5, 300, 3, 0.7, rng);
    LearnerConfig cfg;
    cfg.k_e = 0.05;
    auto r = learn(data, cfg);
    auto ll = per_example_log_likelihood(r.model.circuit, data);
    double total = 0.0;
    for (double x : ll) {
        CHECK(std::isfinite(x));
        total += x;
    }
    const double final_ll = r.trace.empty() ? r.model.bn.log_likelihood() : r.trace.back().log_likelihood;
    CHECK(total == doctest::Approx(final_ll).epsilon(1e-9));
}

TEST_CASE("tuning") {
    auto data = xor_chain(10, 3000, 21);
    LearnerConfig base;
    SUBCASE("single cell") {
        TuningGrid grid{{0.05}, {0.0}, 0.1};
        auto r = tune(data, grid, base, 1);
        REQUIRE(r.rows.size() == 1);
        CHECK(r.best == 0);
        CHECK(r.final.model.bn.num_vars() == 10);
    }
    SUBCASE("low edge penalties win on strongly dependent data") {
        TuningGrid grid{{1.0, 0.01}, {0.0}, 0.1};
        auto r = tune(data, grid, base, 1);
        REQUIRE(r.rows.size() == 2);
        CHECK(r.rows[1].holdout_ll > r.rows[0].holdout_ll);
        CHECK(r.best == 1);
    }
    SUBCASE("bad grids") {
        CHECK_THROWS_AS(tune(data, TuningGrid{{}, {0.0}, 0.1}, base, 1), DataError);
        CHECK_THROWS_AS(tune(data, TuningGrid{{0.1}, {0.0}, 1.5}, base, 1), DataError);
    }
}
