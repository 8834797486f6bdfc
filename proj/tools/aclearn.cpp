#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "aclearn/circuit_io.hpp"
#include "aclearn/errors.hpp"
#include "aclearn/inference.hpp"
#include "aclearn/io.hpp"
#include "aclearn/learner.hpp"
#include "aclearn/pipeline.hpp"

using namespace aclearn;
using Json = nlohmann::ordered_json;

namespace {

class Stopwatch {
public:
    double lap() {
        auto now = std::chrono::steady_clock::now();
        double s = std::chrono::duration<double>(now - last_).count();
        last_ = now;
        return s;
    }

private:
    std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

struct LearnOptions {
    double k_e = 0.02;
    double k_p = 0.0;
    std::string mode = "greedy";
    std::size_t max_splits = 0;  // 0: unlimited
    double max_seconds = 0.0;    // 0: unlimited
    std::string estimator = "laplace";
    std::uint64_t seed = 0;
    bool no_early_abort = false;

    LearnerConfig config() const {
        LearnerConfig c;
        c.k_e = k_e;
        c.k_p = k_p;
        c.mode = parse_search_mode(mode);
        if (max_splits > 0) c.max_splits = max_splits;
        if (max_seconds > 0.0) c.max_seconds = max_seconds;
        c.estimator = parse_estimator(estimator);
        c.seed = seed;
        c.early_abort = !no_early_abort;
        return c;
    }
};

void add_search_options(CLI::App* cmd, LearnOptions& o, bool with_penalties) {
    if (with_penalties) {
        cmd->add_option("--ke", o.k_e, "Per-edge penalty")->capture_default_str()->check(CLI::NonNegativeNumber);
        cmd->add_option("--kp", o.k_p, "Per-parameter penalty")->capture_default_str()->check(CLI::NonNegativeNumber);
    }
    cmd->add_option("--mode", o.mode, "greedy | quick")->capture_default_str()->check(CLI::IsMember({"greedy", "quick"}));
    cmd->add_option("--max-splits", o.max_splits, "Stop after this many splits (0: no limit)");
    cmd->add_option("--max-seconds", o.max_seconds, "Stop after this much wall time (0: no limit)");
    cmd->add_option("--estimator", o.estimator, "laplace | ml")
        ->capture_default_str()
        ->check(CLI::IsMember({"laplace", "ml"}));
    cmd->add_option("--seed", o.seed, "Seed")->capture_default_str();
    cmd->add_flag("--no-early-abort", o.no_early_abort, "Always compute exact edge costs");
}

void config_manifest(RunManifest& m, const LearnerConfig& c) {
    m["k_e"] = format_double(c.k_e);
    m["k_p"] = format_double(c.k_p);
    m["mode"] = to_string(c.mode);
    m["max_splits"] = c.max_splits == std::numeric_limits<std::size_t>::max() ? "none" : std::to_string(c.max_splits);
    m["max_seconds"] = std::isinf(c.max_seconds) ? "none" : format_double(c.max_seconds);
    m["estimator"] = to_string(c.estimator);
    m["seed"] = std::to_string(c.seed);
    m["early_abort"] = c.early_abort ? "true" : "false";
}

void data_manifest(RunManifest& m, const std::string& path, const Dataset& d) {
    m["data"] = path;
    m["data_digest"] = dataset_digest(d);
    m["data_rows"] = std::to_string(d.rows());
    m["data_vars"] = std::to_string(d.num_vars());
}

void result_manifest(RunManifest& m, const LearnResult& r) {
    m["splits"] = std::to_string(r.trace.size());
    m["stop_reason"] = r.stop_reason;
    m["edges"] = std::to_string(r.model.circuit.edge_count());
    m["parameters"] = std::to_string(r.model.circuit.parameter_count());
    m["log_likelihood"] = format_double(r.model.bn.log_likelihood());
}

void write_trace(const std::string& path, const LearnResult& r) {
    std::string text;
    for (const auto& rec : r.trace) text += to_json_line(rec, false) + "\n";
    write_file_atomic(path, text);
}

void write_timing(const std::string& path, const Json& phases, const LearnResult* r) {
    Json j;
    j["phases"] = phases;
    if (r) {
        Json iters = Json::array();
        for (const auto& rec : r->trace) iters.push_back(rec.wall_seconds);
        j["iteration_seconds"] = iters;
    }
    write_file_atomic(path, j.dump(2) + "\n");
}

std::vector<Query> load_queries(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    try {
        return read_queries(in);
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

void emit_query_report(const QuerySetReport& report, const std::string& out, const Json& extra) {
    if (!out.empty()) {
        std::string text;
        for (const auto& r : report.results) text += to_json_line(r, false) + "\n";
        write_file_atomic(out, text);
    }
    Json j = extra;
    j["queries"] = report.results.size();
    j["answered"] = report.answered;
    j["impossible"] = report.impossible;
    j["mean_log_prob_per_var"] = report.mean_per_var;
    j["total_micros"] = report.total_micros;
    std::cout << j.dump() << '\n';
}

int run(int argc, char** argv) {
    CLI::App app{"Learn arithmetic circuits over discrete data and answer queries with them"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    // learn
    auto* learn_cmd = app.add_subcommand("learn", "Learn a model from a dataset");
    std::string learn_data, learn_out, learn_trace, learn_timing;
    LearnOptions learn_opts;
    learn_cmd->add_option("--data", learn_data, "Training data")->required()->check(CLI::ExistingFile);
    learn_cmd->add_option("--out", learn_out, "Model bundle to write")->required();
    learn_cmd->add_option("--trace", learn_trace, "Per-iteration trace (JSON lines)");
    learn_cmd->add_option("--timing", learn_timing, "Wall-time sidecar (default: <out>.timing.json)");
    add_search_options(learn_cmd, learn_opts, true);

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Per-example log-likelihood of a dataset");
    std::string eval_model, eval_data, eval_out;
    eval_cmd->add_option("--model", eval_model, "Model bundle")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--data", eval_data, "Data to score")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--per-example", eval_out, "Write one log-likelihood per row");

    // infer
    auto* infer_cmd = app.add_subcommand("infer", "Exact conditional queries with the circuit");
    std::string infer_model, infer_queries, infer_out;
    infer_cmd->add_option("--model", infer_model, "Model bundle")->required()->check(CLI::ExistingFile);
    infer_cmd->add_option("--queries", infer_queries, "Query file")->required()->check(CLI::ExistingFile);
    infer_cmd->add_option("--out", infer_out, "Per-query results (JSON lines)");

    // gibbs
    auto* gibbs_cmd = app.add_subcommand("gibbs", "Sampled conditional queries with the network");
    std::string gibbs_model, gibbs_queries, gibbs_out, gibbs_scenario = "medium";
    std::uint64_t gibbs_seed = 0;
    gibbs_cmd->add_option("--model", gibbs_model, "Model bundle")->required()->check(CLI::ExistingFile);
    gibbs_cmd->add_option("--queries", gibbs_queries, "Query file")->required()->check(CLI::ExistingFile);
    gibbs_cmd->add_option("--scenario", gibbs_scenario, "fast | medium | slow | very-slow")
        ->capture_default_str()
        ->check(CLI::IsMember({"fast", "medium", "slow", "very-slow"}));
    gibbs_cmd->add_option("--seed", gibbs_seed, "Seed")->capture_default_str();
    gibbs_cmd->add_option("--out", gibbs_out, "Per-query results (JSON lines)");

    // genqueries
    auto* gen_cmd = app.add_subcommand("genqueries", "Generate one query per row of a dataset");
    std::string gen_data, gen_out;
    double gen_q = 0.1, gen_e = 0.0;
    std::uint64_t gen_seed = 0;
    gen_cmd->add_option("--data", gen_data, "Rows to draw queries from")->required()->check(CLI::ExistingFile);
    gen_cmd->add_option("--query-frac", gen_q, "Fraction of variables queried")->capture_default_str();
    gen_cmd->add_option("--evidence-frac", gen_e, "Fraction of variables observed")->capture_default_str();
    gen_cmd->add_option("--seed", gen_seed, "Seed")->capture_default_str();
    gen_cmd->add_option("--out", gen_out, "Query file to write (default: stdout)");

    // stats
    auto* stats_cmd = app.add_subcommand("stats", "Size and structure of a model");
    std::string stats_model;
    stats_cmd->add_option("--model", stats_model, "Model bundle")->required()->check(CLI::ExistingFile);

    // tune
    auto* tune_cmd = app.add_subcommand("tune", "Pick penalties on a held-out part, then retrain");
    std::string tune_data, tune_out, tune_report, tune_trace, tune_timing;
    std::vector<double> tune_ke{1.0, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01}, tune_kp{0.0};
    double tune_fraction = 0.1;
    LearnOptions tune_opts;
    tune_cmd->add_option("--data", tune_data, "Training data")->required()->check(CLI::ExistingFile);
    tune_cmd->add_option("--out", tune_out, "Model bundle to write")->required();
    tune_cmd->add_option("--ke", tune_ke, "Per-edge penalties")->delimiter(',')->capture_default_str();
    tune_cmd->add_option("--kp", tune_kp, "Per-parameter penalties")->delimiter(',')->capture_default_str();
    tune_cmd->add_option("--validation", tune_fraction, "Held-out fraction")->capture_default_str();
    tune_cmd->add_option("--report", tune_report, "Grid report (JSON lines; default: stdout)");
    tune_cmd->add_option("--trace", tune_trace, "Trace of the final run (JSON lines)");
    tune_cmd->add_option("--timing", tune_timing, "Wall-time sidecar (default: <out>.timing.json)");
    add_search_options(tune_cmd, tune_opts, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    Stopwatch clock;
    if (*learn_cmd) {
        const auto config = learn_opts.config();
        Json phases;
        auto data = load_dataset(learn_data);
        phases["load"] = clock.lap();
        auto result = learn(data, config);
        phases["learn"] = clock.lap();
        RunManifest m{{"command", "learn"}, {"tool_version", kToolVersion}, {"model", learn_out}};
        config_manifest(m, config);
        data_manifest(m, learn_data, data);
        result_manifest(m, result);
        if (!learn_trace.empty()) m["trace"] = learn_trace;
        save_model(learn_out, result.model, m);
        if (!learn_trace.empty()) write_trace(learn_trace, result);
        phases["save"] = clock.lap();
        write_timing(learn_timing.empty() ? learn_out + ".timing.json" : learn_timing, phases, &result);
        Json j;
        j["splits"] = result.trace.size();
        j["stop_reason"] = result.stop_reason;
        j["edges"] = result.model.circuit.edge_count();
        j["log_likelihood"] = result.model.bn.log_likelihood();
        j["score"] = result.trace.empty() ? result.initial_score : result.trace.back().score;
        std::cout << j.dump() << '\n';
    } else if (*eval_cmd) {
        auto bundle = load_model(eval_model);
        auto data = load_dataset(eval_data);
        if (data.arities() != bundle.model.circuit.arities())
            throw DataError(eval_data + ": variables do not match the model");
        auto ll = per_example_log_likelihood(bundle.model.circuit, data);
        double total = 0.0;
        std::string text;
        for (double x : ll) {
            total += x;
            text += format_double(x) + "\n";
        }
        if (!eval_out.empty()) write_file_atomic(eval_out, text);
        Json j;
        j["rows"] = ll.size();
        j["total_log_likelihood"] = total;
        j["mean_log_likelihood"] = ll.empty() ? 0.0 : total / static_cast<double>(ll.size());
        std::cout << j.dump() << '\n';
    } else if (*infer_cmd) {
        auto bundle = load_model(infer_model);
        auto queries = load_queries(infer_queries);
        for (const auto& q : queries) validate_query(q, bundle.model.circuit.arities());
        auto report = evaluate_queryset(bundle.model.circuit, queries);
        emit_query_report(report, infer_out, Json{{"method", "circuit"}});
    } else if (*gibbs_cmd) {
        auto bundle = load_model(gibbs_model);
        auto queries = load_queries(gibbs_queries);
        for (const auto& q : queries) validate_query(q, bundle.model.bn.arities());
        const auto scenario = GibbsScenario::named(gibbs_scenario, gibbs_seed);
        const auto& bn = bundle.model.bn;
        auto report = evaluate_queryset(queries, [&](const Query& q) { return gibbs_query(bn, q, scenario); });
        emit_query_report(report, gibbs_out, Json{{"method", "gibbs"}, {"scenario", scenario.name}});
    } else if (*gen_cmd) {
        auto data = load_dataset(gen_data);
        auto queries = generate_queries(data, gen_q, gen_e, gen_seed);
        std::ostringstream os;
        write_queries(os, queries);
        if (gen_out.empty())
            std::cout << os.str();
        else
            write_file_atomic(gen_out, os.str());
    } else if (*stats_cmd) {
        auto bundle = load_model(stats_model);
        auto s = model_stats(bundle.model);
        Json j;
        j["vars"] = bundle.model.bn.num_vars();
        j["nodes"] = s.nodes;
        j["edges"] = s.edges;
        j["parameters"] = s.parameters;
        j["leaves"] = s.leaves;
        j["avg_parents"] = s.avg_parents;
        j["max_parents"] = s.max_parents;
        j["treewidth"] = s.treewidth.width;
        j["elimination_order"] = s.treewidth.order;
        std::cout << j.dump() << '\n';
    } else if (*tune_cmd) {
        TuningGrid grid{tune_ke, tune_kp, tune_fraction};
        const auto base = tune_opts.config();
        Json phases;
        auto data = load_dataset(tune_data);
        phases["load"] = clock.lap();
        auto result = tune(data, grid, base, base.seed);
        phases["tune"] = clock.lap();

        std::string report;
        for (std::size_t i = 0; i < result.rows.size(); ++i) {
            const auto& row = result.rows[i];
            Json j;
            j["k_e"] = row.k_e;
            j["k_p"] = row.k_p;
            j["splits"] = row.splits;
            j["edges"] = row.edges;
            j["holdout_ll"] = row.holdout_ll;
            j["best"] = i == result.best;
            report += j.dump() + "\n";
        }
        if (tune_report.empty())
            std::cout << report;
        else
            write_file_atomic(tune_report, report);

        LearnerConfig final_config = base;
        final_config.k_e = result.rows[result.best].k_e;
        final_config.k_p = result.rows[result.best].k_p;
        RunManifest m{{"command", "tune"}, {"tool_version", kToolVersion}, {"model", tune_out}};
        config_manifest(m, final_config);
        data_manifest(m, tune_data, data);
        result_manifest(m, result.final);
        std::string ke, kp;
        for (double x : tune_ke) ke += (ke.empty() ? "" : ",") + format_double(x);
        for (double x : tune_kp) kp += (kp.empty() ? "" : ",") + format_double(x);
        m["grid_k_e"] = ke;
        m["grid_k_p"] = kp;
        m["validation_fraction"] = format_double(tune_fraction);
        if (!tune_report.empty()) m["report"] = tune_report;
        if (!tune_trace.empty()) m["trace"] = tune_trace;
        save_model(tune_out, result.final.model, m);
        if (!tune_trace.empty()) write_trace(tune_trace, result.final);
        phases["save"] = clock.lap();
        write_timing(tune_timing.empty() ? tune_out + ".timing.json" : tune_timing, phases, &result.final);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const ImpossibleEvidence& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const InvariantViolation& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 3;
    }
}
