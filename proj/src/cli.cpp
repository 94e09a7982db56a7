#include "tkest/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "tkest/estimators.hpp"
#include "tkest/harness.hpp"
#include "tkest/index.hpp"
#include "tkest/prefix_store.hpp"
#include "tkest/query.hpp"
#include "tkest/subset_catalog.hpp"
#include "tkest/synthetic.hpp"

namespace tkest::cli {

namespace {

struct usage_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<std::string> read_lines(std::string const& path)
{
    std::ifstream in(path);
    if (!in) {
        throw io_error("cannot open '" + path + "'");
    }
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        lines.push_back(std::move(line));
    }
    return lines;
}

std::ofstream open_output(std::string const& path)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw io_error("cannot write '" + path + "'");
    }
    return out;
}

void finish(std::ofstream& out, std::string const& path)
{
    out.flush();
    if (!out) {
        throw io_error("write failed for '" + path + "'");
    }
}

std::vector<std::size_t> sorted_grid(std::vector<std::size_t> ks)
{
    if (ks.empty()) {
        throw usage_error("--k needs at least one value");
    }
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
    if (ks.front() == 0) {
        throw usage_error("--k values must be positive");
    }
    return ks;
}

Method method_flag(std::string const& name)
{
    auto m = parse_method(name);
    if (!m) {
        throw usage_error("unknown method '" + name + "' (quantile, rd, cs, lookups, sampled)");
    }
    return *m;
}

struct scorer_flags {
    std::string scorer = "bm25";
    double k1 = 0.9;
    double b = 0.4;
    double mu = 1000.0;
    int bits = 8;

    [[nodiscard]] ScorerParams params() const
    {
        ScorerParams p;
        if (scorer == "bm25") {
            p = ScorerParams::make_bm25(k1, b);
        } else if (scorer == "qld") {
            p = ScorerParams::make_qld(mu);
        } else {
            throw usage_error("unknown scorer '" + scorer + "' (bm25, qld)");
        }
        return p;
    }
};

struct policy_flags {
    std::string policy;
    std::vector<std::uint32_t> depths;

    [[nodiscard]] DepthPolicy resolve() const
    {
        if (!policy.empty() && !depths.empty()) {
            throw usage_error("--policy and --depths are mutually exclusive");
        }
        if (!depths.empty()) {
            return depth_schedule(depths);
        }
        try {
            return named_config(policy.empty() ? "medium" : policy);
        } catch (std::invalid_argument const& e) {
            throw usage_error(e.what());
        }
    }
};

struct sample_flags {
    std::string index;
    std::string store;
    double rate = 0.05;
    double epsilon = 1e-4;
};

struct artifacts {
    ImpactIndex index;
    PrefixStore store;
};

artifacts load_pair(std::string const& index_path, std::string const& store_path)
{
    auto index = load_index(index_path);
    auto store = load_store(store_path, &index);
    return {std::move(index), std::move(store)};
}

struct sample_artifacts {
    ImpactIndex index;
    PrefixStore store;
    SamplePlan plan;
};

sample_artifacts load_sample(sample_flags const& f, std::size_t k)
{
    if (f.index.empty() || f.store.empty()) {
        throw usage_error("the sampled method needs --sample-index and --sample-store");
    }
    SamplePlan plan;
    try {
        plan = SamplePlan::make(f.rate, f.epsilon, k);
    } catch (std::invalid_argument const& e) {
        throw usage_error(e.what());
    }
    auto index = load_index(f.index);
    auto store = load_store(f.store, &index);
    return {std::move(index), std::move(store), plan};
}

void add_sample_options(CLI::App* cmd, sample_flags& f)
{
    cmd->add_option("--sample-index", f.index, "Sampled index (sampled method)");
    cmd->add_option("--sample-store", f.store, "Store built on the sampled index (sampled method)");
    cmd->add_option("--rate", f.rate, "Sample rate s (presets: 0.02, 0.05)")->capture_default_str();
    cmd->add_option("--epsilon", f.epsilon, "Overestimate probability bound")->capture_default_str();
}

void add_budget_options(CLI::App* cmd, Budget& budget)
{
    cmd->add_option("--ab", budget.ab, "Access budget: prefix entries processed")->capture_default_str();
    cmd->add_option("--lb", budget.lb, "Lookup budget: accumulators completed by index lookups")
        ->capture_default_str();
}

}  // namespace

int run(std::span<std::string const> args, std::istream& in, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Top-k threshold estimation toolkit", "tkest"};
    app.require_subcommand(0, 1);
    app.fallthrough();
    app.set_version_flag("--version",
                         std::string("tkest ") + TKEST_VERSION + " (index format "
                             + std::to_string(index_format_version) + ", store format "
                             + std::to_string(store_format_version) + ")");
    unsigned threads = 1;
    std::uint64_t seed = default_seed;
    app.add_option("--threads", threads, "Worker thread cap")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "Random seed")->capture_default_str();

    // build-index
    auto* build_index_cmd = app.add_subcommand("build-index", "Build a quantized impact index from a TSV corpus");
    std::string corpus_path;
    std::string output_path;
    scorer_flags scorer;
    build_index_cmd->add_option("--corpus", corpus_path, "Corpus file, one `docname<TAB>text` per line")->required();
    build_index_cmd->add_option("--output", output_path, "Index file to write")->required();
    build_index_cmd->add_option("--scorer", scorer.scorer, "Scoring function: bm25 or qld")->capture_default_str();
    build_index_cmd->add_option("--k1", scorer.k1, "BM25 k1")->capture_default_str();
    build_index_cmd->add_option("--b", scorer.b, "BM25 b")->capture_default_str();
    build_index_cmd->add_option("--mu", scorer.mu, "Dirichlet mu for qld")->capture_default_str();
    build_index_cmd->add_option("--bits", scorer.bits, "Quantization bits (1-16)")
        ->capture_default_str()
        ->check(CLI::Range(1, 16));

    // load-impacts
    auto* load_impacts_cmd = app.add_subcommand("load-impacts", "Convert precomputed integer impacts to an index");
    std::string impacts_path;
    load_impacts_cmd->add_option("--input", impacts_path, "Impact file, one `term<TAB>doc:impact ...` per line")
        ->required();
    load_impacts_cmd->add_option("--output", output_path, "Index file to write")->required();

    // sample-index
    auto* sample_cmd = app.add_subcommand("sample-index", "Draw a seeded document sample of an index");
    std::string index_path;
    double rate = 0.05;
    sample_cmd->add_option("--index", index_path, "Source index")->required();
    sample_cmd->add_option("--output", output_path, "Sampled index to write")->required();
    sample_cmd->add_option("--rate", rate, "Sample rate in (0,1] (presets: 0.02, 0.05)")->capture_default_str();

    // mine-subsets
    auto* mine_cmd = app.add_subcommand("mine-subsets", "Mine term subsets from a query log and assign depths");
    std::string log_path;
    policy_flags policy;
    std::vector<std::size_t> ks{10, 100, 1000};
    std::size_t max_size = 0;
    mine_cmd->add_option("--index", index_path, "Index resolving query terms")->required();
    mine_cmd->add_option("--log", log_path, "Query log, one query per line")->required();
    mine_cmd->add_option("--output", output_path, "Catalog TSV to write")->required();
    mine_cmd->add_option("--policy", policy.policy, "Named depth policy: huge, large, medium, small");
    mine_cmd->add_option("--depths", policy.depths, "Explicit depths per subset size, e.g. 10000,10000,4000,3000")
        ->delimiter(',');
    mine_cmd->add_option("--k", ks, "k grid; prefixes are at least max(k) deep")->delimiter(',')->capture_default_str();
    mine_cmd->add_option("--max-size", max_size, "Largest subset size mined (default from the policy)");

    // build-store
    auto* store_cmd = app.add_subcommand("build-store", "Build the quantile and prefix store");
    std::string catalog_path;
    bool quantile_coverage = false;
    store_cmd->add_option("--index", index_path, "Index file")->required();
    store_cmd->add_option("--output", output_path, "Store file to write")->required();
    auto* catalog_opt = store_cmd->add_option("--catalog", catalog_path, "Catalog TSV from mine-subsets");
    auto* log_opt = store_cmd->add_option("--log", log_path, "Query log to mine directly");
    catalog_opt->excludes(log_opt);
    store_cmd->add_option("--policy", policy.policy, "Named depth policy when mining: huge, large, medium, small");
    store_cmd->add_option("--depths", policy.depths, "Explicit depths per subset size when mining")->delimiter(',');
    store_cmd->add_option("--k", ks, "k grid for stored thresholds")->delimiter(',')->capture_default_str();
    store_cmd->add_flag("--quantile-coverage", quantile_coverage,
                        "Store thresholds for every mined subset, including those without a prefix");

    // estimate
    auto* estimate_cmd = app.add_subcommand("estimate", "Estimate the top-k threshold of one query");
    std::string store_path;
    std::string method = "lookups";
    std::string query_text;
    std::size_t k = 10;
    Budget budget{1000, 100};
    bool no_backup = false;
    sample_flags sample;
    estimate_cmd->add_option("--index", index_path, "Index file")->required();
    estimate_cmd->add_option("--store", store_path, "Store file")->required();
    estimate_cmd->add_option("--method", method, "quantile, rd, cs, lookups or sampled")->capture_default_str();
    estimate_cmd->add_option("--k", k, "Rank of the threshold")->capture_default_str()->check(CLI::PositiveNumber);
    add_budget_options(estimate_cmd, budget);
    estimate_cmd->add_option("--query", query_text, "Query text (read from standard input when absent)");
    estimate_cmd->add_flag("--no-backup", no_backup, "Do not raise the estimate to the quantile estimate");
    add_sample_options(estimate_cmd, sample);

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "Measure MUF, overestimates and latency over a query file");
    std::string queries_path;
    std::string csv_path;
    std::string report_path;
    bool include_single = false;
    bool no_timing = false;
    eval_cmd->add_option("--index", index_path, "Index file")->required();
    eval_cmd->add_option("--store", store_path, "Store file")->required();
    eval_cmd->add_option("--queries", queries_path, "Query file, one query per line")->required();
    eval_cmd->add_option("--method", method, "quantile, rd, cs, lookups or sampled")->capture_default_str();
    eval_cmd->add_option("--k", k, "Rank of the threshold")->capture_default_str()->check(CLI::PositiveNumber);
    add_budget_options(eval_cmd, budget);
    eval_cmd->add_flag("--no-backup", no_backup, "Do not raise estimates to the quantile estimate");
    eval_cmd->add_flag("--include-single", include_single, "Also evaluate single-term queries");
    eval_cmd->add_flag("--no-timing", no_timing, "Skip timing and write time_ns = 0");
    eval_cmd->add_option("--csv", csv_path, "Per-query CSV to write");
    eval_cmd->add_option("--report-csv", report_path, "Summary CSV to write");
    add_sample_options(eval_cmd, sample);

    // bench-maxscore
    auto* bench_cmd = app.add_subcommand("bench-maxscore", "Compare MaxScore work across initial thresholds");
    bench_cmd->add_option("--index", index_path, "Index file")->required();
    bench_cmd->add_option("--store", store_path, "Store file")->required();
    bench_cmd->add_option("--queries", queries_path, "Query file, one query per line")->required();
    bench_cmd->add_option("--k", k, "Result size")->capture_default_str()->check(CLI::PositiveNumber);
    add_budget_options(bench_cmd, budget);
    bench_cmd->add_flag("--include-single", include_single, "Also run single-term queries");
    bench_cmd->add_option("--csv", csv_path, "Comparison CSV to write");

    // synth-corpus
    auto* synth_corpus_cmd = app.add_subcommand("synth-corpus", "Write a synthetic Zipfian corpus");
    synthetic::CorpusOptions corpus_opts;
    synth_corpus_cmd->add_option("--output", output_path, "Corpus file to write")->required();
    synth_corpus_cmd->add_option("--documents", corpus_opts.documents, "Document count")->capture_default_str();
    synth_corpus_cmd->add_option("--vocabulary", corpus_opts.vocabulary, "Vocabulary size")->capture_default_str();
    synth_corpus_cmd->add_option("--zipf", corpus_opts.zipf_exponent, "Zipf exponent")->capture_default_str();

    // synth-queries
    auto* synth_queries_cmd = app.add_subcommand("synth-queries", "Write a synthetic query file");
    synthetic::QueryOptions query_opts;
    synth_queries_cmd->add_option("--output", output_path, "Query file to write")->required();
    synth_queries_cmd->add_option("--queries", query_opts.queries, "Query count")->capture_default_str();
    synth_queries_cmd->add_option("--min-terms", query_opts.min_terms, "Shortest query")->capture_default_str();
    synth_queries_cmd->add_option("--max-terms", query_opts.max_terms, "Longest query")->capture_default_str();
    synth_queries_cmd->add_option("--first-rank", query_opts.first_rank, "Most frequent term rank drawn")
        ->capture_default_str();
    synth_queries_cmd->add_option("--last-rank", query_opts.last_rank, "Rank bound (exclusive)")
        ->capture_default_str();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(std::move(reversed));
    } catch (CLI::ParseError const& e) {
        int const code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }
    if (app.get_subcommands().empty()) {
        err << app.help();
        return 1;
    }

    try {
        if (build_index_cmd->parsed()) {
            save_index(build_index(corpus_path, scorer.params(), scorer.bits), output_path);
        } else if (load_impacts_cmd->parsed()) {
            save_index(load_precomputed(impacts_path), output_path);
        } else if (sample_cmd->parsed()) {
            if (!(rate > 0.0 && rate <= 1.0)) {
                throw usage_error("--rate must be in (0,1]");
            }
            auto const index = load_index(index_path);
            auto const sampled = sample_index(index, rate, seed);
            save_index(sampled, output_path);
            err << "sampled " << sampled.document_count() << " of " << index.document_count() << " documents\n";
        } else if (mine_cmd->parsed()) {
            auto const p = policy.resolve();
            auto const grid = sorted_grid(ks);
            auto const index = load_index(index_path);
            auto const stats = mine_subsets(log_path, index, max_size == 0 ? p.max_size() : max_size,
                                            p.min_frequency_to_keep);
            auto const catalog = assign_depths(stats, p, static_cast<std::uint32_t>(grid.back()));
            auto file = open_output(output_path);
            write_catalog(catalog, index, file);
            finish(file, output_path);
            err << "mined " << stats.size() << " subsets, kept " << catalog.size() << '\n';
        } else if (store_cmd->parsed()) {
            auto const grid = sorted_grid(ks);
            if (catalog_path.empty() && log_path.empty()) {
                throw usage_error("build-store needs --catalog or --log");
            }
            if (!catalog_path.empty() && (!policy.policy.empty() || !policy.depths.empty())) {
                throw usage_error("--policy and --depths apply only with --log");
            }
            auto const index = load_index(index_path);
            std::vector<CatalogEntry> catalog;
            std::string policy_name = "catalog";
            if (!catalog_path.empty()) {
                std::ifstream file(catalog_path);
                if (!file) {
                    throw io_error("cannot open '" + catalog_path + "'");
                }
                catalog = read_catalog(file, index);
            } else {
                auto const p = policy.resolve();
                policy_name = p.name;
                auto const stats = mine_subsets(log_path, index, p.max_size(), p.min_frequency_to_keep);
                catalog = assign_depths(stats, p, static_cast<std::uint32_t>(grid.back()));
                if (quantile_coverage) {
                    catalog = with_quantile_coverage(std::move(catalog), mine_subsets(log_path, index, p.max_size()));
                }
            }
            StoreBuildOptions options;
            options.k_values = grid;
            options.policy_name = policy_name;
            options.threads = threads;
            auto result = build_store(index, catalog, options);
            save_store(result.store, output_path);
            auto const sizes = store_size_report(result.store);
            err << "stored " << result.store.size() << " subsets (" << result.skipped_subsets << " skipped), "
                << sizes.total() << " bytes\n";
        } else if (estimate_cmd->parsed()) {
            auto const m = method_flag(method);
            auto const [index, store] = load_pair(index_path, store_path);
            if (query_text.empty() && estimate_cmd->count("--query") == 0) {
                std::getline(in, query_text);
            }
            Estimate e;
            if (m == Method::sampled) {
                auto const s = load_sample(sample, k);
                e = estimate_sampled(s.store, s.index, parse_query(s.index, query_text), budget, s.plan);
            } else {
                if (m == Method::quantile && !store.k_slot(k)) {
                    throw usage_error("--k " + std::to_string(k) + " is not in the store's k grid");
                }
                e = run_estimator(m, store, index, parse_query(index, query_text), k, budget, !no_backup);
            }
            out << "estimate\t" << e.value << "\nab_used\t" << e.ab_used << "\nlb_used\t" << e.lb_used << '\n';
        } else if (eval_cmd->parsed()) {
            EvalConfig config;
            config.method = method_flag(method);
            config.k = k;
            config.budget = budget;
            config.backup = !no_backup;
            config.include_single = include_single;
            config.timing = !no_timing;
            config.threads = threads;
            auto const [index, store] = load_pair(index_path, store_path);
            if (config.method == Method::quantile && !store.k_slot(k)) {
                throw usage_error("--k " + std::to_string(k) + " is not in the store's k grid");
            }
            std::optional<sample_artifacts> s;
            if (config.method == Method::sampled) {
                s = load_sample(sample, k);
                config.sample = SampleArtifacts{&s->index, &s->store, s->plan};
            }
            auto const queries = read_lines(queries_path);
            auto const result = evaluate(index, store, queries, config);
            print_report(result.report, out);
            if (!csv_path.empty()) {
                write_csv(result.records, csv_path);
            }
            if (!report_path.empty()) {
                auto file = open_output(report_path);
                write_report_csv(result.report, file);
                finish(file, report_path);
            }
        } else if (bench_cmd->parsed()) {
            auto const [index, store] = load_pair(index_path, store_path);
            BenchConfig config;
            config.k = k;
            config.budget = budget;
            config.include_single = include_single;
            auto const result = bench_maxscore(index, store, read_lines(queries_path), config);
            print_bench(result, out);
            if (!csv_path.empty()) {
                auto file = open_output(csv_path);
                write_bench_csv(result, file);
                finish(file, csv_path);
            }
        } else if (synth_corpus_cmd->parsed()) {
            corpus_opts.seed = seed;
            auto file = open_output(output_path);
            synthetic::write_corpus(corpus_opts, file);
            finish(file, output_path);
        } else if (synth_queries_cmd->parsed()) {
            query_opts.seed = seed;
            auto const queries = synthetic::queries(query_opts);
            auto file = open_output(output_path);
            for (auto const& q : queries) {
                file << q << '\n';
            }
            finish(file, output_path);
        }
    } catch (usage_error const& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (std::invalid_argument const& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (std::exception const& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}

int run(int argc, char const* const* argv)
{
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) {
        args.emplace_back(argv[i]);
    }
    return run(args, std::cin, std::cout, std::cerr);
}

}  // namespace tkest::cli
