#include "tkest/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include "tkest/query_engine.hpp"

namespace tkest {

namespace {

using clock_type = std::chrono::steady_clock;

std::int64_t elapsed_ns(clock_type::time_point start)
{
    return std::chrono::duration_cast<std::chrono::nanoseconds>(clock_type::now() - start).count();
}

std::string fixed6(double v)
{
    if (std::isnan(v)) {
        return "nan";
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn)
{
    unsigned const workers = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(n)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                fn(i);
            }
        });
    }
}

std::int64_t percentile(std::vector<std::int64_t> values, double p)
{
    if (values.empty()) {
        return 0;
    }
    std::sort(values.begin(), values.end());
    auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(values.size())));
    rank = std::clamp<std::size_t>(rank, 1, values.size());
    return values[rank - 1];
}

}  // namespace

EvalRecord make_record(std::size_t query_id, std::size_t qlen, std::size_t k, Estimate const& est, Score exact)
{
    EvalRecord r;
    r.query_id = query_id;
    r.qlen = qlen;
    r.k = k;
    r.method = est.method;
    r.estimate = est.value;
    r.exact = exact;
    r.ratio = exact > 0 ? static_cast<double>(est.value) / static_cast<double>(exact)
                        : std::numeric_limits<double>::quiet_NaN();
    r.overestimate = est.value > exact;
    r.ab_used = est.ab_used;
    r.lb_used = est.lb_used;
    return r;
}

MufSummary compute_muf(std::span<EvalRecord const> records)
{
    MufSummary s;
    double sum = 0.0;
    std::size_t with_exact = 0;
    for (auto const& r : records) {
        if (r.exact == 0) {
            ++s.excluded_zero_exact;
            continue;
        }
        ++with_exact;
        if (r.overestimate) {
            ++s.overestimates;
            continue;
        }
        ++s.eligible;
        sum += r.ratio;
    }
    if (s.eligible > 0) {
        s.muf = sum / static_cast<double>(s.eligible);
    }
    s.overestimate_rate = with_exact > 0 ? static_cast<double>(s.overestimates) / static_cast<double>(with_exact) : 0.0;
    return s;
}

EvalReport summarize(std::span<EvalRecord const> records, Method method, std::size_t k)
{
    EvalReport rep;
    rep.method = method;
    rep.k = k;
    rep.query_count = records.size();
    rep.summary = compute_muf(records);
    std::vector<std::int64_t> times;
    times.reserve(records.size());
    for (auto const& r : records) {
        rep.mean_ab_used += static_cast<double>(r.ab_used);
        rep.mean_lb_used += static_cast<double>(r.lb_used);
        times.push_back(r.time_ns);
    }
    if (!records.empty()) {
        rep.mean_ab_used /= static_cast<double>(records.size());
        rep.mean_lb_used /= static_cast<double>(records.size());
    }
    rep.p50_ns = percentile(times, 0.50);
    rep.p95_ns = percentile(times, 0.95);
    for (std::size_t len = 1; len <= 5; ++len) {
        std::vector<EvalRecord> bucket;
        for (auto const& r : records) {
            if (std::min<std::size_t>(r.qlen, 5) == len) {
                bucket.push_back(r);
            }
        }
        if (!bucket.empty()) {
            rep.by_length.push_back({len, compute_muf(bucket), bucket.size()});
        }
    }
    return rep;
}

EvalResult evaluate(ImpactIndex const& index,
                    PrefixStore const& store,
                    std::span<std::string const> queries,
                    EvalConfig const& config)
{
    store.check_compatible(index);
    bool const sampled = config.method == Method::sampled;
    if (sampled) {
        if (!config.sample || config.sample->index == nullptr || config.sample->store == nullptr) {
            throw std::invalid_argument("evaluate: the sampled method needs sample artifacts");
        }
        config.sample->store->check_compatible(*config.sample->index);
        config.sample->plan.validate();
    }

    struct job {
        std::size_t query_id;
        Query query;
        Query sample_query;
    };
    std::vector<job> jobs;
    EvalResult result;
    for (std::size_t id = 0; id < queries.size(); ++id) {
        auto q = parse_query(index, queries[id]);
        if (q.empty()) {
            ++result.report.excluded_empty;
            continue;
        }
        if (q.size() == 1 && !config.include_single) {
            ++result.report.excluded_single;
            continue;
        }
        Query sq = sampled ? parse_query(*config.sample->index, queries[id]) : Query{};
        jobs.push_back({id, std::move(q), std::move(sq)});
    }

    auto run = [&](job const& j) {
        if (sampled) {
            return estimate_sampled(*config.sample->store, *config.sample->index, j.sample_query, config.budget,
                                    config.sample->plan);
        }
        return run_estimator(config.method, store, index, j.query, config.k, config.budget, config.backup);
    };

    if (config.timing) {
        parallel_for(jobs.size(), config.threads, [&](std::size_t i) { (void)run(jobs[i]); });
    }
    std::vector<EvalRecord> records(jobs.size());
    parallel_for(jobs.size(), config.threads, [&](std::size_t i) {
        auto const& j = jobs[i];
        auto const start = clock_type::now();
        auto est = run(j);
        auto const ns = elapsed_ns(start);
        auto const exact = exact_threshold(index, j.query, config.k);
        records[i] = make_record(j.query_id, j.query.size(), config.k, est, exact);
        records[i].time_ns = config.timing ? ns : 0;
    });

    auto excluded_single = result.report.excluded_single;
    auto excluded_empty = result.report.excluded_empty;
    result.report = summarize(records, config.method, config.k);
    result.report.excluded_single = excluded_single;
    result.report.excluded_empty = excluded_empty;
    result.records = std::move(records);
    return result;
}

std::string_view source_name(ThresholdSource source) noexcept
{
    switch (source) {
    case ThresholdSource::zero: return "zero";
    case ThresholdSource::quantile: return "quantile";
    case ThresholdSource::lookups: return "lookups";
    case ThresholdSource::exact: return "exact";
    }
    return "unknown";
}

BenchResult bench_maxscore(ImpactIndex const& index,
                           PrefixStore const& store,
                           std::span<std::string const> queries,
                           BenchConfig const& config)
{
    store.check_compatible(index);
    BenchResult result;
    auto const n_sources = config.sources.size();
    std::vector<double> zero_engine;

    for (std::size_t id = 0; id < queries.size(); ++id) {
        auto q = parse_query(index, queries[id]);
        if (q.empty() || (q.size() == 1 && !config.include_single)) {
            continue;
        }
        auto const exact = exact_threshold(index, q, config.k);
        (void)maxscore_topk(index, q, config.k, 0);  // warm-up
        auto const zero_run = maxscore_topk(index, q, config.k, 0);
        zero_engine.push_back(static_cast<double>(zero_run.second.elapsed.count()));
        for (auto source : config.sources) {
            BenchQueryRecord rec;
            rec.query_id = id;
            rec.source = source;
            rec.exact = exact;
            auto const start = clock_type::now();
            switch (source) {
            case ThresholdSource::zero: rec.initial_threshold = 0; break;
            case ThresholdSource::quantile: rec.initial_threshold = quantile_lower_bound(store, q, config.k); break;
            case ThresholdSource::lookups:
                rec.initial_threshold = run_estimator(Method::lookups, store, index, q, config.k, config.budget).value;
                break;
            case ThresholdSource::exact: rec.initial_threshold = exact; break;
            }
            rec.estimation_ns = (source == ThresholdSource::quantile || source == ThresholdSource::lookups)
                ? elapsed_ns(start)
                : 0;
            auto [top, stats] = source == ThresholdSource::zero ? zero_run
                                                                : maxscore_topk(index, q, config.k, rec.initial_threshold);
            rec.returned_threshold = top.threshold;
            rec.postings_scored = stats.postings_scored;
            rec.documents_evaluated = stats.documents_evaluated;
            rec.engine_ns = stats.elapsed.count();
            result.per_query.push_back(rec);
        }
    }

    auto const n_queries = zero_engine.size();
    for (std::size_t s = 0; s < n_sources; ++s) {
        BenchRow row;
        row.source = config.sources[s];
        row.queries = n_queries;
        double saving = 0.0;
        for (std::size_t q = 0; q < n_queries; ++q) {
            auto const& rec = result.per_query[q * n_sources + s];
            row.mean_postings_scored += static_cast<double>(rec.postings_scored);
            row.mean_engine_ns += static_cast<double>(rec.engine_ns);
            row.mean_estimation_ns += static_cast<double>(rec.estimation_ns);
            saving += zero_engine[q] - static_cast<double>(rec.engine_ns);
            if (rec.returned_threshold != rec.exact) {
                ++row.threshold_mismatches;
            }
        }
        if (n_queries > 0) {
            auto const d = static_cast<double>(n_queries);
            row.mean_postings_scored /= d;
            row.mean_engine_ns /= d;
            row.mean_estimation_ns /= d;
            row.mean_net_saving_ns = saving / d - row.mean_estimation_ns;
        }
        result.rows.push_back(row);
    }
    return result;
}

void write_csv(std::span<EvalRecord const> records, std::ostream& out)
{
    out << "query_id,qlen,k,method,estimate,exact,ratio,overestimate,ab_used,lb_used,time_ns\n";
    for (auto const& r : records) {
        out << r.query_id << ',' << r.qlen << ',' << r.k << ',' << method_name(r.method) << ',' << r.estimate << ','
            << r.exact << ',' << fixed6(r.ratio) << ',' << (r.overestimate ? 1 : 0) << ',' << r.ab_used << ','
            << r.lb_used << ',' << r.time_ns << '\n';
    }
}

void write_csv(std::span<EvalRecord const> records, std::string const& path)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw io_error("cannot write '" + path + "'");
    }
    write_csv(records, out);
    out.flush();
    if (!out) {
        throw io_error("write failed for '" + path + "'");
    }
}

std::vector<EvalRecord> read_csv(std::istream& in)
{
    std::vector<EvalRecord> out;
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) {
        return out;
    }
    ++line_no;
    if (line != "query_id,qlen,k,method,estimate,exact,ratio,overestimate,ab_used,lb_used,time_ns") {
        throw parse_error("csv: unexpected header", line_no);
    }
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> f;
        std::istringstream fields(line);
        std::string cell;
        while (std::getline(fields, cell, ',')) {
            f.push_back(cell);
        }
        if (f.size() != 11) {
            throw parse_error("csv: expected 11 columns", line_no);
        }
        try {
            EvalRecord r;
            r.query_id = std::stoull(f[0]);
            r.qlen = std::stoull(f[1]);
            r.k = std::stoull(f[2]);
            auto m = parse_method(f[3]);
            if (!m) {
                throw parse_error("csv: unknown method '" + f[3] + "'", line_no);
            }
            r.method = *m;
            r.estimate = std::stoull(f[4]);
            r.exact = std::stoull(f[5]);
            r.ratio = f[6] == "nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(f[6]);
            r.overestimate = f[7] == "1";
            r.ab_used = std::stoull(f[8]);
            r.lb_used = std::stoull(f[9]);
            r.time_ns = std::stoll(f[10]);
            out.push_back(r);
        } catch (std::logic_error const&) {
            throw parse_error("csv: bad number", line_no);
        }
    }
    return out;
}

namespace {

std::string muf_cell(std::optional<double> muf) { return muf ? fixed6(*muf) : "nan"; }

std::optional<double> bucket_muf(EvalReport const& report, std::size_t len)
{
    for (auto const& b : report.by_length) {
        if (b.length == len) {
            return b.summary.muf;
        }
    }
    return std::nullopt;
}

}  // namespace

void write_report_csv(EvalReport const& report, std::ostream& out)
{
    out << "method,k,queries,excluded_zero_exact,excluded_single,muf,overestimate_rate,mean_ab_used,mean_lb_used,"
           "p50_ns,p95_ns,muf_len2,muf_len3,muf_len4,muf_len5plus\n";
    out << method_name(report.method) << ',' << report.k << ',' << report.query_count << ','
        << report.summary.excluded_zero_exact << ',' << report.excluded_single << ',' << muf_cell(report.summary.muf)
        << ',' << fixed6(report.summary.overestimate_rate) << ',' << fixed6(report.mean_ab_used) << ','
        << fixed6(report.mean_lb_used) << ',' << report.p50_ns << ',' << report.p95_ns;
    for (std::size_t len = 2; len <= 5; ++len) {
        out << ',' << muf_cell(bucket_muf(report, len));
    }
    out << '\n';
}

void print_report(EvalReport const& report, std::ostream& out)
{
    out << "method            " << method_name(report.method) << '\n'
        << "k                 " << report.k << '\n'
        << "queries           " << report.query_count << " (" << report.excluded_single << " single-term and "
        << report.excluded_empty << " empty skipped, " << report.summary.excluded_zero_exact
        << " with zero exact threshold)\n"
        << "MUF               " << muf_cell(report.summary.muf) << '\n'
        << "overestimate rate " << fixed6(report.summary.overestimate_rate) << '\n'
        << "mean ab used      " << fixed6(report.mean_ab_used) << '\n'
        << "mean lb used      " << fixed6(report.mean_lb_used) << '\n'
        << "latency p50/p95   " << report.p50_ns << " / " << report.p95_ns << " ns\n";
    for (auto const& b : report.by_length) {
        out << "  qlen " << (b.length == 5 ? "5+" : std::to_string(b.length) + " ") << "       MUF "
            << muf_cell(b.summary.muf) << "  (" << b.queries << " queries)\n";
    }
}

void write_bench_csv(BenchResult const& result, std::ostream& out)
{
    out << "source,queries,mean_postings_scored,mean_engine_ns,mean_estimation_ns,mean_net_saving_ns,"
           "threshold_mismatches\n";
    for (auto const& r : result.rows) {
        out << source_name(r.source) << ',' << r.queries << ',' << fixed6(r.mean_postings_scored) << ','
            << fixed6(r.mean_engine_ns) << ',' << fixed6(r.mean_estimation_ns) << ',' << fixed6(r.mean_net_saving_ns)
            << ',' << r.threshold_mismatches << '\n';
    }
}

void print_bench(BenchResult const& result, std::ostream& out)
{
    out << std::left << std::setw(10) << "source" << std::right << std::setw(16) << "postings" << std::setw(14)
        << "engine ns" << std::setw(14) << "estimate ns" << std::setw(14) << "net saving" << std::setw(12)
        << "mismatch" << '\n';
    for (auto const& r : result.rows) {
        out << std::left << std::setw(10) << source_name(r.source) << std::right << std::fixed << std::setprecision(1)
            << std::setw(16) << r.mean_postings_scored << std::setw(14) << r.mean_engine_ns << std::setw(14)
            << r.mean_estimation_ns << std::setw(14) << r.mean_net_saving_ns << std::setw(12)
            << r.threshold_mismatches << '\n';
    }
}

}  // namespace tkest
