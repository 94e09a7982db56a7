#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tkest/estimators.hpp"
#include "tkest/index.hpp"
#include "tkest/prefix_store.hpp"

namespace tkest {

struct EvalRecord {
    std::size_t query_id = 0;
    std::size_t qlen = 0;
    std::size_t k = 0;
    Method method = Method::quantile;
    Score estimate = 0;
    Score exact = 0;
    double ratio = 0.0;  ///< estimate / exact; NaN when exact == 0
    bool overestimate = false;
    std::size_t ab_used = 0;
    std::size_t lb_used = 0;
    std::int64_t time_ns = 0;
};

[[nodiscard]] EvalRecord make_record(std::size_t query_id, std::size_t qlen, std::size_t k, Estimate const& est, Score exact);

struct MufSummary {
    std::optional<double> muf;        ///< empty when no record is eligible
    double overestimate_rate = 0.0;   ///< over records with exact > 0
    std::size_t eligible = 0;         ///< exact > 0 and no overestimate
    std::size_t overestimates = 0;
    std::size_t excluded_zero_exact = 0;
};

/// Mean of estimate/exact over non-overestimating records with exact > 0.
[[nodiscard]] MufSummary compute_muf(std::span<EvalRecord const> records);

/// Query lengths are bucketed as 1, 2, 3, 4 and 5+ (bucket 5).
struct LengthBucket {
    std::size_t length = 0;
    MufSummary summary;
    std::size_t queries = 0;
};

struct EvalReport {
    Method method = Method::quantile;
    std::size_t k = 0;
    std::size_t query_count = 0;       ///< queries evaluated
    std::size_t excluded_single = 0;   ///< single-term queries skipped
    std::size_t excluded_empty = 0;    ///< queries with no known term
    MufSummary summary;
    double mean_ab_used = 0.0;
    double mean_lb_used = 0.0;
    std::int64_t p50_ns = 0;
    std::int64_t p95_ns = 0;
    std::vector<LengthBucket> by_length;
};

struct SampleArtifacts {
    ImpactIndex const* index = nullptr;
    PrefixStore const* store = nullptr;
    SamplePlan plan;
};

struct EvalConfig {
    Method method = Method::lookups;
    std::size_t k = 10;
    Budget budget;
    bool backup = true;
    bool include_single = false;
    bool timing = true;  ///< false writes time_ns = 0 (byte-stable output)
    unsigned threads = 1;
    std::optional<SampleArtifacts> sample;  ///< required for Method::sampled
};

struct EvalResult {
    EvalReport report;
    std::vector<EvalRecord> records;  ///< ordered by query_id
};

/// Throws compatibility_error before any work if the store does not belong
/// to the index. Query ids are positions in `queries`.
[[nodiscard]] EvalResult evaluate(ImpactIndex const& index,
                                  PrefixStore const& store,
                                  std::span<std::string const> queries,
                                  EvalConfig const& config);

/// Aggregates records already computed (used by evaluate).
[[nodiscard]] EvalReport summarize(std::span<EvalRecord const> records, Method method, std::size_t k);

enum class ThresholdSource : std::uint8_t { zero, quantile, lookups, exact };
[[nodiscard]] std::string_view source_name(ThresholdSource source) noexcept;

struct BenchConfig {
    std::size_t k = 10;
    Budget budget{1000, 100};
    bool include_single = false;
    std::vector<ThresholdSource> sources{ThresholdSource::zero, ThresholdSource::quantile, ThresholdSource::lookups,
                                         ThresholdSource::exact};
};

struct BenchQueryRecord {
    std::size_t query_id = 0;
    ThresholdSource source = ThresholdSource::zero;
    Score initial_threshold = 0;
    Score returned_threshold = 0;
    Score exact = 0;
    std::uint64_t postings_scored = 0;
    std::uint64_t documents_evaluated = 0;
    std::int64_t engine_ns = 0;
    std::int64_t estimation_ns = 0;
};

struct BenchRow {
    ThresholdSource source = ThresholdSource::zero;
    std::size_t queries = 0;
    double mean_postings_scored = 0.0;
    double mean_engine_ns = 0.0;
    double mean_estimation_ns = 0.0;
    /// Engine time saved against the zero seed minus the estimation cost.
    double mean_net_saving_ns = 0.0;
    std::size_t threshold_mismatches = 0;  ///< returned threshold != exact
};

struct BenchResult {
    std::vector<BenchRow> rows;
    std::vector<BenchQueryRecord> per_query;  ///< query-major, source order as configured
};

[[nodiscard]] BenchResult bench_maxscore(ImpactIndex const& index,
                                         PrefixStore const& store,
                                         std::span<std::string const> queries,
                                         BenchConfig const& config);

/// Columns: query_id,qlen,k,method,estimate,exact,ratio,overestimate,ab_used,lb_used,time_ns
void write_csv(std::span<EvalRecord const> records, std::ostream& out);
void write_csv(std::span<EvalRecord const> records, std::string const& path);
[[nodiscard]] std::vector<EvalRecord> read_csv(std::istream& in);

void write_report_csv(EvalReport const& report, std::ostream& out);
void print_report(EvalReport const& report, std::ostream& out);

void write_bench_csv(BenchResult const& result, std::ostream& out);
void print_bench(BenchResult const& result, std::ostream& out);

}  // namespace tkest
