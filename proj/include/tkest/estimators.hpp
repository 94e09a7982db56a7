#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "tkest/index.hpp"
#include "tkest/prefix_store.hpp"
#include "tkest/query.hpp"

namespace tkest {

enum class Method : std::uint8_t { quantile, remove_duplicates, combine_scores, lookups, sampled };

/// CSV names: quantile, rd, cs, lookups, sampled.
[[nodiscard]] std::string_view method_name(Method method) noexcept;
[[nodiscard]] std::optional<Method> parse_method(std::string_view name) noexcept;

struct Budget {
    std::size_t ab = 1000;  ///< prefix entries processed
    std::size_t lb = 0;     ///< accumulators receiving index lookups
};

struct Estimate {
    Score value = 0;
    Method method = Method::quantile;
    std::size_t ab_used = 0;
    std::size_t lb_used = 0;
    bool backed_by_quantile = false;
};

/// Running partial score of one document. Bit i of `known_terms` is set once
/// the score of query term i (in Query::terms order) has been added.
struct Accumulator {
    DocId doc;
    Score partial = 0;
    std::uint64_t known_terms = 0;
};

/// Estimators track term membership in a 64-bit mask.
constexpr std::size_t max_estimator_query_terms = 64;

/// max over stored subsets s of the query of th(s, k); 0 when none match.
/// Throws std::invalid_argument if k is not in the store's grid.
[[nodiscard]] Estimate estimate_quantile(PrefixStore const& store, Query const& query, std::size_t k);

/// Like estimate_quantile, but for k outside the grid uses the smallest grid
/// value above k (th(s, k') <= th(s, k) for k' >= k), or 0 if there is none.
[[nodiscard]] Score quantile_lower_bound(PrefixStore const& store, Query const& query, std::size_t k);

/// Walks all matching prefixes in one descending-total stream and returns the
/// total of the k-th distinct docID, or 0 if ab entries do not yield k.
[[nodiscard]] Estimate estimate_remove_duplicates(PrefixStore const& store,
                                                  Query const& query,
                                                  std::size_t k,
                                                  std::size_t ab);

struct CombineResult {
    Estimate estimate;
    std::vector<Accumulator> accumulators;  ///< in first-seen order
};

/// Processes up to ab entries of the merged stream, adding each unseen term
/// score into the document's accumulator. Value is the k-th largest partial.
[[nodiscard]] CombineResult estimate_combine_scores(PrefixStore const& store,
                                                    Query const& query,
                                                    std::size_t k,
                                                    std::size_t ab);

/// Combine Scores, then fills the missing term scores of the lb best
/// accumulators through ascending-docID index lookups.
[[nodiscard]] CombineResult estimate_with_lookups_detailed(PrefixStore const& store,
                                                           ImpactIndex const& index,
                                                           Query const& query,
                                                           std::size_t k,
                                                           Budget budget);

[[nodiscard]] Estimate estimate_with_lookups(PrefixStore const& store,
                                             ImpactIndex const& index,
                                             Query const& query,
                                             std::size_t k,
                                             Budget budget);

/// max(primary, quantile); sets backed_by_quantile when the quantile wins.
[[nodiscard]] Estimate with_quantile_backup(Estimate primary, PrefixStore const& store, Query const& query, std::size_t k);

/// P[Binomial(k-1, s) >= k'], the chance that a top-k' threshold on an
/// s-sample exceeds the full top-k threshold. 0 when k' >= k.
[[nodiscard]] double overestimate_probability(std::size_t k, std::size_t k_prime, double s);

/// Smallest k' >= 1 with overestimate_probability(k, k', s) <= epsilon.
[[nodiscard]] std::size_t choose_k_prime(std::size_t k, double s, double epsilon);

struct SamplePlan {
    double rate = 0.05;
    double epsilon = 1e-4;
    std::size_t k = 10;
    std::size_t k_prime = 10;

    /// Picks k' for (k, rate, epsilon); throws on an invalid rate or epsilon.
    [[nodiscard]] static SamplePlan make(double rate, double epsilon, std::size_t k);
    void validate() const;
};

/// Lookups estimate of the top-k' threshold on the sample, backed by the
/// sample's quantiles. `query` must be resolved against `sample_index`.
/// Not safe: overestimates with probability at most plan.epsilon.
[[nodiscard]] Estimate estimate_sampled(PrefixStore const& sample_store,
                                        ImpactIndex const& sample_index,
                                        Query const& query,
                                        Budget budget,
                                        SamplePlan const& plan);

/// Runs `method` (not `sampled`) on the full-collection artifacts, optionally
/// applying the quantile backup.
[[nodiscard]] Estimate run_estimator(Method method,
                                     PrefixStore const& store,
                                     ImpactIndex const& index,
                                     Query const& query,
                                     std::size_t k,
                                     Budget budget,
                                     bool backup = true);

}  // namespace tkest
