#pragma once

#include <chrono>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "tkest/index.hpp"
#include "tkest/query.hpp"

namespace tkest {

struct ScoredDoc {
    DocId doc;
    Score score = 0;

    friend bool operator==(ScoredDoc const&, ScoredDoc const&) = default;
};

/// Entries are sorted by descending score, ascending docID on ties.
struct TopKResult {
    std::vector<ScoredDoc> entries;
    Score threshold = 0;  ///< k-th score, 0 when fewer than k documents match
};

struct EngineStats {
    std::uint64_t postings_scored = 0;     ///< impacts added into a document score
    std::uint64_t documents_evaluated = 0; ///< candidate documents visited
    std::uint64_t heap_insertions = 0;
    std::chrono::nanoseconds elapsed{0};
};

/// Exhaustive document-at-a-time disjunctive top-k over the query's lists.
[[nodiscard]] TopKResult exact_topk(ImpactIndex const& index, Query const& query, std::size_t k);

[[nodiscard]] Score exact_threshold(ImpactIndex const& index, Query const& query, std::size_t k);

/// k-th largest disjunctive score for several k at once (one traversal).
/// Returned values follow the order of `ks`.
[[nodiscard]] std::vector<Score> exact_thresholds(ImpactIndex const& index,
                                                  Query const& query,
                                                  std::span<std::size_t const> ks);

/// MaxScore top-k seeded with `initial_threshold`.
///
/// The caller guarantees initial_threshold <= exact_threshold(index, query, k).
/// Heap admission is strict (score > theta), so when the seed equals the
/// exact threshold the documents tying it are never admitted and `entries`
/// may hold fewer than k results; `threshold` is still the exact value.
[[nodiscard]] std::pair<TopKResult, EngineStats> maxscore_topk(ImpactIndex const& index,
                                                               Query const& query,
                                                               std::size_t k,
                                                               Score initial_threshold);

}  // namespace tkest
