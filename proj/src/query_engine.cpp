#include "tkest/query_engine.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <queue>

namespace tkest {

namespace {

/// Orders the heap so its top is the weakest entry: lowest score, and among
/// equal scores the largest docID.
struct weaker_on_top {
    bool operator()(ScoredDoc const& a, ScoredDoc const& b) const noexcept
    {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        return a.doc < b.doc;
    }
};

using topk_heap = std::priority_queue<ScoredDoc, std::vector<ScoredDoc>, weaker_on_top>;

std::vector<ScoredDoc> drain_sorted(topk_heap heap)
{
    std::vector<ScoredDoc> out;
    out.reserve(heap.size());
    while (!heap.empty()) {
        out.push_back(heap.top());
        heap.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
}

struct cursor {
    PostingList const* list = nullptr;
    std::size_t pos = 0;

    [[nodiscard]] bool done() const noexcept { return pos >= list->size(); }
    [[nodiscard]] DocId doc() const noexcept { return list->postings()[pos].doc; }
    [[nodiscard]] Impact impact() const noexcept { return list->postings()[pos].impact; }
    void next_geq(DocId d) noexcept { pos = list->next_geq(d, pos); }
};

constexpr auto no_doc = std::numeric_limits<std::uint32_t>::max();

/// Runs a DAAT union over the query lists, calling `visit(doc, score)` once
/// per matching document in docID order.
template <typename Visit>
void for_each_disjunctive(ImpactIndex const& index, Query const& query, Visit&& visit)
{
    std::vector<cursor> cursors;
    cursors.reserve(query.size());
    for (auto term : query.terms) {
        cursors.push_back({&index.list(term), 0});
    }
    while (true) {
        std::uint32_t current = no_doc;
        for (auto const& c : cursors) {
            if (!c.done()) {
                current = std::min(current, c.doc().value);
            }
        }
        if (current == no_doc) {
            return;
        }
        Score score = 0;
        for (auto& c : cursors) {
            if (!c.done() && c.doc().value == current) {
                score += c.impact();
                ++c.pos;
            }
        }
        visit(DocId(current), score);
    }
}

void admit(topk_heap& heap, std::size_t k, ScoredDoc entry)
{
    if (heap.size() < k) {
        heap.push(entry);
    } else if (entry.score > heap.top().score) {
        heap.pop();
        heap.push(entry);
    }
}

}  // namespace

TopKResult exact_topk(ImpactIndex const& index, Query const& query, std::size_t k)
{
    if (k == 0) {
        throw std::invalid_argument("exact_topk: k must be >= 1");
    }
    topk_heap heap;
    for_each_disjunctive(index, query, [&](DocId doc, Score score) { admit(heap, k, {doc, score}); });
    TopKResult result;
    result.entries = drain_sorted(std::move(heap));
    result.threshold = result.entries.size() == k ? result.entries.back().score : 0;
    return result;
}

Score exact_threshold(ImpactIndex const& index, Query const& query, std::size_t k)
{
    return exact_topk(index, query, k).threshold;
}

std::vector<Score> exact_thresholds(ImpactIndex const& index, Query const& query, std::span<std::size_t const> ks)
{
    if (ks.empty()) {
        return {};
    }
    auto const k_max = *std::max_element(ks.begin(), ks.end());
    if (*std::min_element(ks.begin(), ks.end()) == 0) {
        throw std::invalid_argument("exact_thresholds: k must be >= 1");
    }
    topk_heap heap;
    for_each_disjunctive(index, query, [&](DocId doc, Score score) { admit(heap, k_max, {doc, score}); });
    auto sorted = drain_sorted(std::move(heap));
    std::vector<Score> out;
    out.reserve(ks.size());
    for (auto k : ks) {
        out.push_back(sorted.size() >= k ? sorted[k - 1].score : 0);
    }
    return out;
}

std::pair<TopKResult, EngineStats> maxscore_topk(ImpactIndex const& index,
                                                 Query const& query,
                                                 std::size_t k,
                                                 Score initial_threshold)
{
    if (k == 0) {
        throw std::invalid_argument("maxscore_topk: k must be >= 1");
    }
    auto const start = std::chrono::steady_clock::now();
    EngineStats stats;

    // Terms ordered by ascending max impact; upper_bound[i] is the summed max
    // impact of terms [0, i].
    std::vector<cursor> cursors;
    std::vector<Score> max_scores;
    {
        std::vector<TermId> terms = query.terms;
        std::stable_sort(terms.begin(), terms.end(), [&](TermId a, TermId b) {
            return index.list(a).max_impact() < index.list(b).max_impact();
        });
        for (auto t : terms) {
            cursors.push_back({&index.list(t), 0});
            max_scores.push_back(index.list(t).max_impact());
        }
    }
    std::size_t const n = cursors.size();
    std::vector<Score> upper_bound(n);
    std::partial_sum(max_scores.begin(), max_scores.end(), upper_bound.begin());

    Score theta = initial_threshold;
    std::size_t first_essential = 0;
    auto update_partition = [&] {
        while (first_essential < n && upper_bound[first_essential] <= theta) {
            ++first_essential;
        }
    };
    update_partition();

    topk_heap heap;
    while (first_essential < n) {
        std::uint32_t current = no_doc;
        for (std::size_t i = first_essential; i < n; ++i) {
            if (!cursors[i].done()) {
                current = std::min(current, cursors[i].doc().value);
            }
        }
        if (current == no_doc) {
            break;
        }
        ++stats.documents_evaluated;
        DocId const doc(current);
        Score score = 0;
        for (std::size_t i = first_essential; i < n; ++i) {
            auto& c = cursors[i];
            if (!c.done() && c.doc() == doc) {
                score += c.impact();
                ++stats.postings_scored;
                ++c.pos;
            }
        }
        for (std::size_t i = first_essential; i-- > 0;) {
            if (score + upper_bound[i] <= theta) {
                break;
            }
            auto& c = cursors[i];
            c.next_geq(doc);
            if (!c.done() && c.doc() == doc) {
                score += c.impact();
                ++stats.postings_scored;
            }
        }
        if (score > theta) {
            heap.push({doc, score});
            ++stats.heap_insertions;
            if (heap.size() > k) {
                heap.pop();
            }
            if (heap.size() == k && heap.top().score > theta) {
                theta = heap.top().score;
                update_partition();
            }
        }
    }

    TopKResult result;
    bool const full = heap.size() == k;
    result.threshold = full ? heap.top().score : initial_threshold;
    result.entries = drain_sorted(std::move(heap));
    stats.elapsed = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start);
    return {std::move(result), stats};
}

}  // namespace tkest
