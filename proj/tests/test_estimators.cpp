#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>
#include <set>
#include <tuple>

#include "test_support.hpp"
#include "tkest/estimators.hpp"
#include "tkest/query_engine.hpp"

using namespace tkest;
using namespace tkest::testing;

namespace {

CatalogEntry entry(std::vector<TermId> const& ids, std::uint32_t depth)
{
    return {{SubsetKey(std::span<TermId const>(ids)), 1}, depth};
}

PrefixStore build(ImpactIndex const& index, std::vector<CatalogEntry> const& catalog, std::vector<std::size_t> ks)
{
    StoreBuildOptions options;
    options.k_values = std::move(ks);
    return build_store(index, catalog, options).store;
}

struct ref_item {
    PrefixEntry const* entry;
    StoredSubset const* subset;
};

/// Every prefix entry of every stored subset inside the query, fully sorted.
std::vector<ref_item> ref_stream(PrefixStore const& store, Query const& q)
{
    std::vector<ref_item> items;
    for (auto const& s : store.subsets()) {
        if (!s.key.contained_in(q)) {
            continue;
        }
        for (auto const& e : s.prefix) {
            items.push_back({&e, &s});
        }
    }
    std::sort(items.begin(), items.end(), [](ref_item const& a, ref_item const& b) {
        return std::tuple(b.entry->total, a.entry->doc, a.subset->key)
            < std::tuple(a.entry->total, b.entry->doc, b.subset->key);
    });
    return items;
}

Score ref_rd(PrefixStore const& store, Query const& q, std::size_t k, std::size_t ab)
{
    auto const items = ref_stream(store, q);
    std::set<std::uint32_t> seen;
    for (std::size_t i = 0; i < std::min(ab, items.size()); ++i) {
        seen.insert(items[i].entry->doc.value);
        if (seen.size() == k) {
            return items[i].entry->total;
        }
    }
    return 0;
}

using ref_accs = std::map<std::uint32_t, std::map<TermId, Impact>>;

ref_accs ref_combine(PrefixStore const& store, Query const& q, std::size_t ab)
{
    auto const items = ref_stream(store, q);
    ref_accs accs;
    for (std::size_t i = 0; i < std::min(ab, items.size()); ++i) {
        auto& acc = accs[items[i].entry->doc.value];
        for (std::size_t j = 0; j < items[i].subset->key.size(); ++j) {
            acc.emplace(items[i].subset->key[j], items[i].entry->term_scores[j]);
        }
    }
    return accs;
}

Score partial(std::map<TermId, Impact> const& acc)
{
    Score s = 0;
    for (auto const& [t, v] : acc) {
        s += v;
    }
    return s;
}

Score ref_kth(ref_accs const& accs, std::size_t k)
{
    std::vector<Score> v;
    for (auto const& [d, acc] : accs) {
        v.push_back(partial(acc));
    }
    if (v.size() < k) {
        return 0;
    }
    std::sort(v.begin(), v.end(), std::greater<>());
    return v[k - 1];
}

Score ref_lookups(PrefixStore const& store, ImpactIndex const& index, Query const& q, std::size_t k, Budget b)
{
    auto accs = ref_combine(store, q, b.ab);
    std::vector<std::pair<Score, std::uint32_t>> ranked;
    for (auto const& [d, acc] : accs) {
        ranked.emplace_back(partial(acc), d);
    }
    std::sort(ranked.begin(), ranked.end(), [](auto const& x, auto const& y) {
        return x.first != y.first ? x.first > y.first : x.second < y.second;
    });
    ranked.resize(std::min(ranked.size(), b.lb));
    for (auto const& [p, d] : ranked) {
        for (auto t : q.terms) {
            for (auto const& post : index.list(t).postings()) {
                if (post.doc.value == d) {
                    accs[d].emplace(t, post.impact);
                }
            }
        }
    }
    return ref_kth(accs, k);
}

struct fixture {
    ImpactIndex index;
    std::vector<std::string> queries;
    PrefixStore store;
};

fixture make_fixture(std::uint64_t seed, std::uint32_t depth, std::vector<std::size_t> ks = {1, 10, 100})
{
    fixture f;
    f.index = random_index(600, 25, seed, 0.03, 0.4, 50);
    f.queries = random_queries(f.index, 150, 2, 6, seed + 1);
    f.store = store_for_queries(f.index, f.queries, 3, depth, std::move(ks));
    return f;
}

/// Binomial upper tail P[Bin(n, s) >= from] by direct pmf recurrence.
long double brute_tail(std::size_t n, std::size_t from, long double s)
{
    long double pmf = std::pow(1.0L - s, static_cast<long double>(n));
    long double tail = 0;
    for (std::size_t i = 0; i <= n; ++i) {
        if (i >= from) {
            tail += pmf;
        }
        pmf *= static_cast<long double>(n - i) / static_cast<long double>(i + 1) * s / (1.0L - s);
    }
    return tail;
}

}  // namespace

TEST(Quantile, StoredSingleTermIsExact)
{
    auto const f = make_fixture(1, 20);
    for (auto const& s : f.store.subsets()) {
        if (s.key.size() != 1) {
            continue;
        }
        auto const q = make_query({s.key[0]});
        for (std::size_t k : {1, 10, 100}) {
            EXPECT_EQ(estimate_quantile(f.store, q, k).value, exact_threshold(f.index, q, k));
        }
    }
}

TEST(Quantile, NoMatchAndGridChecks)
{
    auto const index = impacts("a\t0:4 1:2\nb\t2:3\n");
    auto const store = build(index, {entry({TermId(0)}, 2)}, {1, 2});
    EXPECT_EQ(estimate_quantile(store, make_query({TermId(1)}), 1).value, 0U);
    EXPECT_EQ(estimate_quantile(store, make_query({TermId(0), TermId(1)}), 2).value, 2U);
    EXPECT_THROW((void)estimate_quantile(store, make_query({TermId(0)}), 3), std::invalid_argument);
    EXPECT_EQ(quantile_lower_bound(store, make_query({TermId(0)}), 3), 0U);
    EXPECT_EQ(estimate_quantile(store, make_query({TermId(0)}), 1).method, Method::quantile);
}

TEST(Quantile, LowerBoundUsesNextGridValue)
{
    auto const index = impacts("a\t0:9 1:7 2:5 3:3\n");
    auto const store = build(index, {entry({TermId(0)}, 4)}, {1, 3});
    auto const q = make_query({TermId(0)});
    EXPECT_EQ(quantile_lower_bound(store, q, 2), 5U);
    EXPECT_LE(quantile_lower_bound(store, q, 2), exact_threshold(index, q, 2));
    EXPECT_EQ(quantile_lower_bound(store, q, 3), 5U);
}

TEST(Quantile, NeverExceedsExactThreshold)
{
    auto const f = make_fixture(2, 20);
    for (auto const& text : random_queries(f.index, 200, 2, 7, 77)) {
        auto const q = parse_query(f.index, text);
        for (std::size_t k : {1, 10, 100}) {
            ASSERT_LE(estimate_quantile(f.store, q, k).value, exact_threshold(f.index, q, k)) << text;
        }
    }
}

TEST(RemoveDuplicates, TenDistinctDocumentsAcrossTwoPrefixes)
{
    // Scores scaled by ten: six documents at 12.0 under t1, four at 12.5+ under t2.
    auto const index = impacts("t1\t0:120 1:120 2:120 3:120 4:120 5:120\nt2\t6:125 7:126 8:127 9:128\n");
    auto const store = build(index, {entry({TermId(0)}, 10), entry({TermId(1)}, 10)}, {10});
    auto const q = make_query({TermId(0), TermId(1)});
    EXPECT_EQ(estimate_quantile(store, q, 10).value, 0U);
    auto const rd = estimate_remove_duplicates(store, q, 10, 1000);
    EXPECT_EQ(rd.value, 120U);
    EXPECT_EQ(rd.ab_used, 10U);
    EXPECT_EQ(rd.method, Method::remove_duplicates);
}

TEST(RemoveDuplicates, HandMergeSkipsDuplicate)
{
    // s1: d1 12.5, d2 12.0, d3 10.0; s2: d2 12.6, d4 9.0 (scaled by ten).
    auto const index = impacts("t1\t1:125 2:120 3:100\nt2\t2:126 4:90\n");
    auto const store = build(index, {entry({TermId(0)}, 3), entry({TermId(1)}, 2)}, {1});
    auto const q = make_query({TermId(0), TermId(1)});
    auto const rd = estimate_remove_duplicates(store, q, 3, 100);
    EXPECT_EQ(rd.value, 100U);
    EXPECT_EQ(rd.ab_used, 4U);
    EXPECT_EQ(ref_rd(store, q, 3, 100), 100U);
    EXPECT_EQ(estimate_remove_duplicates(store, q, 3, 3).value, 0U);
    EXPECT_EQ(estimate_remove_duplicates(store, q, 1, 100).value, 126U);
    EXPECT_EQ(estimate_remove_duplicates(store, q, 5, 100).value, 0U);
}

TEST(RemoveDuplicates, MatchesReferenceMerger)
{
    auto const f = make_fixture(3, 15);
    for (auto const& text : f.queries) {
        auto const q = parse_query(f.index, text);
        for (std::size_t k : {1, 5, 10, 30}) {
            for (std::size_t ab : {1, 10, 50, 1000}) {
                auto const got = estimate_remove_duplicates(f.store, q, k, ab);
                ASSERT_EQ(got.value, ref_rd(f.store, q, k, ab)) << text << " k=" << k << " ab=" << ab;
                ASSERT_LE(got.ab_used, ab);
            }
        }
        auto const best = estimate_remove_duplicates(f.store, q, 1, 1000).value;
        Score max_total = 0;
        for (auto const& m : matching_subsets(f.store, q)) {
            if (!m.subset->prefix.empty()) {
                max_total = std::max(max_total, m.subset->prefix[0].total);
            }
        }
        ASSERT_EQ(best, max_total);
    }
}

TEST(CombineScores, CountsEachTermOnce)
{
    auto const index = impacts("t1\t1:5\nt2\t1:4 2:3\n");
    auto const t1 = TermId(0), t2 = TermId(1);
    auto const store = build(index, {entry({t1}, 5), entry({t2}, 5), entry({t1, t2}, 5)}, {1});
    auto const q = make_query({t1, t2});
    auto const r = estimate_combine_scores(store, q, 2, 10);
    EXPECT_EQ(r.estimate.value, 3U);
    EXPECT_EQ(r.estimate.ab_used, 4U);
    ASSERT_EQ(r.accumulators.size(), 2U);
    std::map<std::uint32_t, Score> partials;
    for (auto const& a : r.accumulators) {
        partials[a.doc.value] = a.partial;
    }
    EXPECT_EQ(partials[1], 9U);
    EXPECT_EQ(partials[2], 3U);
    EXPECT_EQ(estimate_combine_scores(store, q, 3, 10).estimate.value, 0U);
}

TEST(CombineScores, SinglePrefixGivesItsKthTotal)
{
    auto const index = impacts("a\t0:9 1:7 2:5 3:3\n");
    auto const store = build(index, {entry({TermId(0)}, 4)}, {1});
    auto const q = make_query({TermId(0)});
    EXPECT_EQ(estimate_combine_scores(store, q, 3, 10).estimate.value, 5U);
}

TEST(CombineScores, MatchesReferenceAndDominatesRemoveDuplicates)
{
    auto const f = make_fixture(4, 15);
    for (auto const& text : f.queries) {
        auto const q = parse_query(f.index, text);
        for (std::size_t k : {1, 5, 10, 30}) {
            for (std::size_t ab : {1, 10, 50, 1000}) {
                auto const cs = estimate_combine_scores(f.store, q, k, ab);
                ASSERT_EQ(cs.estimate.value, ref_kth(ref_combine(f.store, q, ab), k)) << text;
                ASSERT_GE(cs.estimate.value, estimate_remove_duplicates(f.store, q, k, ab).value);
                for (auto const& acc : cs.accumulators) {
                    Score sum = 0;
                    for (std::size_t i = 0; i < q.size(); ++i) {
                        if (acc.known_terms >> i & 1U) {
                            sum += *lookup(f.index, q.terms[i], acc.doc);
                        }
                    }
                    ASSERT_EQ(acc.partial, sum);
                }
            }
        }
    }
}

TEST(Lookups, FillsMissingTerm)
{
    auto const index = impacts("t1\t5:3\nt2\t5:2 6:1\n");
    auto const store = build(index, {entry({TermId(0)}, 1)}, {1});
    auto const q = make_query({TermId(0), TermId(1)});
    auto const r = estimate_with_lookups_detailed(store, index, q, 1, {10, 1});
    EXPECT_EQ(r.estimate.value, 5U);
    EXPECT_EQ(r.estimate.lb_used, 1U);
    ASSERT_EQ(r.accumulators.size(), 1U);
    EXPECT_EQ(r.accumulators[0].known_terms, 0b11U);
}

TEST(Lookups, SelectsTopPartialsWithDocTiebreak)
{
    auto const index = impacts("t1\t1:5 2:5 3:4\nt2\t1:1 2:1 3:9\n");
    auto const store = build(index, {entry({TermId(0)}, 3)}, {1});
    auto const q = make_query({TermId(0), TermId(1)});
    // lb = 1 completes d1 only (5 + 1), lb = 3 reaches d3 (4 + 9).
    EXPECT_EQ(estimate_with_lookups(store, index, q, 1, {10, 1}).value, 6U);
    EXPECT_EQ(estimate_with_lookups(store, index, q, 1, {10, 2}).value, 6U);
    EXPECT_EQ(estimate_with_lookups(store, index, q, 1, {10, 3}).value, 13U);
}

TEST(Lookups, MatchesReferenceAndDominatesCombineScores)
{
    auto const f = make_fixture(5, 15);
    for (auto const& text : f.queries) {
        auto const q = parse_query(f.index, text);
        for (std::size_t k : {1, 10, 30}) {
            for (std::size_t ab : {10, 50, 1000}) {
                for (std::size_t lb : {std::size_t{0}, ab / 2, ab}) {
                    Budget const b{ab, lb};
                    auto const got = estimate_with_lookups_detailed(f.store, f.index, q, k, b);
                    ASSERT_EQ(got.estimate.value, ref_lookups(f.store, f.index, q, k, b)) << text;
                    ASSERT_LE(got.estimate.lb_used, lb);
                    ASSERT_LE(got.estimate.ab_used, ab);
                    for (auto const& acc : got.accumulators) {
                        Score sum = 0;
                        for (std::size_t i = 0; i < q.size(); ++i) {
                            if (acc.known_terms >> i & 1U) {
                                sum += *lookup(f.index, q.terms[i], acc.doc);
                            }
                        }
                        ASSERT_EQ(acc.partial, sum);
                    }
                    if (lb == ab) {
                        ASSERT_GE(got.estimate.value, estimate_combine_scores(f.store, q, k, ab).estimate.value);
                    }
                }
            }
        }
    }
}

TEST(Lookups, FullDepthSingleTermsAreExact)
{
    auto const index = random_index(400, 20, 6, 0.05, 0.5, 60);
    std::vector<CatalogEntry> catalog;
    for (std::uint32_t t = 0; t < index.term_count(); ++t) {
        catalog.push_back(entry({TermId(t)}, static_cast<std::uint32_t>(index.list(TermId(t)).size())));
    }
    auto const store = build(index, catalog, {1});
    for (auto const& text : random_queries(index, 200, 2, 6, 9)) {
        auto const q = parse_query(index, text);
        std::size_t total = 0;
        for (auto t : q.terms) {
            total += index.list(t).size();
        }
        for (std::size_t k : {1, 10, 100}) {
            auto const e = estimate_with_lookups(store, index, q, k, {total, total});
            ASSERT_EQ(e.value, exact_threshold(index, q, k)) << text << " k=" << k;
            ASSERT_EQ(e.ab_used, total);
        }
    }
}

TEST(Backup, TakesTheMaximum)
{
    auto const index = impacts("a\t0:7 1:2\n");
    auto const store = build(index, {entry({TermId(0)}, 2)}, {1});
    auto const q = make_query({TermId(0)});
    Estimate low;
    low.method = Method::combine_scores;
    auto const backed = with_quantile_backup(low, store, q, 1);
    EXPECT_EQ(backed.value, 7U);
    EXPECT_TRUE(backed.backed_by_quantile);
    EXPECT_EQ(backed.method, Method::combine_scores);
    Estimate high;
    high.value = 9;
    auto const kept = with_quantile_backup(high, store, q, 1);
    EXPECT_EQ(kept.value, 9U);
    EXPECT_FALSE(kept.backed_by_quantile);
}

TEST(Backup, LadderDominanceAndSafety)
{
    auto const f = make_fixture(7, 12, {10, 100});
    for (auto const& text : f.queries) {
        auto const q = parse_query(f.index, text);
        for (std::size_t k : {10, 100}) {
            auto const exact = exact_threshold(f.index, q, k);
            for (std::size_t ab : {5, 50, 500}) {
                Budget const b{ab, ab};
                auto const qv = run_estimator(Method::quantile, f.store, f.index, q, k, b).value;
                auto const rd = run_estimator(Method::remove_duplicates, f.store, f.index, q, k, b).value;
                auto const cs = run_estimator(Method::combine_scores, f.store, f.index, q, k, b).value;
                auto const lu = run_estimator(Method::lookups, f.store, f.index, q, k, b).value;
                ASSERT_LE(qv, rd);
                ASSERT_LE(rd, cs);
                ASSERT_LE(cs, lu);
                ASSERT_LE(lu, exact);
                for (auto m : {Method::remove_duplicates, Method::combine_scores, Method::lookups}) {
                    ASSERT_GE(run_estimator(m, f.store, f.index, q, k, b).value, qv);
                    ASSERT_LE(run_estimator(m, f.store, f.index, q, k, b, false).value, exact);
                }
            }
        }
    }
    EXPECT_THROW((void)run_estimator(Method::sampled, f.store, f.index, make_query({TermId(0)}), 10, {}),
                 std::invalid_argument);
}

TEST(Sampling, OverestimateProbabilityValues)
{
    EXPECT_EQ(overestimate_probability(10, 10, 0.3), 0.0);
    EXPECT_EQ(overestimate_probability(10, 15, 0.3), 0.0);
    EXPECT_NEAR(overestimate_probability(10, 1, 0.1), 1.0 - std::pow(0.9, 9), 1e-12);
    EXPECT_NEAR(overestimate_probability(10, 1, 0.1), 0.6126, 1e-4);
    EXPECT_NEAR(overestimate_probability(10, 8, 0.5), 10.0 / 512.0, 1e-12);
    EXPECT_THROW((void)overestimate_probability(10, 2, 0.0), std::invalid_argument);
    EXPECT_THROW((void)overestimate_probability(10, 2, 1.0), std::invalid_argument);
    EXPECT_THROW((void)overestimate_probability(10, 0, 0.5), std::invalid_argument);
}

TEST(Sampling, OverestimateProbabilityMatchesDirectSum)
{
    for (std::size_t k : {2, 10, 100, 1000}) {
        for (double s : {0.02, 0.05, 0.3, 0.9}) {
            double last = 1.0;
            for (std::size_t kp = 1; kp <= k; kp += (k > 100 ? 7 : 1)) {
                double const got = overestimate_probability(k, kp, s);
                ASSERT_NEAR(got, static_cast<double>(brute_tail(k - 1, kp, s)), 1e-12) << k << ' ' << kp << ' ' << s;
                ASSERT_LE(got, last + 1e-15);
                last = got;
            }
        }
    }
}

TEST(Sampling, ChooseKPrimeMatchesBruteForceScan)
{
    EXPECT_EQ(choose_k_prime(10, 0.5, 0.05), 8U);
    EXPECT_EQ(choose_k_prime(10, 0.5, 1.0), 1U);
    EXPECT_EQ(choose_k_prime(10, 0.5, 2.0), 1U);
    EXPECT_EQ(choose_k_prime(10, 1.0, 1e-4), 10U);
    EXPECT_EQ(choose_k_prime(10, 1.0, 0.5), 10U);
    EXPECT_THROW((void)choose_k_prime(10, 0.0, 0.01), std::invalid_argument);
    for (std::size_t k : {10, 100, 1000}) {
        for (double s : {0.02, 0.05}) {
            std::size_t last = k;
            for (double eps : {1e-6, 1e-4, 1e-2, 0.1, 0.5}) {
                std::size_t expected = k;
                for (std::size_t kp = 1; kp <= k; ++kp) {
                    if (brute_tail(k - 1, kp, s) <= eps) {
                        expected = kp;
                        break;
                    }
                }
                auto const got = choose_k_prime(k, s, eps);
                ASSERT_EQ(got, expected) << k << ' ' << s << ' ' << eps;
                ASSERT_LE(got, last);
                last = got;
            }
        }
    }
}

TEST(Sampling, PlanValidation)
{
    auto const plan = SamplePlan::make(0.5, 0.05, 10);
    EXPECT_EQ(plan.k_prime, 8U);
    EXPECT_NO_THROW(plan.validate());
    EXPECT_EQ(SamplePlan::make(1.0, 0.05, 10).k_prime, 10U);
    EXPECT_THROW((void)SamplePlan::make(0.0, 0.05, 10), std::invalid_argument);
    EXPECT_THROW((void)SamplePlan::make(0.5, 0.0, 10), std::invalid_argument);
    SamplePlan bad = plan;
    bad.k_prime = 2;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Sampling, FullRateEqualsUnsampledLookups)
{
    auto const f = make_fixture(8, 15, {10});
    auto const sample = sample_index(f.index, 1.0, 3);
    auto const sample_store = store_for_queries(sample, f.queries, 3, 15, {10});
    auto const plan = SamplePlan::make(1.0, 1e-4, 10);
    for (auto const& text : f.queries) {
        auto const q = parse_query(f.index, text);
        Budget const b{200, 100};
        auto const full = run_estimator(Method::lookups, f.store, f.index, q, 10, b);
        auto const sampled = estimate_sampled(sample_store, sample, parse_query(sample, text), b, plan);
        ASSERT_EQ(sampled.value, full.value);
        EXPECT_EQ(sampled.method, Method::sampled);
    }
}

TEST(Sampling, DegeneratesToZero)
{
    auto const index = impacts("a\t0:5 1:4 2:3\nb\t3:2\n");
    auto const store = build(index, {entry({TermId(0)}, 3)}, {1, 2});
    auto plan = SamplePlan::make(0.5, 0.3, 10);
    ASSERT_GT(plan.k_prime, index.document_count());
    EXPECT_EQ(estimate_sampled(store, index, make_query({TermId(0)}), {10, 10}, plan).value, 0U);
    plan = SamplePlan::make(0.5, 0.999, 2);
    EXPECT_EQ(estimate_sampled(store, index, Query{}, {10, 10}, plan).value, 0U);
    EXPECT_GT(estimate_sampled(store, index, make_query({TermId(0)}), {10, 10}, plan).value, 0U);
}

TEST(Methods, NamesRoundTrip)
{
    for (auto m : {Method::quantile, Method::remove_duplicates, Method::combine_scores, Method::lookups,
                   Method::sampled}) {
        EXPECT_EQ(parse_method(method_name(m)), m);
    }
    EXPECT_EQ(method_name(Method::remove_duplicates), "rd");
    EXPECT_EQ(method_name(Method::combine_scores), "cs");
    EXPECT_FALSE(parse_method("bogus").has_value());
}
