#include "tkest/estimators.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <queue>
#include <unordered_map>
#include <unordered_set>

namespace tkest {

std::string_view method_name(Method method) noexcept
{
    switch (method) {
    case Method::quantile: return "quantile";
    case Method::remove_duplicates: return "rd";
    case Method::combine_scores: return "cs";
    case Method::lookups: return "lookups";
    case Method::sampled: return "sampled";
    }
    return "unknown";
}

std::optional<Method> parse_method(std::string_view name) noexcept
{
    for (auto m : {Method::quantile, Method::remove_duplicates, Method::combine_scores, Method::lookups, Method::sampled}) {
        if (method_name(m) == name) {
            return m;
        }
    }
    return std::nullopt;
}

namespace {

void check_query_width(Query const& query)
{
    if (query.size() > max_estimator_query_terms) {
        throw std::invalid_argument("estimators support at most 64 distinct query terms");
    }
}

/// Merges the prefixes of all matching subsets into one stream ordered by
/// descending total, then ascending docID, smaller subset, smaller key.
class prefix_stream {
  public:
    struct source {
        StoredSubset const* subset = nullptr;
        std::array<std::uint8_t, SubsetKey::max_terms> query_pos{};
        std::size_t next = 0;

        [[nodiscard]] PrefixEntry const& head() const { return subset->prefix[next]; }
    };

    prefix_stream(std::vector<MatchingSubset> const& matches, Query const& query)
    {
        for (auto const& m : matches) {
            if (!m.has_prefix || m.subset->prefix.empty()) {
                continue;
            }
            source s;
            s.subset = m.subset;
            for (std::size_t i = 0; i < m.subset->key.size(); ++i) {
                auto it = std::lower_bound(query.terms.begin(), query.terms.end(), m.subset->key[i]);
                s.query_pos[i] = static_cast<std::uint8_t>(it - query.terms.begin());
            }
            m_sources.push_back(s);
        }
        for (std::size_t i = 0; i < m_sources.size(); ++i) {
            m_heap.push(i);
        }
    }

    /// Pops the next entry; returns nullptr when every prefix is exhausted.
    source const* next(PrefixEntry const*& entry)
    {
        if (m_heap.empty()) {
            return nullptr;
        }
        auto const i = m_heap.top();
        m_heap.pop();
        auto& s = m_sources[i];
        entry = &s.head();
        ++s.next;
        if (s.next < s.subset->prefix.size()) {
            m_heap.push(i);
        }
        return &s;
    }

  private:
    struct after {
        std::vector<source> const* sources;
        bool operator()(std::size_t x, std::size_t y) const
        {
            auto const& a = (*sources)[x];
            auto const& b = (*sources)[y];
            auto const& ea = a.head();
            auto const& eb = b.head();
            if (ea.total != eb.total) {
                return ea.total < eb.total;
            }
            if (ea.doc != eb.doc) {
                return eb.doc < ea.doc;
            }
            return b.subset->key < a.subset->key;
        }
    };

    std::vector<source> m_sources;
    std::priority_queue<std::size_t, std::vector<std::size_t>, after> m_heap{after{&m_sources}};
};

Score kth_largest(std::vector<Accumulator> const& accs, std::size_t k)
{
    if (k == 0 || accs.size() < k) {
        return 0;
    }
    std::vector<Score> partials;
    partials.reserve(accs.size());
    for (auto const& a : accs) {
        partials.push_back(a.partial);
    }
    auto nth = partials.begin() + static_cast<std::ptrdiff_t>(k - 1);
    std::nth_element(partials.begin(), nth, partials.end(), std::greater<>());
    return *nth;
}

/// Accumulator table with the per-term scores kept alongside, so a second
/// source reporting the same (term, doc) can be checked for agreement.
class accumulator_table {
  public:
    explicit accumulator_table(std::size_t width) : m_width(width) {}

    std::size_t slot(DocId doc)
    {
        auto [it, inserted] = m_slots.emplace(doc.value, m_accs.size());
        if (inserted) {
            m_accs.push_back({doc, 0, 0});
            m_scores.resize(m_scores.size() + m_width, 0);
        }
        return it->second;
    }

    void add(std::size_t slot, std::size_t term_pos, Impact score)
    {
        auto& acc = m_accs[slot];
        auto const bit = std::uint64_t{1} << term_pos;
        auto& stored = m_scores[slot * m_width + term_pos];
        if ((acc.known_terms & bit) != 0) {
            assert(stored == score && "conflicting stored scores for one (term, doc)");
            return;
        }
        acc.known_terms |= bit;
        acc.partial += score;
        stored = score;
    }

    [[nodiscard]] std::vector<Accumulator>& accumulators() noexcept { return m_accs; }
    [[nodiscard]] std::vector<Accumulator> release() { return std::move(m_accs); }

  private:
    std::size_t m_width;
    std::unordered_map<std::uint32_t, std::size_t> m_slots;
    std::vector<Accumulator> m_accs;
    std::vector<Impact> m_scores;
};

accumulator_table combine(PrefixStore const& store, Query const& query, std::size_t ab, std::size_t& processed)
{
    auto matches = matching_subsets(store, query);
    prefix_stream stream(matches, query);
    accumulator_table table(query.size());
    processed = 0;
    PrefixEntry const* entry = nullptr;
    while (processed < ab) {
        auto const* src = stream.next(entry);
        if (src == nullptr) {
            break;
        }
        ++processed;
        auto const slot = table.slot(entry->doc);
        for (std::size_t i = 0; i < src->subset->key.size(); ++i) {
            table.add(slot, src->query_pos[i], entry->term_scores[i]);
        }
    }
    return table;
}

}  // namespace

Estimate estimate_quantile(PrefixStore const& store, Query const& query, std::size_t k)
{
    auto slot = store.k_slot(k);
    if (!slot) {
        throw std::invalid_argument("estimate_quantile: k=" + std::to_string(k) + " is not in the store's k grid");
    }
    Estimate e;
    e.method = Method::quantile;
    for (auto const& m : matching_subsets(store, query)) {
        e.value = std::max(e.value, m.subset->thresholds[*slot]);
    }
    return e;
}

Score quantile_lower_bound(PrefixStore const& store, Query const& query, std::size_t k)
{
    auto const& ks = store.metadata().k_values;
    auto it = std::lower_bound(ks.begin(), ks.end(), k);
    if (it == ks.end()) {
        return 0;
    }
    auto const slot = static_cast<std::size_t>(it - ks.begin());
    Score best = 0;
    for (auto const& m : matching_subsets(store, query)) {
        best = std::max(best, m.subset->thresholds[slot]);
    }
    return best;
}

Estimate estimate_remove_duplicates(PrefixStore const& store, Query const& query, std::size_t k, std::size_t ab)
{
    Estimate e;
    e.method = Method::remove_duplicates;
    if (k == 0) {
        return e;
    }
    auto matches = matching_subsets(store, query);
    prefix_stream stream(matches, query);
    std::unordered_set<std::uint32_t> seen;
    PrefixEntry const* entry = nullptr;
    while (e.ab_used < ab) {
        if (stream.next(entry) == nullptr) {
            break;
        }
        ++e.ab_used;
        if (seen.insert(entry->doc.value).second && seen.size() == k) {
            e.value = entry->total;
            break;
        }
    }
    return e;
}

CombineResult estimate_combine_scores(PrefixStore const& store, Query const& query, std::size_t k, std::size_t ab)
{
    check_query_width(query);
    CombineResult r;
    r.estimate.method = Method::combine_scores;
    auto table = combine(store, query, ab, r.estimate.ab_used);
    r.accumulators = table.release();
    r.estimate.value = kth_largest(r.accumulators, k);
    return r;
}

CombineResult estimate_with_lookups_detailed(PrefixStore const& store,
                                             ImpactIndex const& index,
                                             Query const& query,
                                             std::size_t k,
                                             Budget budget)
{
    check_query_width(query);
    CombineResult r;
    r.estimate.method = Method::lookups;
    auto table = combine(store, query, budget.ab, r.estimate.ab_used);
    auto& accs = table.accumulators();

    // Top lb accumulators by partial score, docID ascending on ties.
    std::vector<std::size_t> order(accs.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    auto const selected = std::min(budget.lb, accs.size());
    auto better = [&](std::size_t a, std::size_t b) {
        if (accs[a].partial != accs[b].partial) {
            return accs[a].partial > accs[b].partial;
        }
        return accs[a].doc < accs[b].doc;
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(selected), order.end(), better);
    order.resize(selected);
    r.estimate.lb_used = selected;

    // Ascending docID order per list, one forward pass per query term.
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return accs[a].doc < accs[b].doc; });
    std::vector<DocId> docs;
    std::vector<std::size_t> slots;
    for (std::size_t pos = 0; pos < query.size(); ++pos) {
        auto const bit = std::uint64_t{1} << pos;
        docs.clear();
        slots.clear();
        for (auto slot : order) {
            if ((accs[slot].known_terms & bit) == 0) {
                docs.push_back(accs[slot].doc);
                slots.push_back(slot);
            }
        }
        if (docs.empty()) {
            continue;
        }
        auto found = batch_lookup(index, query.terms[pos], docs);
        for (std::size_t i = 0; i < found.size(); ++i) {
            if (found[i]) {
                table.add(slots[i], pos, *found[i]);
            }
        }
    }
    r.accumulators = table.release();
    r.estimate.value = kth_largest(r.accumulators, k);
    return r;
}

Estimate estimate_with_lookups(PrefixStore const& store,
                               ImpactIndex const& index,
                               Query const& query,
                               std::size_t k,
                               Budget budget)
{
    return estimate_with_lookups_detailed(store, index, query, k, budget).estimate;
}

Estimate with_quantile_backup(Estimate primary, PrefixStore const& store, Query const& query, std::size_t k)
{
    auto const q = quantile_lower_bound(store, query, k);
    if (q > primary.value) {
        primary.value = q;
        primary.backed_by_quantile = true;
    }
    return primary;
}

namespace {

void check_rate(double s)
{
    if (!(s > 0.0 && s < 1.0)) {
        throw std::invalid_argument("overestimate_probability: sample rate must be in (0,1)");
    }
}

/// tails[m] = P[Bin(n, s) >= m] for m in [0, n + 1]. Terms are built by ratio
/// recurrence outward from the mode and normalized by their total.
std::vector<long double> binomial_tails(std::size_t n, double s)
{
    long double const p = s;
    long double const odds = p / (1.0L - p);
    auto const mode = std::min(n, static_cast<std::size_t>(std::floor(static_cast<long double>(n + 1) * p)));
    std::vector<long double> terms(n + 1, 0.0L);
    terms[mode] = 1.0L;
    for (std::size_t i = mode + 1; i <= n; ++i) {
        terms[i] = terms[i - 1] * static_cast<long double>(n - i + 1) / static_cast<long double>(i) * odds;
    }
    for (std::size_t i = mode; i-- > 0;) {
        terms[i] = terms[i + 1] * static_cast<long double>(i + 1) / static_cast<long double>(n - i) / odds;
    }
    std::vector<long double> tails(n + 2, 0.0L);
    for (std::size_t i = n + 1; i-- > 0;) {
        tails[i] = tails[i + 1] + terms[i];
    }
    long double const total = tails[0];
    for (auto& t : tails) {
        t /= total;
    }
    return tails;
}

}  // namespace

double overestimate_probability(std::size_t k, std::size_t k_prime, double s)
{
    check_rate(s);
    if (k_prime < 1) {
        throw std::invalid_argument("overestimate_probability: k' must be >= 1");
    }
    if (k_prime >= k) {
        return 0.0;
    }
    return std::min(static_cast<double>(binomial_tails(k - 1, s)[k_prime]), 1.0);
}

std::size_t choose_k_prime(std::size_t k, double s, double epsilon)
{
    if (s >= 1.0 || k <= 1) {
        return std::max<std::size_t>(k, 1);
    }
    check_rate(s);
    auto const tails = binomial_tails(k - 1, s);
    for (std::size_t kp = 1; kp < k; ++kp) {
        if (std::min(static_cast<double>(tails[kp]), 1.0) <= epsilon) {
            return kp;
        }
    }
    return k;
}

SamplePlan SamplePlan::make(double rate, double epsilon, std::size_t k)
{
    SamplePlan p{rate, epsilon, k, 0};
    if (!(rate > 0.0 && rate <= 1.0)) {
        throw std::invalid_argument("sample plan: rate must be in (0,1]");
    }
    if (!(epsilon > 0.0 && epsilon < 1.0)) {
        throw std::invalid_argument("sample plan: epsilon must be in (0,1)");
    }
    // A full sample reproduces the collection exactly, so k' = k is safe.
    p.k_prime = rate >= 1.0 ? k : choose_k_prime(k, rate, epsilon);
    return p;
}

void SamplePlan::validate() const
{
    if (!(rate > 0.0 && rate <= 1.0) || !(epsilon > 0.0 && epsilon < 1.0) || k_prime < 1) {
        throw std::invalid_argument("sample plan: invalid parameters");
    }
    if (rate < 1.0 && overestimate_probability(k, k_prime, rate) > epsilon) {
        throw std::invalid_argument("sample plan: k' violates the epsilon bound");
    }
}

Estimate estimate_sampled(PrefixStore const& sample_store,
                          ImpactIndex const& sample_index,
                          Query const& query,
                          Budget budget,
                          SamplePlan const& plan)
{
    plan.validate();
    Estimate e;
    if (plan.k_prime <= sample_index.document_count() && !query.empty()) {
        e = estimate_with_lookups(sample_store, sample_index, query, plan.k_prime, budget);
        e = with_quantile_backup(e, sample_store, query, plan.k_prime);
    }
    e.method = Method::sampled;
    return e;
}

Estimate run_estimator(Method method,
                       PrefixStore const& store,
                       ImpactIndex const& index,
                       Query const& query,
                       std::size_t k,
                       Budget budget,
                       bool backup)
{
    Estimate e;
    switch (method) {
    case Method::quantile: return estimate_quantile(store, query, k);
    case Method::remove_duplicates: e = estimate_remove_duplicates(store, query, k, budget.ab); break;
    case Method::combine_scores: e = estimate_combine_scores(store, query, k, budget.ab).estimate; break;
    case Method::lookups: e = estimate_with_lookups(store, index, query, k, budget); break;
    case Method::sampled: throw std::invalid_argument("run_estimator: use estimate_sampled for the sampled method");
    }
    return backup ? with_quantile_backup(e, store, query, k) : e;
}

}  // namespace tkest
