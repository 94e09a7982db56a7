#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tkest/index.hpp"
#include "tkest/prefix_store.hpp"
#include "tkest/query.hpp"
#include "tkest/subset_catalog.hpp"
#include "tkest/synthetic.hpp"

namespace tkest::testing {

/// Index from impact-exchange text, e.g. "x\t0:128 2:64\n".
inline ImpactIndex impacts(std::string const& text)
{
    std::istringstream in(text);
    return load_precomputed(in);
}

inline ImpactIndex corpus_index(std::string const& text, ScorerParams scorer = ScorerParams::make_bm25(), int bits = 8)
{
    std::istringstream in(text);
    return build_index(in, scorer, bits);
}

inline ImpactIndex synthetic_index(std::size_t docs, std::size_t vocabulary, std::uint64_t seed = 42)
{
    synthetic::CorpusOptions opts;
    opts.documents = docs;
    opts.vocabulary = vocabulary;
    opts.seed = seed;
    opts.min_length = 10;
    opts.max_length = 60;
    return corpus_index(synthetic::corpus_string(opts));
}

/// Random index with `terms` lists over `docs` documents; list t has density
/// drawn in [min_density, max_density] and impacts in [1, max_impact].
inline ImpactIndex random_index(std::size_t docs,
                                std::size_t terms,
                                std::uint64_t seed,
                                double min_density = 0.05,
                                double max_density = 0.5,
                                unsigned max_impact = 40)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> density(min_density, max_density);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::uniform_int_distribution<unsigned> impact(1, max_impact);
    std::ostringstream out;
    out << "#document_count\t" << docs << '\n';
    for (std::size_t t = 0; t < terms; ++t) {
        double const p = density(rng);
        std::vector<std::string> fields;
        for (std::size_t d = 0; d < docs; ++d) {
            if (coin(rng) < p) {
                fields.push_back(std::to_string(d) + ":" + std::to_string(impact(rng)));
            }
        }
        if (fields.empty()) {
            fields.push_back("0:1");
        }
        out << 't' << t << '\t';
        for (std::size_t i = 0; i < fields.size(); ++i) {
            out << (i ? " " : "") << fields[i];
        }
        out << '\n';
    }
    return impacts(out.str());
}

inline std::vector<TermId> term_ids(ImpactIndex const& index, std::initializer_list<char const*> names)
{
    std::vector<TermId> out;
    for (auto n : names) {
        out.push_back(*index.find_term(n));
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Dense per-document score table, built by scanning every list linearly.
inline std::vector<Score> score_table(ImpactIndex const& index, std::span<TermId const> terms)
{
    std::vector<Score> table(index.document_count(), 0);
    for (auto t : terms) {
        for (auto const& p : index.list(t).postings()) {
            table[p.doc.value] += p.impact;
        }
    }
    return table;
}

inline Score kth_largest(std::vector<Score> values, std::size_t k)
{
    std::erase(values, Score{0});
    if (k == 0 || values.size() < k) {
        return 0;
    }
    std::sort(values.begin(), values.end(), std::greater<>());
    return values[k - 1];
}

inline Score brute_threshold(ImpactIndex const& index, std::span<TermId const> terms, std::size_t k)
{
    return kth_largest(score_table(index, terms), k);
}

struct brute_entry {
    std::uint32_t doc;
    std::vector<Impact> scores;
    Score total;
};

/// All documents holding every term, sorted by total desc then doc asc.
inline std::vector<brute_entry> brute_conjunction(ImpactIndex const& index, std::span<TermId const> terms)
{
    std::map<std::uint32_t, std::vector<Impact>> by_doc;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        for (auto const& p : index.list(terms[i]).postings()) {
            auto& v = by_doc[p.doc.value];
            v.resize(terms.size(), 0);
            v[i] = p.impact;
        }
    }
    std::vector<brute_entry> out;
    for (auto& [doc, scores] : by_doc) {
        if (std::find(scores.begin(), scores.end(), Impact{0}) != scores.end()) {
            continue;
        }
        Score total = 0;
        for (auto s : scores) {
            total += s;
        }
        out.push_back({doc, scores, total});
    }
    std::sort(out.begin(), out.end(), [](auto const& a, auto const& b) {
        return a.total != b.total ? a.total > b.total : a.doc < b.doc;
    });
    return out;
}

/// Every non-empty subset of `terms` with at most `max_size` elements.
inline std::vector<std::vector<TermId>> all_subsets(std::vector<TermId> terms, std::size_t max_size)
{
    std::sort(terms.begin(), terms.end());
    terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
    std::vector<std::vector<TermId>> out;
    std::size_t const n = terms.size();
    for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << n); ++mask) {
        if (static_cast<std::size_t>(std::popcount(mask)) > max_size) {
            continue;
        }
        std::vector<TermId> s;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask >> i & 1U) {
                s.push_back(terms[i]);
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

/// Random multi-term queries over the index vocabulary, as text.
inline std::vector<std::string> random_queries(ImpactIndex const& index,
                                               std::size_t count,
                                               std::size_t min_terms,
                                               std::size_t max_terms,
                                               std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> term(0, index.term_count() - 1);
    std::uniform_int_distribution<std::size_t> len(min_terms, max_terms);
    std::vector<std::string> out;
    for (std::size_t q = 0; q < count; ++q) {
        std::set<std::size_t> chosen;
        auto const n = std::min(len(rng), index.term_count());
        while (chosen.size() < n) {
            chosen.insert(term(rng));
        }
        std::string text;
        for (auto t : chosen) {
            text += (text.empty() ? "" : " ") + index.term_string(TermId(static_cast<std::uint32_t>(t)));
        }
        out.push_back(std::move(text));
    }
    return out;
}

/// Store holding every subset (size <= max_size) of every query at `depth`.
inline PrefixStore store_for_queries(ImpactIndex const& index,
                                     std::span<std::string const> queries,
                                     std::size_t max_size,
                                     std::uint32_t depth,
                                     std::vector<std::size_t> ks = {10, 100, 1000})
{
    std::set<std::vector<TermId>> keys;
    for (auto const& text : queries) {
        for (auto& s : all_subsets(parse_query(index, text).terms, max_size)) {
            keys.insert(std::move(s));
        }
    }
    std::vector<CatalogEntry> catalog;
    for (auto const& k : keys) {
        catalog.push_back({{SubsetKey(std::span<TermId const>(k)), 1}, depth});
    }
    StoreBuildOptions options;
    options.k_values = std::move(ks);
    options.policy_name = "test";
    return build_store(index, catalog, options).store;
}

}  // namespace tkest::testing
