#include "tkest/prefix_store.hpp"

#include <algorithm>
#include <atomic>
#include <cstring>
#include <thread>

#include "binary_io.hpp"
#include "tkest/hash.hpp"
#include "tkest/query_engine.hpp"

namespace tkest {

namespace {

constexpr char store_magic[4] = {'T', 'K', 'P', 'S'};
constexpr std::uint8_t store_version = store_format_version;

bool prefix_order(PrefixEntry const& a, PrefixEntry const& b) noexcept
{
    if (a.total != b.total) {
        return a.total > b.total;
    }
    return a.doc < b.doc;
}

}  // namespace

PrefixStore::PrefixStore(StoreMetadata metadata, std::vector<StoredSubset> subsets)
    : m_metadata(std::move(metadata)), m_subsets(std::move(subsets))
{
    std::sort(m_subsets.begin(), m_subsets.end(), [](auto const& a, auto const& b) { return a.key < b.key; });
    m_lookup.reserve(m_subsets.size());
    for (std::size_t i = 0; i < m_subsets.size(); ++i) {
        if (!m_lookup.emplace(m_subsets[i].key, i).second) {
            throw format_error("store: duplicate subset");
        }
    }
    validate();
}

StoredSubset const* PrefixStore::find(SubsetKey const& key) const
{
    auto it = m_lookup.find(key);
    return it == m_lookup.end() ? nullptr : &m_subsets[it->second];
}

std::optional<std::size_t> PrefixStore::k_slot(std::size_t k) const
{
    auto const& ks = m_metadata.k_values;
    auto it = std::lower_bound(ks.begin(), ks.end(), k);
    if (it == ks.end() || *it != k) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - ks.begin());
}

void PrefixStore::check_compatible(ImpactIndex const& index) const
{
    if (m_metadata.index_fingerprint != index.fingerprint()) {
        throw compatibility_error("store was built for a different index (fingerprint mismatch)");
    }
}

void PrefixStore::validate() const
{
    auto const& ks = m_metadata.k_values;
    for (std::size_t i = 0; i < ks.size(); ++i) {
        if (ks[i] == 0 || (i > 0 && ks[i - 1] >= ks[i])) {
            throw format_error("store: k grid must be ascending and positive");
        }
    }
    for (auto const& s : m_subsets) {
        if (s.thresholds.size() != ks.size()) {
            throw format_error("store: quantile record does not match k grid");
        }
        for (std::size_t i = 1; i < s.thresholds.size(); ++i) {
            if (s.thresholds[i] > s.thresholds[i - 1]) {
                throw format_error("store: quantiles increase with k");
            }
        }
        if (s.prefix.size() > s.depth) {
            throw format_error("store: prefix longer than its depth");
        }
        for (std::size_t i = 0; i < s.prefix.size(); ++i) {
            auto const& e = s.prefix[i];
            Score sum = 0;
            for (std::size_t t = 0; t < SubsetKey::max_terms; ++t) {
                if (t < s.key.size()) {
                    if (e.term_scores[t] == 0) {
                        throw format_error("store: prefix entry with zero term score");
                    }
                    sum += e.term_scores[t];
                } else if (e.term_scores[t] != 0) {
                    throw format_error("store: stray term score");
                }
            }
            if (sum != e.total) {
                throw format_error("store: prefix total differs from its term scores");
            }
            if (i > 0 && !prefix_order(s.prefix[i - 1], e)) {
                throw format_error("store: prefix ordering invariant violated");
            }
        }
        if (s.has_prefix() && !s.thresholds.empty()) {
            // Conjunctive top-k is a subset of the disjunctive candidates.
            for (std::size_t i = 0; i < ks.size(); ++i) {
                if (s.prefix.size() >= ks[i] && s.prefix[ks[i] - 1].total > s.thresholds[i]) {
                    throw format_error("store: prefix exceeds its own quantile");
                }
            }
        }
    }
}

std::vector<PrefixEntry> conjunctive_prefix(ImpactIndex const& index, SubsetKey const& key, std::size_t depth)
{
    std::vector<PrefixEntry> out;
    if (depth == 0) {
        return out;
    }
    auto const n = key.size();
    std::array<PostingList const*, SubsetKey::max_terms> lists{};
    std::size_t pivot = 0;
    for (std::size_t i = 0; i < n; ++i) {
        lists[i] = &index.list(key[i]);
        if (lists[i]->size() < lists[pivot]->size()) {
            pivot = i;
        }
    }
    std::array<std::size_t, SubsetKey::max_terms> pos{};
    for (auto const& p : lists[pivot]->postings()) {
        PrefixEntry e;
        e.doc = p.doc;
        bool all = true;
        for (std::size_t i = 0; i < n && all; ++i) {
            if (i == pivot) {
                e.term_scores[i] = p.impact;
                continue;
            }
            pos[i] = lists[i]->next_geq(p.doc, pos[i]);
            if (pos[i] < lists[i]->size() && lists[i]->postings()[pos[i]].doc == p.doc) {
                e.term_scores[i] = lists[i]->postings()[pos[i]].impact;
            } else {
                all = false;
            }
        }
        if (!all) {
            continue;
        }
        for (std::size_t i = 0; i < n; ++i) {
            e.total += e.term_scores[i];
        }
        out.push_back(e);
    }
    if (out.size() > depth) {
        std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(depth), out.end(), prefix_order);
        out.resize(depth);
    } else {
        std::sort(out.begin(), out.end(), prefix_order);
    }
    return out;
}

StoreBuildResult build_store(ImpactIndex const& index, std::span<CatalogEntry const> catalog, StoreBuildOptions const& options)
{
    StoreMetadata meta;
    meta.k_values = options.k_values;
    std::sort(meta.k_values.begin(), meta.k_values.end());
    meta.k_values.erase(std::unique(meta.k_values.begin(), meta.k_values.end()), meta.k_values.end());
    if (meta.k_values.empty() || meta.k_values.front() == 0) {
        throw std::invalid_argument("build_store: k values must be positive");
    }
    meta.policy_name = options.policy_name;
    meta.index_fingerprint = index.fingerprint();

    std::vector<CatalogEntry const*> usable;
    std::size_t skipped = 0;
    for (auto const& entry : catalog) {
        auto terms = entry.stats.key.terms();
        bool const ok = std::all_of(terms.begin(), terms.end(), [&](TermId t) { return t.value < index.term_count(); });
        if (ok) {
            usable.push_back(&entry);
        } else {
            ++skipped;
        }
    }

    std::vector<StoredSubset> subsets(usable.size());
    auto build_one = [&](std::size_t i) {
        auto const& entry = *usable[i];
        auto& s = subsets[i];
        s.key = entry.stats.key;
        s.depth = entry.depth;
        auto terms = entry.stats.key.terms();
        s.thresholds = exact_thresholds(index, make_query({terms.begin(), terms.end()}), meta.k_values);
        s.prefix = conjunctive_prefix(index, s.key, entry.depth);
    };

    unsigned const workers = std::max(1U, std::min<unsigned>(options.threads, static_cast<unsigned>(usable.size())));
    if (workers <= 1) {
        for (std::size_t i = 0; i < usable.size(); ++i) {
            build_one(i);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < usable.size(); i = next++) {
                    build_one(i);
                }
            });
        }
    }
    return {PrefixStore(std::move(meta), std::move(subsets)), skipped};
}

std::vector<MatchingSubset> matching_subsets(PrefixStore const& store, Query const& query)
{
    std::vector<MatchingSubset> out;
    auto const n = query.size();
    auto record = [&](StoredSubset const& s) { out.push_back({&s, true, s.has_prefix()}); };

    // Enumerating the query's own subsets is cheaper than a store scan unless the query is long.
    std::size_t combos = 0;
    for (std::size_t r = 1, c = 1; r <= std::min(n, SubsetKey::max_terms); ++r) {
        c = c * (n - r + 1) / r;
        combos += c;
    }
    if (combos > store.size()) {
        for (auto const& s : store.subsets()) {
            if (s.key.contained_in(query)) {
                record(s);
            }
        }
        return out;
    }
    std::array<TermId, SubsetKey::max_terms> chosen{};
    auto recurse = [&](auto&& self, std::size_t start, std::size_t depth) -> void {
        for (std::size_t i = start; i < n; ++i) {
            chosen[depth] = query.terms[i];
            if (auto const* s = store.find(SubsetKey(std::span<TermId const>(chosen.data(), depth + 1)))) {
                record(*s);
            }
            if (depth + 1 < SubsetKey::max_terms) {
                self(self, i + 1, depth + 1);
            }
        }
    };
    recurse(recurse, 0, 0);
    std::sort(out.begin(), out.end(), [](auto const& a, auto const& b) { return a.subset->key < b.subset->key; });
    return out;
}

std::vector<std::uint8_t> serialize_store(PrefixStore const& store)
{
    auto const& meta = store.metadata();
    detail::byte_writer w;
    w.bytes(std::string_view(store_magic, 4));
    w.u8(store_version);
    w.u64(meta.index_fingerprint);
    w.u8(static_cast<std::uint8_t>(meta.k_values.size()));
    for (auto k : meta.k_values) {
        w.u32(static_cast<std::uint32_t>(k));
    }
    w.u16(static_cast<std::uint16_t>(meta.policy_name.size()));
    w.bytes(meta.policy_name);
    w.u32(static_cast<std::uint32_t>(store.size()));

    std::uint64_t offset = 0;
    for (auto const& s : store.subsets()) {
        w.u8(static_cast<std::uint8_t>(s.key.size()));
        for (auto t : s.key.terms()) {
            w.u32(t.value);
        }
        w.u32(s.depth);
        w.u32(static_cast<std::uint32_t>(s.prefix.size()));
        w.u64(offset);
        offset += s.prefix.size() * prefix_entry_bytes(s.key.size());
    }
    for (auto const& s : store.subsets()) {
        for (auto th : s.thresholds) {
            w.u32(static_cast<std::uint32_t>(th));
        }
    }
    w.u64(offset);
    for (auto const& s : store.subsets()) {
        for (auto const& e : s.prefix) {
            w.u32(e.doc.value);
            for (std::size_t t = 0; t < s.key.size(); ++t) {
                w.u16(e.term_scores[t]);
            }
        }
    }
    w.u64(fnv1a64(w.buffer()));
    return w.release();
}

PrefixStore deserialize_store(std::span<std::uint8_t const> bytes, ImpactIndex const* index)
{
    if (bytes.size() < 5 + 8 || !std::equal(store_magic, store_magic + 4, bytes.begin())) {
        throw format_error("store: bad magic (not a TKPS file)");
    }
    if (bytes[4] != store_version) {
        throw format_error("store: unsupported version " + std::to_string(bytes[4]));
    }
    auto body = bytes.first(bytes.size() - 8);
    std::uint64_t stored = 0;
    std::memcpy(&stored, bytes.data() + body.size(), 8);
    if (stored != fnv1a64(body)) {
        throw format_error("store: checksum mismatch");
    }

    detail::byte_reader r(body, "store");
    (void)r.bytes(5);
    StoreMetadata meta;
    meta.index_fingerprint = r.u64();
    auto const k_count = r.u8();
    for (std::uint8_t i = 0; i < k_count; ++i) {
        meta.k_values.push_back(r.u32());
    }
    meta.policy_name = r.bytes(r.u16());
    auto const n = r.u32();
    if (index != nullptr && meta.index_fingerprint != index->fingerprint()) {
        throw compatibility_error("store was built for a different index (fingerprint mismatch)");
    }

    std::vector<StoredSubset> subsets;
    subsets.reserve(std::min<std::size_t>(n, r.remaining() / 17));
    std::vector<std::uint32_t> lengths;
    std::uint64_t expected = 0;
    for (std::uint32_t i = 0; i < n; ++i) {
        auto const size = r.u8();
        if (size < 1 || size > SubsetKey::max_terms) {
            throw format_error("store: bad subset size");
        }
        std::array<TermId, SubsetKey::max_terms> ids{};
        for (std::uint8_t t = 0; t < size; ++t) {
            ids[t] = TermId(r.u32());
            if (index != nullptr && ids[t].value >= index->term_count()) {
                throw format_error("store: subset term outside the index dictionary");
            }
        }
        StoredSubset s;
        try {
            s.key = SubsetKey(std::span<TermId const>(ids.data(), size));
        } catch (std::invalid_argument const& e) {
            throw format_error(std::string("store: ") + e.what());
        }
        s.depth = r.u32();
        lengths.push_back(r.u32());
        if (r.u64() != expected) {
            throw format_error("store: prefix offsets not contiguous");
        }
        expected += lengths.back() * prefix_entry_bytes(size);
        subsets.push_back(std::move(s));
    }
    for (auto& s : subsets) {
        s.thresholds.resize(k_count);
        for (auto& th : s.thresholds) {
            th = r.u32();
        }
    }
    if (r.u64() != expected) {
        throw format_error("store: prefix section length mismatch");
    }
    r.need(expected);
    for (std::size_t i = 0; i < subsets.size(); ++i) {
        auto& s = subsets[i];
        s.prefix.resize(lengths[i]);
        for (auto& e : s.prefix) {
            e.doc = DocId(r.u32());
            if (index != nullptr && e.doc.value >= index->document_count()) {
                throw format_error("store: prefix docID outside the index");
            }
            for (std::size_t t = 0; t < s.key.size(); ++t) {
                e.term_scores[t] = r.u16();
                e.total += e.term_scores[t];
            }
        }
    }
    if (r.remaining() != 0) {
        throw format_error("store: trailing bytes");
    }
    return PrefixStore(std::move(meta), std::move(subsets));
}

void save_store(PrefixStore const& store, std::string const& path)
{
    detail::write_file_bytes(path, serialize_store(store));
}

PrefixStore load_store(std::string const& path, ImpactIndex const* index)
{
    return deserialize_store(detail::read_file_bytes(path), index);
}

std::size_t StoreSizeReport::prefixes() const noexcept
{
    std::size_t sum = 0;
    for (auto b : prefixes_by_size) {
        sum += b;
    }
    return sum;
}

std::size_t StoreSizeReport::total() const noexcept
{
    return metadata + dictionary + quantiles + prefix_header + prefixes() + trailer;
}

StoreSizeReport store_size_report(PrefixStore const& store)
{
    auto const& meta = store.metadata();
    StoreSizeReport r;
    r.metadata = 4 + 1 + 8 + 1 + 4 * meta.k_values.size() + 2 + meta.policy_name.size() + 4;
    for (auto const& s : store.subsets()) {
        r.dictionary += 1 + 4 * s.key.size() + 4 + 4 + 8;
        r.quantiles += 4 * s.thresholds.size();
        r.prefixes_by_size[s.key.size() - 1] += s.prefix.size() * prefix_entry_bytes(s.key.size());
    }
    r.prefix_header = 8;
    r.trailer = 8;
    return r;
}

}  // namespace tkest
