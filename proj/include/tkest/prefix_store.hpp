#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tkest/index.hpp"
#include "tkest/query.hpp"
#include "tkest/subset_catalog.hpp"

namespace tkest {

constexpr std::uint8_t store_format_version = 1;

/// One document of a conjunctive prefix. `term_scores[i]` belongs to the
/// i-th term of the owning subset; slots past the subset size are zero.
struct PrefixEntry {
    DocId doc;
    std::array<Impact, SubsetKey::max_terms> term_scores{};
    Score total = 0;

    friend bool operator==(PrefixEntry const&, PrefixEntry const&) = default;
};

/// Quantiles and (optionally) a score-descending prefix for one subset.
struct StoredSubset {
    SubsetKey key;
    /// th(key, k) for each k of the store's grid, aligned with StoreMetadata::k_values.
    std::vector<Score> thresholds;
    /// Requested prefix depth; 0 for quantile-only subsets.
    std::uint32_t depth = 0;
    /// Descending total, ascending docID on ties; size <= depth.
    std::vector<PrefixEntry> prefix;

    [[nodiscard]] bool has_prefix() const noexcept { return depth > 0; }

    friend bool operator==(StoredSubset const&, StoredSubset const&) = default;
};

struct StoreMetadata {
    std::vector<std::size_t> k_values;  ///< ascending, distinct
    std::string policy_name;
    std::uint64_t index_fingerprint = 0;

    friend bool operator==(StoreMetadata const&, StoreMetadata const&) = default;
};

class PrefixStore {
  public:
    PrefixStore() = default;
    /// Sorts subsets by key and validates every ordering invariant.
    PrefixStore(StoreMetadata metadata, std::vector<StoredSubset> subsets);

    [[nodiscard]] StoreMetadata const& metadata() const noexcept { return m_metadata; }
    [[nodiscard]] std::span<StoredSubset const> subsets() const noexcept { return m_subsets; }
    [[nodiscard]] std::size_t size() const noexcept { return m_subsets.size(); }
    [[nodiscard]] StoredSubset const* find(SubsetKey const& key) const;

    /// Position of `k` in the quantile grid, if present.
    [[nodiscard]] std::optional<std::size_t> k_slot(std::size_t k) const;

    /// Throws compatibility_error if this store was built for another index.
    void check_compatible(ImpactIndex const& index) const;

    /// Throws format_error on any ordering or consistency violation.
    void validate() const;

    friend bool operator==(PrefixStore const& a, PrefixStore const& b)
    {
        return a.m_metadata == b.m_metadata && a.m_subsets == b.m_subsets;
    }

  private:
    StoreMetadata m_metadata;
    std::vector<StoredSubset> m_subsets;
    std::unordered_map<SubsetKey, std::size_t, SubsetKeyHash> m_lookup;
};

struct StoreBuildOptions {
    std::vector<std::size_t> k_values{10, 100, 1000};
    std::string policy_name;
    unsigned threads = 1;
};

struct StoreBuildResult {
    PrefixStore store;
    std::size_t skipped_subsets = 0;  ///< catalog entries naming terms absent from the index
};

/// Quantiles come from the disjunctive score of each subset; prefixes from
/// the conjunctive result (documents containing every subset term).
[[nodiscard]] StoreBuildResult build_store(ImpactIndex const& index,
                                           std::span<CatalogEntry const> catalog,
                                           StoreBuildOptions const& options = {});

/// Conjunctive top-`depth` for one subset, in prefix order.
[[nodiscard]] std::vector<PrefixEntry> conjunctive_prefix(ImpactIndex const& index,
                                                          SubsetKey const& key,
                                                          std::size_t depth);

struct MatchingSubset {
    StoredSubset const* subset = nullptr;
    bool has_quantiles = true;
    bool has_prefix = false;
};

/// Every stored subset whose terms all occur in `query`, ordered by key.
[[nodiscard]] std::vector<MatchingSubset> matching_subsets(PrefixStore const& store, Query const& query);

[[nodiscard]] std::vector<std::uint8_t> serialize_store(PrefixStore const& store);
/// When `index` is given the stored fingerprint is checked against it.
[[nodiscard]] PrefixStore deserialize_store(std::span<std::uint8_t const> bytes, ImpactIndex const* index = nullptr);
void save_store(PrefixStore const& store, std::string const& path);
[[nodiscard]] PrefixStore load_store(std::string const& path, ImpactIndex const* index = nullptr);

/// Exact serialized byte counts per section.
struct StoreSizeReport {
    std::size_t metadata = 0;    ///< magic, version, fingerprint, k grid, policy name, subset count
    std::size_t dictionary = 0;  ///< subset keys, depths, prefix lengths and offsets
    std::size_t quantiles = 0;
    std::size_t prefix_header = 0;
    std::array<std::size_t, SubsetKey::max_terms> prefixes_by_size{};  ///< index 0 = single terms
    std::size_t trailer = 0;

    [[nodiscard]] std::size_t prefixes() const noexcept;
    [[nodiscard]] std::size_t total() const noexcept;
};

/// Bytes of one stored prefix entry for a subset of `subset_size` terms.
[[nodiscard]] constexpr std::size_t prefix_entry_bytes(std::size_t subset_size) noexcept
{
    return 4 + 2 * subset_size;
}

[[nodiscard]] StoreSizeReport store_size_report(PrefixStore const& store);

}  // namespace tkest
