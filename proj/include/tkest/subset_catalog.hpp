#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tkest/index.hpp"
#include "tkest/query.hpp"

namespace tkest {

/// Sorted set of 1 to 4 term ids.
class SubsetKey {
  public:
    static constexpr std::size_t max_terms = 4;

    SubsetKey() = default;
    /// Throws std::invalid_argument unless `terms` is strictly ascending and
    /// holds 1..4 ids.
    explicit SubsetKey(std::span<TermId const> terms);
    SubsetKey(std::initializer_list<TermId> terms) : SubsetKey(std::span<TermId const>(terms.begin(), terms.size())) {}

    [[nodiscard]] std::span<TermId const> terms() const noexcept { return {m_terms.data(), m_size}; }
    [[nodiscard]] std::size_t size() const noexcept { return m_size; }
    [[nodiscard]] TermId operator[](std::size_t i) const noexcept { return m_terms[i]; }

    /// True if every term of this key is in `query` (whose terms are sorted).
    [[nodiscard]] bool contained_in(Query const& query) const noexcept;

    /// Orders by size first, then lexicographically by term id.
    friend std::strong_ordering operator<=>(SubsetKey const& a, SubsetKey const& b) noexcept;
    friend bool operator==(SubsetKey const& a, SubsetKey const& b) noexcept;

  private:
    std::array<TermId, max_terms> m_terms{};
    std::size_t m_size = 0;
};

struct SubsetKeyHash {
    std::size_t operator()(SubsetKey const& key) const noexcept;
};

struct SubsetStats {
    SubsetKey key;
    std::uint64_t frequency = 0;  ///< training queries containing every term of key

    friend bool operator==(SubsetStats const&, SubsetStats const&) = default;
};

struct FrequencyTier {
    std::uint64_t min_frequency = 1;
    double multiplier = 1.0;
};

/// Prefix depth rule: base depth per subset size, scaled by the first tier
/// (tiers sorted by descending min_frequency) the subset's frequency reaches.
struct DepthPolicy {
    std::string name;
    std::map<std::size_t, std::uint32_t> base_depth;
    std::vector<FrequencyTier> tiers;
    std::map<std::size_t, std::uint64_t> min_frequency_to_keep;

    [[nodiscard]] std::size_t max_size() const;
    /// Throws std::invalid_argument if malformed.
    void validate() const;
};

struct CatalogEntry {
    SubsetStats stats;
    /// Prefix entries to materialize. 0 marks a quantile-only subset.
    std::uint32_t depth = 0;

    friend bool operator==(CatalogEntry const&, CatalogEntry const&) = default;
};

/// Queries longer than this contribute only subsets of their rarest terms.
constexpr std::size_t mining_term_cap = 12;

/// Counts every subset (size <= max_size) of every log query. One query per
/// line; lines go through the corpus tokenizer and unknown terms are dropped.
/// Sizes absent from `min_freq` default to a floor of 1. Output is sorted by key.
[[nodiscard]] std::vector<SubsetStats> mine_subsets(std::istream& log,
                                                    ImpactIndex const& index,
                                                    std::size_t max_size,
                                                    std::map<std::size_t, std::uint64_t> const& min_freq = {});
[[nodiscard]] std::vector<SubsetStats> mine_subsets(std::string const& log_path,
                                                    ImpactIndex const& index,
                                                    std::size_t max_size,
                                                    std::map<std::size_t, std::uint64_t> const& min_freq = {});

[[nodiscard]] std::vector<CatalogEntry> assign_depths(std::span<SubsetStats const> stats,
                                                      DepthPolicy const& policy,
                                                      std::uint32_t k_max);

/// One of "huge", "large", "medium", "small"; throws std::invalid_argument otherwise.
[[nodiscard]] DepthPolicy named_config(std::string_view name);

/// Policy with explicit per-size depths (`depths[i]` for size i+1), no
/// frequency scaling and no frequency floor.
[[nodiscard]] DepthPolicy depth_schedule(std::span<std::uint32_t const> depths);

/// Adds a quantile-only entry (depth 0) for every mined subset the catalog
/// does not already cover.
[[nodiscard]] std::vector<CatalogEntry> with_quantile_coverage(std::vector<CatalogEntry> catalog,
                                                               std::span<SubsetStats const> stats);

/// TSV dump: `terms(comma-joined)<TAB>frequency<TAB>depth`.
void write_catalog(std::span<CatalogEntry const> catalog, ImpactIndex const& index, std::ostream& out);
[[nodiscard]] std::vector<CatalogEntry> read_catalog(std::istream& in, ImpactIndex const& index);

}  // namespace tkest
