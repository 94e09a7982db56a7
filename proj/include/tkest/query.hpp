#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tkest/index.hpp"

namespace tkest {

/// A disjunctive query resolved against one index.
struct Query {
    std::vector<TermId> terms;           ///< distinct, ascending
    std::size_t original_length = 0;     ///< tokens before deduplication
    std::size_t unknown_terms = 0;       ///< tokens absent from the dictionary

    [[nodiscard]] bool empty() const noexcept { return terms.empty(); }
    [[nodiscard]] std::size_t size() const noexcept { return terms.size(); }
};

/// Resolves already-tokenized terms. Unknown terms are dropped and counted.
[[nodiscard]] Query resolve_query(ImpactIndex const& index, std::span<std::string const> tokens);

/// Tokenizes `text` with the corpus tokenizer, then resolves it.
[[nodiscard]] Query parse_query(ImpactIndex const& index, std::string_view text);

/// Builds a query directly from term ids (deduplicated and sorted).
[[nodiscard]] Query make_query(std::vector<TermId> terms);

}  // namespace tkest
