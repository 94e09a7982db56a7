#include "tkest/query.hpp"

#include <algorithm>

namespace tkest {

Query resolve_query(ImpactIndex const& index, std::span<std::string const> tokens)
{
    Query q;
    q.original_length = tokens.size();
    for (auto const& token : tokens) {
        if (auto id = index.find_term(token)) {
            q.terms.push_back(*id);
        } else {
            ++q.unknown_terms;
        }
    }
    std::sort(q.terms.begin(), q.terms.end());
    q.terms.erase(std::unique(q.terms.begin(), q.terms.end()), q.terms.end());
    return q;
}

Query parse_query(ImpactIndex const& index, std::string_view text)
{
    auto tokens = tokenize(text);
    return resolve_query(index, tokens);
}

Query make_query(std::vector<TermId> terms)
{
    Query q;
    q.original_length = terms.size();
    q.terms = std::move(terms);
    std::sort(q.terms.begin(), q.terms.end());
    q.terms.erase(std::unique(q.terms.begin(), q.terms.end()), q.terms.end());
    return q;
}

}  // namespace tkest
