#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace tkest::synthetic {

/// Zipfian bag-of-words corpus. Term of rank r (0-based) is spelled `w<r>`.
struct CorpusOptions {
    std::size_t documents = 12000;
    std::size_t vocabulary = 4000;
    double zipf_exponent = 1.0;
    std::size_t min_length = 20;
    std::size_t max_length = 180;
    std::uint64_t seed = 42;
};

/// Query generator drawing distinct terms from ranks [first_rank, last_rank)
/// with its own Zipf skew, so popular query terms repeat across the log.
struct QueryOptions {
    std::size_t queries = 1000;
    std::size_t min_terms = 1;
    std::size_t max_terms = 6;
    std::size_t first_rank = 10;
    std::size_t last_rank = 1500;
    double zipf_exponent = 0.9;
    std::uint64_t seed = 7;
};

[[nodiscard]] std::string term_for_rank(std::size_t rank);

/// Writes `doc<i><TAB>text` lines.
void write_corpus(CorpusOptions const& options, std::ostream& out);
[[nodiscard]] std::string corpus_string(CorpusOptions const& options);

/// One space-separated query per element.
[[nodiscard]] std::vector<std::string> queries(QueryOptions const& options);

}  // namespace tkest::synthetic
