#pragma once

#include <cmath>
#include <cstdint>

namespace tkest::scoring {

/// Okapi BM25 term weight with the non-negative IDF variant
/// log(1 + (N - df + 0.5) / (df + 0.5)).
[[nodiscard]] inline double bm25(std::uint32_t tf,
                                 std::uint32_t df,
                                 std::uint64_t doc_count,
                                 std::uint32_t doc_len,
                                 double avg_doc_len,
                                 double k1,
                                 double b)
{
    double const n = static_cast<double>(doc_count);
    double const idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    double const f = tf;
    double const norm = 1.0 - b + b * (doc_len / avg_doc_len);
    return idf * (f * (k1 + 1.0)) / (f + k1 * norm);
}

/// Query likelihood with Dirichlet smoothing, rank-equivalent per-term form:
/// log(1 + tf / (mu * P(t|C))) + log(mu / (|d| + mu)). Can be <= 0, in which
/// case the posting is not stored.
[[nodiscard]] inline double qld(std::uint32_t tf,
                                std::uint64_t collection_freq,
                                std::uint64_t collection_len,
                                std::uint32_t doc_len,
                                double mu)
{
    double const p = static_cast<double>(collection_freq) / static_cast<double>(collection_len);
    return std::log(1.0 + tf / (mu * p)) + std::log(mu / (doc_len + mu));
}

}  // namespace tkest::scoring
