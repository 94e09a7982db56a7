#include "tkest/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace tkest::synthetic {

namespace {

/// Inverse-CDF sampler over ranks [0, n) with P(r) proportional to 1/(r+1)^s.
class zipf_sampler {
  public:
    zipf_sampler(std::size_t n, double s)
    {
        if (n == 0) {
            throw std::invalid_argument("zipf sampler: empty support");
        }
        m_cdf.reserve(n);
        double acc = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            acc += 1.0 / std::pow(static_cast<double>(r + 1), s);
            m_cdf.push_back(acc);
        }
        for (auto& c : m_cdf) {
            c /= acc;
        }
    }

    template <typename Rng>
    std::size_t operator()(Rng& rng) const
    {
        double const u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        auto it = std::lower_bound(m_cdf.begin(), m_cdf.end(), u);
        return std::min(static_cast<std::size_t>(it - m_cdf.begin()), m_cdf.size() - 1);
    }

  private:
    std::vector<double> m_cdf;
};

}  // namespace

std::string term_for_rank(std::size_t rank) { return "w" + std::to_string(rank); }

void write_corpus(CorpusOptions const& options, std::ostream& out)
{
    if (options.min_length > options.max_length || options.max_length == 0) {
        throw std::invalid_argument("synthetic corpus: bad length range");
    }
    std::mt19937_64 rng(options.seed);
    zipf_sampler words(options.vocabulary, options.zipf_exponent);
    std::uniform_int_distribution<std::size_t> length(options.min_length, options.max_length);
    for (std::size_t d = 0; d < options.documents; ++d) {
        out << "doc" << d << '\t';
        auto const n = length(rng);
        for (std::size_t i = 0; i < n; ++i) {
            if (i > 0) {
                out << ' ';
            }
            out << term_for_rank(words(rng));
        }
        out << '\n';
    }
}

std::string corpus_string(CorpusOptions const& options)
{
    std::ostringstream out;
    write_corpus(options, out);
    return out.str();
}

std::vector<std::string> queries(QueryOptions const& options)
{
    if (options.first_rank >= options.last_rank || options.min_terms == 0 || options.min_terms > options.max_terms
        || options.max_terms > options.last_rank - options.first_rank) {
        throw std::invalid_argument("synthetic queries: bad options");
    }
    std::mt19937_64 rng(options.seed);
    zipf_sampler terms(options.last_rank - options.first_rank, options.zipf_exponent);
    std::uniform_int_distribution<std::size_t> length(options.min_terms, options.max_terms);
    std::vector<std::string> out;
    out.reserve(options.queries);
    for (std::size_t q = 0; q < options.queries; ++q) {
        auto const n = length(rng);
        std::vector<std::size_t> chosen;
        while (chosen.size() < n) {
            auto const r = options.first_rank + terms(rng);
            if (std::find(chosen.begin(), chosen.end(), r) == chosen.end()) {
                chosen.push_back(r);
            }
        }
        std::string line;
        for (auto r : chosen) {
            if (!line.empty()) {
                line += ' ';
            }
            line += term_for_rank(r);
        }
        out.push_back(std::move(line));
    }
    return out;
}

}  // namespace tkest::synthetic
